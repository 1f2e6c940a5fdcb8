#include <algorithm>
#include <map>
#include <sstream>

#include "internal.hpp"
#include "spv/analysis/latent_map.hpp"
#include "spv/common/digest.hpp"
#include "spv/common/rng.hpp"
#include "spv/estimators/estimators.hpp"
#include "spv/segnet/unet.hpp"

namespace spv::app {

using namespace detail;
using analysis::MetricReport;

namespace {

std::vector<double> values(const std::vector<estimators::VolumeEstimate>& est) {
    std::vector<double> v;
    for (const auto& e : est) v.push_back(e.vol_ml);
    return v;
}

MetricReport report_for(const std::vector<double>& truths, const std::vector<estimators::VolumeEstimate>& est,
                        double threshold, bool with_ci) {
    std::vector<analysis::Interval> cis;
    if (with_ci)
        for (const auto& e : est) cis.push_back({e.ci->low, e.ci->high});
    auto r = analysis::make_report(truths, values(est), with_ci ? &cis : nullptr);
    r.cls = analysis::sen_spe_acc(truths, values(est), threshold);
    return r;
}

std::optional<double> mean_if_all(const std::vector<std::optional<double>>& xs) {
    if (xs.empty()) return std::nullopt;
    double s = 0.0;
    for (const auto& x : xs) {
        if (!x) return std::nullopt;
        s += *x;
    }
    return s / static_cast<double>(xs.size());
}

EvalRow average_row(const std::string& method, const std::string& views, std::size_t n,
                    const std::vector<MetricReport>& reports) {
    EvalRow row{method, views, n, reports.size(), {}, {}, {}, {}, {}, 0.0};
    std::vector<std::optional<double>> pearson, mcia, sen, spe;
    for (const auto& r : reports) {
        row.mrva.mean += r.mrva.mean;
        row.mrva.std += r.mrva.std;
        row.acc += r.cls.acc;
        pearson.push_back(r.pearson);
        mcia.push_back(r.mcia);
        sen.push_back(r.cls.sen);
        spe.push_back(r.cls.spe);
    }
    const double k = static_cast<double>(std::max<std::size_t>(1, reports.size()));
    row.mrva.mean /= k;
    row.mrva.std /= k;
    row.acc /= k;
    row.pearson = mean_if_all(pearson);
    row.mcia = mean_if_all(mcia);
    row.sen = mean_if_all(sen);
    row.spe = mean_if_all(spe);
    return row;
}

analysis::MeanStd average_mrva(const std::vector<analysis::MeanStd>& xs) {
    analysis::MeanStd out;
    for (const auto& x : xs) out.mean += x.mean, out.std += x.std;
    out.mean /= static_cast<double>(xs.size());
    out.std /= static_cast<double>(xs.size());
    return out;
}

std::vector<grad::Tensor> inputs_for(const Workspace& ws, const std::vector<std::size_t>& idx, vae::ViewMode views,
                                     std::size_t size) {
    std::vector<grad::Tensor> out;
    for (auto i : idx) out.push_back(to_input(ws.grids[i], views, size));
    return out;
}

std::vector<double> truths_for(const Workspace& ws, const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    for (auto i : idx) out.push_back(ws.records[i].volume_ml);
    return out;
}

bool models_present(const ExperimentConfig& cfg, vae::ViewMode views) {
    return fs::exists(Paths{cfg.out_dir}.model(views, cfg.train.validation_folds.front(), "rvae"));
}

}  // namespace

std::vector<EvalRow> cmd_eval(const ExperimentConfig& cfg, const Progress& progress) {
    const auto ws = load_workspace(cfg, true);
    const auto test = fold_indices(ws, 0);
    if (test.empty()) throw DataError("hold-out fold 0 is empty");
    const auto truths = truths_for(ws, test);
    std::vector<EvalRow> rows;
    std::ostringstream samples;
    samples << "id,truth_ml,est_ml,method,ci_low,ci_high,views\n";
    auto add_samples = [&](const std::string& views, const std::string& method,
                           const std::vector<std::vector<estimators::VolumeEstimate>>& per_model) {
        for (std::size_t s = 0; s < test.size(); ++s) {
            double v = 0.0, lo = 0.0, hi = 0.0;
            for (const auto& m : per_model) {
                v += m[s].vol_ml;
                if (m[s].ci) lo += m[s].ci->low, hi += m[s].ci->high;
            }
            const double k = static_cast<double>(per_model.size());
            const bool ci = per_model.front()[s].ci.has_value();
            samples << ws.records[test[s]].id << "," << fmt(truths[s]) << "," << fmt(v / k) << "," << method << ","
                    << (ci ? fmt(lo / k) : "") << "," << (ci ? fmt(hi / k) : "") << "," << views << "\n";
        }
    };

    for (auto views : cfg.views) {
        const std::string vname = vae::to_string(views);
        if (!models_present(cfg, views)) {
            if (progress) progress("no " + vname + "-view models; skipping those rows");
            continue;
        }
        const bool with_ci = cfg.train.ci_variant;
        auto models = load_fold_models(cfg, views, true, with_ci);
        const auto test_inputs = inputs_for(ws, test, views, cfg.slice_size);
        std::map<std::string, std::vector<MetricReport>> reports;
        std::map<std::string, std::vector<std::vector<estimators::VolumeEstimate>>> estimates;
        for (auto& m : models) {
            if (progress) progress("evaluating " + vname + " fold" + std::to_string(m.fold));
            const auto split = cv_split(ws, m.fold);
            const auto train_codes = vae::encode_all(*m.plain, inputs_for(ws, split.train, views, cfg.slice_size));
            estimators::TrainingLatentIndex index;
            for (std::size_t k = 0; k < split.train.size(); ++k)
                index.push_back({train_codes[k].mu, ws.records[split.train[k]].volume_ml, ws.records[split.train[k]].id});
            const auto plr = estimators::plr_fit(index);
            std::vector<estimators::VolumeEstimate> nn, pl;
            for (const auto& c : vae::encode_all(*m.plain, test_inputs)) {
                nn.push_back(estimators::nn_estimate(c.mu, index));
                pl.push_back(estimators::plr_estimate(c.mu, plr));
            }
            estimates["NN"].push_back(nn);
            estimates["PLR"].push_back(pl);
            estimates["RVAE"].push_back(estimators::rvae_estimate(*m.rvae, test_inputs));
            if (with_ci)
                estimates["RVAE-CI"].push_back(estimators::rvae_ci(*m.ci, test_inputs, cfg.train.schedule.ci_samples,
                                                                   model_seed(cfg, "ci", views, m.fold)));
        }
        for (const std::string method : {"NN", "PLR", "RVAE", "RVAE-CI"}) {
            if (!estimates.count(method)) continue;
            std::vector<MetricReport> per_model;
            for (const auto& est : estimates[method]) per_model.push_back(report_for(truths, est, cfg.threshold_ml, method == "RVAE-CI"));
            rows.push_back(average_row(method, vname, test.size(), per_model));
            add_samples(vname, method, estimates[method]);
        }
    }

    std::vector<estimators::VolumeEstimate> length_est, lwt_est;
    for (auto i : test) {
        const auto m = phantom::measure_length_width_thickness(ws.grids[i]);
        length_est.push_back(estimators::clinical_length(m.length_cm));
        lwt_est.push_back(estimators::clinical_three_measure(m.length_cm, m.width_cm, m.thickness_cm));
    }
    for (const auto& [name, est] : {std::pair{"clinical_length", length_est}, std::pair{"clinical_lwt", lwt_est}}) {
        auto row = average_row(name, "none", test.size(), {report_for(truths, est, cfg.threshold_ml, false)});
        row.models = 0;
        rows.push_back(row);
        add_samples("none", name, {est});
    }

    std::ostringstream csv;
    csv << "method,views,n,models,mrva_mean,mrva_std,pearson,mcia,sen,spe,acc\n";
    for (const auto& r : rows)
        csv << r.method << "," << r.views << "," << r.n << "," << r.models << "," << fmt(r.mrva.mean) << "," << fmt(r.mrva.std) << ","
            << fmt(r.pearson) << "," << fmt(r.mcia) << "," << fmt(r.sen) << "," << fmt(r.spe) << "," << fmt(r.acc) << "\n";
    write_text(ws.paths.reports() / "eval.csv", csv.str());
    write_text(ws.paths.reports() / "eval_samples.csv", samples.str());
    return rows;
}

std::vector<RobustnessRow> cmd_robustness(const ExperimentConfig& cfg, vae::ViewMode views, const Progress& progress) {
    const auto ws = load_workspace(cfg, true);
    const auto test = fold_indices(ws, 0);
    if (test.empty()) throw DataError("hold-out fold 0 is empty");
    const auto truths = truths_for(ws, test);
    auto models = load_fold_models(cfg, views, false, false);
    std::vector<phantom::Mask2D> coronal, transverse;
    for (auto i : test) {
        coronal.push_back(model_slice(ws.grids[i], phantom::SliceAxis::Coronal, cfg.slice_size));
        if (views == vae::ViewMode::Dual) transverse.push_back(model_slice(ws.grids[i], phantom::SliceAxis::Transverse, cfg.slice_size));
    }
    std::vector<RobustnessRow> rows;
    for (double angle : cfg.robustness_angles) {
        std::vector<grad::Tensor> inputs;
        for (std::size_t s = 0; s < test.size(); ++s) {
            const auto rotated = phantom::rotate_in_plane(coronal[s], angle);
            inputs.push_back(to_input(rotated, views == vae::ViewMode::Dual ? &transverse[s] : nullptr));
        }
        std::vector<analysis::MeanStd> per_model;
        for (auto& m : models)
            per_model.push_back(report_for(truths, estimators::rvae_estimate(*m.rvae, inputs), cfg.threshold_ml, false).mrva);
        rows.push_back(RobustnessRow{angle, average_mrva(per_model)});
        if (progress) progress("angle " + fmt(angle) + " mrva " + fmt(rows.back().mrva.mean));
    }
    std::ostringstream csv;
    csv << "angle_deg,mrva_mean,mrva_std\n";
    for (const auto& r : rows) csv << fmt(r.angle_deg) << "," << fmt(r.mrva.mean) << "," << fmt(r.mrva.std) << "\n";
    write_text(ws.paths.reports() / ("robustness_" + std::string(vae::to_string(views)) + ".csv"), csv.str());
    return rows;
}

PipelineResult cmd_pipeline(const ExperimentConfig& cfg, const Progress& progress) {
    const auto ws = load_workspace(cfg, true);
    const auto test = fold_indices(ws, 0);
    if (test.empty()) throw DataError("hold-out fold 0 is empty");
    if (!fs::exists(ws.paths.unet())) throw DataError("missing " + ws.paths.unet().string() + "; run train-seg first");
    const auto ck = guard_io("reading U-Net checkpoint", [&] { return grad::load_checkpoint(ws.paths.unet()); });
    if (ck.kind != "unet") throw DataError(ws.paths.unet().string() + " is not a U-Net checkpoint");
    segnet::UNetConfig ucfg = cfg.unet.model;
    ucfg.input_size = cfg.cone.rows;
    segnet::UNet net(ucfg, 0);
    guard_io("loading U-Net weights", [&] { net.store().import_tensors(ck.tensors); return 0; });
    auto models = load_fold_models(cfg, vae::ViewMode::Single, false, false);

    PipelineResult res;
    std::vector<grad::Tensor> gt_inputs, pred_inputs;
    for (auto i : test) {
        const auto& id = ws.records[i].id;
        if (!fs::exists(ws.paths.us_image(id))) throw DataError("missing ultrasound image for " + id + "; run render-us first");
        const auto gt_slice = model_slice(ws.grids[i], phantom::SliceAxis::Coronal, cfg.slice_size);
        const auto image = guard_io("reading " + id, [&] { return ussim::read_pgm(ws.paths.us_image(id)); });
        const auto layout = guard_io("reading " + id, [&] { return ussim::read_pgm(ws.paths.us_layout(id)); });
        const auto organ = gray_to_mask(layout, 255, gt_slice.spacing_mm);
        auto pred = segnet::segment(net, gray_to_tensor(image));
        pred.spacing_mm = gt_slice.spacing_mm;
        PipelineRow row{id, ws.records[i].volume_ml, analysis::dice(pred, organ), {}, 0.0, 0.0};
        if (!pred.empty() && !organ.empty()) row.hausdorff_mm = analysis::hausdorff(pred, organ, gt_slice.spacing_mm);
        res.rows.push_back(row);
        gt_inputs.push_back(to_input(gt_slice, nullptr));
        pred_inputs.push_back(to_input(us_mask_to_model_frame(pred, cfg.slice_size), nullptr));
    }
    const auto truths = truths_for(ws, test);
    std::vector<analysis::MeanStd> gt_mrva, pred_mrva;
    for (auto& m : models) {
        if (progress) progress("pipeline fold" + std::to_string(m.fold));
        const auto gt = estimators::rvae_estimate(*m.rvae, gt_inputs);
        const auto pr = estimators::rvae_estimate(*m.rvae, pred_inputs);
        gt_mrva.push_back(report_for(truths, gt, cfg.threshold_ml, false).mrva);
        pred_mrva.push_back(report_for(truths, pr, cfg.threshold_ml, false).mrva);
        for (std::size_t s = 0; s < test.size(); ++s) {
            res.rows[s].gt_estimate_ml += gt[s].vol_ml / static_cast<double>(models.size());
            res.rows[s].pred_estimate_ml += pr[s].vol_ml / static_cast<double>(models.size());
        }
    }
    res.gt_mrva = average_mrva(gt_mrva);
    res.pred_mrva = average_mrva(pred_mrva);
    for (const auto& r : res.rows) res.mean_dice += r.dice / static_cast<double>(res.rows.size());

    std::ostringstream csv, summary;
    csv << "id,volume_ml,dice,hausdorff_mm,gt_estimate_ml,pred_estimate_ml\n";
    for (const auto& r : res.rows)
        csv << r.id << "," << fmt(r.volume_ml) << "," << fmt(r.dice) << "," << fmt(r.hausdorff_mm) << "," << fmt(r.gt_estimate_ml) << ","
            << fmt(r.pred_estimate_ml) << "\n";
    summary << "n,mean_dice,gt_mrva_mean,gt_mrva_std,pred_mrva_mean,pred_mrva_std,mrva_gap\n"
            << res.rows.size() << "," << fmt(res.mean_dice) << "," << fmt(res.gt_mrva.mean) << "," << fmt(res.gt_mrva.std) << ","
            << fmt(res.pred_mrva.mean) << "," << fmt(res.pred_mrva.std) << "," << fmt(res.gt_mrva.mean - res.pred_mrva.mean) << "\n";
    write_text(ws.paths.reports() / "pipeline.csv", csv.str());
    write_text(ws.paths.reports() / "pipeline_summary.csv", summary.str());
    return res;
}

namespace {

ussim::Gray8 decoded_strip(const grad::Tensor& t) {
    const std::size_t c = t.shape()[0], s = t.shape()[1];
    ussim::Gray8 g{s, c * s, std::vector<std::uint8_t>(s * c * s, 0)};
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t r = 0; r < s; ++r)
            for (std::size_t col = 0; col < s; ++col)
                g.px[r * c * s + ch * s + col] = t[(ch * s + r) * s + col] > 0.5 ? 255 : 0;
    return g;
}

}  // namespace

std::vector<LatentMapResult> cmd_latent_map(const ExperimentConfig& cfg, vae::ViewMode views, const Progress& progress) {
    const auto ws = load_workspace(cfg, true);
    const auto test = fold_indices(ws, 0);
    if (test.size() < 3) throw DataError("latent map needs at least 3 hold-out records");
    const auto truths = truths_for(ws, test);
    const auto inputs = inputs_for(ws, test, views, cfg.slice_size);
    const std::string vname = vae::to_string(views);
    std::vector<LatentMapResult> out;
    std::ostringstream summary;
    summary << "model,views,points,pc1_r,explained_ratio,decode_areas,inversions\n";
    for (const std::string kind : {"rvae", "vae"}) {
        auto model = load_vae(ws.paths.model(views, cfg.latent_fold, kind), kind, cfg, views);
        std::vector<analysis::Vec> mus;
        for (const auto& c : vae::encode_all(*model, inputs)) mus.push_back(c.mu);
        auto map = analysis::pca_map(mus);
        analysis::orient_pc1(map, truths);

        LatentMapResult r;
        r.model = kind;
        r.points = test.size();
        r.pc1_r = analysis::pc1_volume_correlation(map, truths);
        r.explained_ratio = map.explained_ratio;
        std::vector<analysis::LatentPoint> points;
        for (std::size_t s = 0; s < test.size(); ++s)
            points.push_back({ws.records[test[s]].id, map.coords[s][0], map.coords[s][1], truths[s], truths[s] > cfg.threshold_ml});
        const std::string stem = "latent_" + vname + "_" + kind;
        write_text(ws.paths.reports() / (stem + ".csv"), analysis::latent_csv(points));
        write_text(ws.paths.reports() / (stem + ".svg"),
                   analysis::latent_svg(points, kind + " latent means, " + vname + " view, fold " + std::to_string(cfg.latent_fold)));

        const auto decoded = vae::decode_latents(*model, analysis::principal_axis_latents(map, cfg.latent_samples));
        std::string areas;
        for (std::size_t k = 0; k < decoded.size(); ++k) {
            std::size_t area = 0;
            for (double v : decoded[k].data()) area += v > 0.5;
            r.decode_areas.push_back(area);
            if (k > 0 && area < r.decode_areas[k - 1]) ++r.inversions;
            areas += (k ? ";" : "") + std::to_string(area);
            guard_io("writing decoded samples", [&] {
                ussim::write_pgm(ws.paths.reports() / (stem + "_decode_" + std::to_string(k) + ".pgm"), decoded_strip(decoded[k]));
                return 0;
            });
        }
        summary << kind << "," << vname << "," << r.points << "," << fmt(r.pc1_r) << "," << fmt(r.explained_ratio) << "," << areas << ","
                << r.inversions << "\n";
        if (progress) progress(kind + " " + vname + " PC1-volume r = " + fmt(r.pc1_r) + ", decode areas " + areas);
        out.push_back(r);
    }
    write_text(ws.paths.reports() / ("latent_summary_" + vname + ".csv"), summary.str());
    return out;
}

namespace {

std::string csv_to_markdown(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::string row = "|";
        std::size_t cols = 1;
        for (char ch : line) {
            if (ch == ',') row += " |", ++cols;
            else row += ch;
        }
        out += row + " |\n";
        if (header) {
            out += "|";
            for (std::size_t c = 0; c < cols; ++c) out += "---|";
            out += "\n";
            header = false;
        }
    }
    return out;
}

}  // namespace

ReportResult cmd_report(const ExperimentConfig& cfg) {
    const Paths paths{cfg.out_dir};
    if (!fs::exists(paths.manifest())) throw DataError("no dataset at " + paths.manifest().string());
    std::vector<fs::path> files{paths.manifest()};
    for (const auto& dir : {paths.root / "models", paths.reports()}) {
        if (!fs::exists(dir)) continue;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            const auto name = e.path().filename().string();
            if (name == "report.md" || name == "digests.txt") continue;
            files.push_back(e.path());
        }
    }
    std::sort(files.begin() + 1, files.end());

    ReportResult res;
    std::string listing;
    for (const auto& f : files) {
        const auto rel = fs::relative(f, paths.root).generic_string();
        res.digests.emplace_back(rel, file_digest(f));
        listing += res.digests.back().second + "  " + rel + "\n";
    }
    res.combined_digest = digest_hex(listing);
    write_text(paths.reports() / "digests.txt", listing);

    std::ostringstream md;
    md << "# Run report\n\nseed " << cfg.seed << ", preset " << cfg.preset << ", config digest " << config_digest(cfg) << "\n";
    const std::pair<const char*, std::string> sections[] = {
        {"Volume estimation (hold-out fold)", "eval.csv"},
        {"In-plane rotation, single view", "robustness_single.csv"},
        {"In-plane rotation, dual view", "robustness_dual.csv"},
        {"Segmentation pipeline", "pipeline_summary.csv"},
        {"Latent maps, single view", "latent_summary_single.csv"},
        {"Latent maps, dual view", "latent_summary_dual.csv"},
    };
    for (const auto& [title, file] : sections) {
        const auto p = paths.reports() / file;
        if (!fs::exists(p)) continue;
        md << "\n## " << title << "\n\n" << csv_to_markdown(read_text(p));
    }
    md << "\n## Artefact digests\n\ncombined " << res.combined_digest << "\n\n```\n" << listing << "```\n";
    write_text(paths.reports() / "report.md", md.str());
    return res;
}

}  // namespace spv::app
