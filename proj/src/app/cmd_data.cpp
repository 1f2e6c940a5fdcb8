#include <deque>

#include "internal.hpp"
#include "spv/common/digest.hpp"
#include "spv/common/parallel.hpp"
#include "spv/common/rng.hpp"
#include "spv/segnet/unet.hpp"

namespace spv::app {

using namespace detail;

GenDataResult cmd_gen_data(const ExperimentConfig& cfg, const Progress& progress) {
    const Paths paths{cfg.out_dir};
    auto dcfg = cfg.data;
    dcfg.seed = derive_seed(cfg.seed, "data");
    if (progress) progress("generating " + std::to_string(dcfg.n) + " phantoms");
    const auto ds = guard_io("generating phantoms", [&] { return phantom::make_dataset(dcfg); });

    fs::create_directories(paths.data_dir() / "grids");
    fs::create_directories(paths.data_dir() / "slices");
    parallel_for(ds.records.size(), [&](std::size_t i) {
        const auto& rec = ds.records[i];
        guard_io("writing " + rec.id, [&] {
            phantom::write_grid(paths.data_dir() / rec.grid_file, ds.grids[i]);
            for (auto axis : {phantom::SliceAxis::Coronal, phantom::SliceAxis::Transverse})
                ussim::write_pgm(paths.slice(rec.id, axis), ussim::to_gray(model_slice(ds.grids[i], axis, cfg.slice_size)));
            return 0;
        });
    });
    guard_io("writing manifest", [&] { phantom::write_manifest(paths.manifest(), ds.records); return 0; });
    write_text(cfg.out_dir / "config.json", to_json(cfg).dump(2) + "\n");

    GenDataResult r;
    r.records = ds.records.size();
    for (const auto& rec : ds.records) {
        ++r.fold_sizes[static_cast<std::size_t>(rec.fold)];
        r.fold_positives[static_cast<std::size_t>(rec.fold)] += rec.splenomegaly;
    }
    r.manifest_digest = file_digest(paths.manifest());
    if (progress) progress("manifest digest " + r.manifest_digest);
    return r;
}

RenderResult cmd_render_us(const ExperimentConfig& cfg, const Progress& progress) {
    const auto ws = load_workspace(cfg, true);
    const auto cone = ussim::make_cone(cfg.cone);
    const std::uint64_t us_root = derive_seed(cfg.seed, "us");
    fs::create_directories(ws.paths.root / "us");
    if (progress) progress("rendering " + std::to_string(ws.records.size()) + " pseudo-ultrasound images");
    parallel_for(ws.records.size(), [&](std::size_t i) {
        const auto& id = ws.records[i].id;
        const auto slice = model_slice(ws.grids[i], phantom::SliceAxis::Coronal, cfg.slice_size);
        ussim::Layout layout;
        try {
            layout = ussim::compose_layout_fitted(slice, cone);
        } catch (const ussim::OrganOutsideCone& e) {
            throw DataError(id + ": organ does not fit the imaging cone (" + std::to_string(e.outside_pixels) + " pixels outside)");
        }
        const auto image = ussim::render_pseudo_us(layout, derive_seed(us_root, id), cfg.render);
        guard_io("writing ultrasound images", [&] {
            ussim::write_pgm(ws.paths.us_layout(id), ussim::to_gray(layout));
            ussim::write_pgm(ws.paths.us_image(id), ussim::to_gray(image));
            return 0;
        });
    });
    Digest d;
    for (const auto& rec : ws.records) d.update(file_digest(ws.paths.us_image(rec.id))).update(file_digest(ws.paths.us_layout(rec.id)));
    return RenderResult{ws.records.size(), d.hex()};
}

namespace {

segnet::SegPair load_pair(const Paths& paths, const std::string& id) {
    return guard_io("reading ultrasound pair for " + id, [&] {
        const auto image = ussim::read_pgm(paths.us_image(id));
        const auto layout = ussim::read_pgm(paths.us_layout(id));
        if (image.rows != layout.rows || image.cols != layout.cols) throw DataError(id + ": image and layout sizes differ");
        segnet::SegPair p{gray_to_tensor(image), grad::Tensor({1, layout.rows, layout.cols})};
        for (std::size_t k = 0; k < layout.px.size(); ++k) p.mask[k] = layout.px[k] == 255 ? 1.0 : 0.0;
        return p;
    });
}

phantom::Mask2D tensor_mask(const grad::Tensor& t, std::size_t rows, std::size_t cols) {
    phantom::Mask2D m(rows, cols);
    for (std::size_t k = 0; k < rows * cols; ++k) m.px[k] = t[k] > 0.5;
    return m;
}

}  // namespace

SegRunResult cmd_train_seg(const ExperimentConfig& cfg, const Progress& progress) {
    const auto ws = load_workspace(cfg, false);
    for (const auto& rec : ws.records)
        if (!fs::exists(ws.paths.us_image(rec.id))) throw DataError("missing ultrasound images; run render-us first");
    std::vector<segnet::SegPair> train, val, test;
    for (std::size_t i = 0; i < ws.records.size(); ++i) {
        const int f = ws.records[i].fold;
        if (f >= 2 && cfg.unet.max_train_records && train.size() >= cfg.unet.max_train_records) continue;
        (f == 0 ? test : f == 1 ? val : train).push_back(load_pair(ws.paths, ws.records[i].id));
    }
    if (train.size() < 10) throw DataError("train-seg needs at least 10 training images, found " + std::to_string(train.size()));

    segnet::UNetConfig ucfg = cfg.unet.model;
    ucfg.input_size = cfg.cone.rows;
    segnet::UNet net(ucfg, derive_seed(cfg.seed, "unet.init"));
    const auto res = segnet::train_unet(net, train, val, cfg.unet.schedule, derive_seed(cfg.seed, "unet.train"),
                                        [&](const segnet::SegEpoch& e) {
                                            if (progress) progress("unet epoch " + std::to_string(e.epoch) + " bce " + fmt(e.train_bce) +
                                                                   " val dice " + fmt(e.val_dice));
                                        });

    std::string log = "epoch,train_bce,val_dice\n";
    for (const auto& e : res.log) log += std::to_string(e.epoch) + "," + fmt(e.train_bce) + "," + fmt(e.val_dice) + "\n";
    write_text(ws.paths.unet_log(), log);
    grad::Checkpoint ck{"unet", {}, net.store().export_tensors()};
    ck.metadata["input_size"] = ucfg.input_size;
    ck.metadata["epochs"] = cfg.unet.schedule.epochs;
    ck.metadata["best_epoch"] = res.best_epoch;
    ck.metadata["best_val_dice"] = res.best_val_dice;
    ck.metadata["final_train_bce"] = res.log.back().train_bce;
    ck.metadata["config_digest"] = config_digest(cfg);
    guard_io("writing checkpoint", [&] { grad::save_checkpoint(ws.paths.unet(), ck); return 0; });

    std::vector<grad::Tensor> images;
    for (const auto& p : test) images.push_back(p.image);
    const auto pred = segnet::segment_all(net, images);
    double dice = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i)
        dice += analysis::dice(pred[i], tensor_mask(test[i].mask, ucfg.input_size, ucfg.input_size));
    SegRunResult r{train.size(), val.size(), test.size(), res.best_epoch, res.best_val_dice, 0.0};
    r.test_dice = test.empty() ? 0.0 : dice / static_cast<double>(test.size());
    return r;
}

phantom::Mask2D us_mask_to_model_frame(const phantom::Mask2D& us_mask, std::size_t size) {
    const std::size_t rows = us_mask.rows, cols = us_mask.cols;
    std::vector<int> label(rows * cols, -1);
    std::size_t best_size = 0;
    int best = -1, next = 0;
    for (std::size_t start = 0; start < rows * cols; ++start) {
        if (!us_mask.px[start] || label[start] >= 0) continue;
        std::size_t n = 0;
        std::deque<std::size_t> queue{start};
        label[start] = next;
        while (!queue.empty()) {
            const std::size_t k = queue.front();
            queue.pop_front();
            ++n;
            const std::size_t r = k / cols, c = k % cols;
            auto visit = [&](std::size_t q) {
                if (us_mask.px[q] && label[q] < 0) {
                    label[q] = next;
                    queue.push_back(q);
                }
            };
            if (r > 0) visit(k - cols);
            if (r + 1 < rows) visit(k + cols);
            if (c > 0) visit(k - 1);
            if (c + 1 < cols) visit(k + 1);
        }
        if (n > best_size) best_size = n, best = next;
        ++next;
    }
    phantom::Mask2D component(rows, cols, us_mask.spacing_mm);
    for (std::size_t k = 0; k < rows * cols; ++k) component.px[k] = best >= 0 && label[k] == best;
    const auto upright = phantom::rotate90_cw(component);

    phantom::Mask2D out(size, size, us_mask.spacing_mm);
    if (best < 0) return out;
    // same rounding as center_in_frame: floor(mean + 1/2)
    long long sr = 0, sc = 0;
    const long long n = static_cast<long long>(best_size);
    for (std::size_t r = 0; r < upright.rows; ++r)
        for (std::size_t c = 0; c < upright.cols; ++c)
            if (upright.at(r, c)) sr += static_cast<long long>(r), sc += static_cast<long long>(c);
    const long dr = static_cast<long>(size / 2) - static_cast<long>((2 * sr + n) / (2 * n));
    const long dc = static_cast<long>(size / 2) - static_cast<long>((2 * sc + n) / (2 * n));
    for (std::size_t r = 0; r < upright.rows; ++r)
        for (std::size_t c = 0; c < upright.cols; ++c) {
            const long nr = static_cast<long>(r) + dr, nc = static_cast<long>(c) + dc;
            if (upright.at(r, c) && nr >= 0 && nc >= 0 && nr < static_cast<long>(size) && nc < static_cast<long>(size))
                out.at(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)) = 1;
        }
    return out;
}

}  // namespace spv::app
