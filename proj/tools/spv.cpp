#include <fstream>
#include <iostream>
#include <mutex>

#include <CLI11.hpp>

#include "spv/app/commands.hpp"
#include "spv/grad/tensor.hpp"

namespace {

using namespace spv;
using namespace spv::app;

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

struct Options {
    std::string config, out, views, preset;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

ExperimentConfig resolve(const Options& o) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw ConfigError("cannot read config " + o.config);
        try {
            j = nlohmann::ordered_json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config " + o.config + " is not valid JSON: " + e.what());
        }
    }
    if (!o.preset.empty()) j["preset"] = o.preset;
    if (o.seed) j["seed"] = *o.seed;
    if (!o.out.empty()) j["out_dir"] = o.out;
    if (!o.views.empty()) j["views"] = {o.views};
    return config_from_json(j);
}

void print_eval(const std::vector<EvalRow>& rows) {
    std::printf("%-16s %-7s %8s %8s %8s %8s %8s\n", "method", "views", "MRVA", "std", "r", "MCIA", "ACC");
    for (const auto& r : rows)
        std::printf("%-16s %-7s %8.2f %8.2f %8s %8s %8.1f\n", r.method.c_str(), r.views.c_str(), r.mrva.mean, r.mrva.std,
                    r.pearson ? std::to_string(*r.pearson).substr(0, 6).c_str() : "-",
                    r.mcia ? std::to_string(*r.mcia).substr(0, 6).c_str() : "-", r.acc);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Organ volume estimation from 2D segmentations: data generation, training and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "JSON experiment configuration");
    app.add_option("--seed", o.seed, "root seed");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--views", o.views, "single or dual")->check(CLI::IsMember({"single", "dual"}));
    app.add_option("--preset", o.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    app.add_flag("-q,--quiet", o.quiet, "suppress progress output");

    std::mutex out_mutex;
    Progress progress = [&](const std::string& line) {
        if (o.quiet) return;
        std::lock_guard lock(out_mutex);
        std::cerr << line << "\n";
    };

    std::function<void(const ExperimentConfig&)> action;
    auto add = [&](const char* name, const char* help, std::function<void(const ExperimentConfig&)> fn) {
        app.add_subcommand(name, help)->callback([&action, fn] { action = fn; });
    };
    add("schema", "print the configuration schema and desk defaults", [](const ExperimentConfig&) { std::cout << config_schema(); });
    add("gen-data", "generate phantoms, slices and the manifest", [&](const ExperimentConfig& c) {
        const auto r = cmd_gen_data(c, progress);
        std::printf("%zu records, manifest digest %s\n", r.records, r.manifest_digest.c_str());
        for (int f = 0; f < phantom::kFoldCount; ++f) std::printf("fold %d: %zu records, %zu splenomegaly\n", f, r.fold_sizes[f], r.fold_positives[f]);
    });
    add("render-us", "render pseudo-ultrasound images and layouts", [&](const ExperimentConfig& c) {
        const auto r = cmd_render_us(c, progress);
        std::printf("%zu images, digest %s\n", r.images, r.digest.c_str());
    });
    add("train-seg", "train the segmentation U-Net", [&](const ExperimentConfig& c) {
        const auto r = cmd_train_seg(c, progress);
        std::printf("U-Net: %zu train / %zu val, best epoch %zu, val Dice %.4f, hold-out Dice %.4f\n", r.train, r.val, r.best_epoch,
                    r.best_val_dice, r.test_dice);
    });
    add("train-vae", "train the cross-validation VAE models", [&](const ExperimentConfig& c) {
        for (auto v : c.views)
            for (const auto& r : cmd_train_vae(c, v, progress))
                std::printf("%s fold%d %-8s train %zu val %zu best epoch %zu val MRVA %s\n", vae::to_string(v), r.fold, r.kind.c_str(), r.train,
                            r.val, r.best_epoch, r.best_val_mrva ? std::to_string(*r.best_val_mrva).c_str() : "-");
    });
    add("eval", "compare estimators on the hold-out fold", [&](const ExperimentConfig& c) { print_eval(cmd_eval(c, progress)); });
    add("robustness", "MRVA under in-plane rotation of the coronal input", [&](const ExperimentConfig& c) {
        for (auto v : c.views) {
            std::printf("%s view\n", vae::to_string(v));
            for (const auto& r : cmd_robustness(c, v, progress)) std::printf("%+6.1f deg  MRVA %.2f +/- %.2f\n", r.angle_deg, r.mrva.mean, r.mrva.std);
        }
    });
    add("pipeline", "ultrasound image to segmentation to volume", [&](const ExperimentConfig& c) {
        const auto r = cmd_pipeline(c, progress);
        std::printf("%zu records, mean Dice %.4f, MRVA ground-truth masks %.2f, predicted masks %.2f\n", r.rows.size(), r.mean_dice,
                    r.gt_mrva.mean, r.pred_mrva.mean);
    });
    add("latent-map", "PCA latent maps and principal-axis decodes", [&](const ExperimentConfig& c) {
        for (auto v : c.views)
            for (const auto& r : cmd_latent_map(c, v, progress))
                std::printf("%s %s: PC1-volume r %.4f, explained %.3f, %zu inversions\n", vae::to_string(v), r.model.c_str(), r.pc1_r,
                            r.explained_ratio, r.inversions);
    });
    add("report", "summarise reports and artefact digests", [&](const ExperimentConfig& c) {
        const auto r = cmd_report(c);
        std::printf("%zu artefacts, combined digest %s\n", r.digests.size(), r.combined_digest.c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    try {
        action(resolve(o));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const grad::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kOk;
}
