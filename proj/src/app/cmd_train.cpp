#include <mutex>

#include "internal.hpp"
#include "spv/common/parallel.hpp"
#include "spv/common/rng.hpp"

namespace spv::app {

using namespace detail;

namespace {

nlohmann::ordered_json run_metadata(int fold, const ExperimentConfig& cfg, const vae::TrainResult& res) {
    nlohmann::ordered_json m;
    m["fold"] = fold;
    m["stage1_epochs"] = cfg.train.schedule.stage1_epochs;
    m["total_epochs"] = cfg.train.schedule.total_epochs;
    m["best_epoch"] = res.best_epoch;
    if (res.best_val_mrva) m["best_val_mrva"] = *res.best_val_mrva;
    if (!res.log.empty()) {
        const auto& last = res.log.back();
        m["final_bce"] = last.bce;
        m["final_kld"] = last.kld;
        if (last.mse) m["final_mse"] = *last.mse;
    }
    return m;
}

}  // namespace

std::vector<FoldRun> cmd_train_vae(const ExperimentConfig& cfg, vae::ViewMode views, const Progress& progress) {
    const auto ws = load_workspace(cfg, true);
    const std::uint64_t aug_root = derive_seed(cfg.seed, "augment");

    std::vector<std::size_t> dev;
    for (std::size_t i = 0; i < ws.records.size(); ++i)
        if (ws.records[i].fold != 0) dev.push_back(i);
    if (progress) progress("building augmentation bank for " + std::to_string(dev.size()) + " records");
    std::vector<std::vector<grad::Tensor>> bank(ws.records.size());
    parallel_for(dev.size(), [&](std::size_t k) {
        const std::size_t i = dev[k];
        bank[i] = augmentation_bank(ws.grids[i], views, cfg.slice_size, cfg.augment, derive_seed(aug_root, ws.records[i].id));
    });

    const auto& folds = cfg.train.validation_folds;
    std::vector<std::vector<FoldRun>> runs(folds.size());
    std::mutex log_mutex;
    parallel_for(folds.size(), [&](std::size_t f) {
        const int fold = folds[f];
        const auto split = cv_split(ws, fold);
        std::vector<vae::VAESample> train, val;
        for (auto i : split.train) train.push_back({ws.records[i].id, ws.records[i].volume_ml, bank[i]});
        for (auto i : split.val) val.push_back({ws.records[i].id, ws.records[i].volume_ml, {bank[i][0]}});

        const std::string tag = std::string(vae::to_string(views)) + " fold" + std::to_string(fold);
        auto reporter = [&](const std::string& kind) {
            return [&, kind](const vae::EpochLog& e) {
                if (!progress) return;
                std::string line = tag + " " + kind + " epoch " + std::to_string(e.epoch) + " bce " + fmt(e.bce) + " kld " + fmt(e.kld);
                if (e.mse) line += " mse " + fmt(*e.mse);
                if (e.val_mrva) line += " val_mrva " + fmt(*e.val_mrva);
                std::lock_guard lock(log_mutex);
                progress(line);
            };
        };

        const std::uint64_t init = model_seed(cfg, "vae.init", views, fold);
        vae::VAE model(model_config(cfg, views, vae::HeadInput::Mu), init);
        const auto res = vae::train_vae(model, train, val, cfg.train.schedule, model_seed(cfg, "vae.train", views, fold), reporter("rvae"));
        save_vae(ws.paths.model(views, fold, "rvae"), "rvae", model, cfg, run_metadata(fold, cfg, res));
        write_text(ws.paths.model_log(views, fold, "rvae"), vae::log_csv(res.log));

        vae::VAE plain(model_config(cfg, views, vae::HeadInput::Mu), init);
        plain.store().import_tensors(res.stage1);
        auto plain_meta = run_metadata(fold, cfg, res);
        plain_meta["total_epochs"] = cfg.train.schedule.stage1_epochs;
        plain_meta.erase("best_epoch");
        plain_meta.erase("best_val_mrva");
        plain_meta.erase("final_mse");
        save_vae(ws.paths.model(views, fold, "vae"), "vae", plain, cfg, plain_meta);

        runs[f].push_back(FoldRun{fold, "rvae", train.size(), val.size(), res.best_epoch, res.best_val_mrva});
        if (cfg.train.ci_variant) {
            vae::VAE ci(model_config(cfg, views, vae::HeadInput::Z), init);
            ci.store().import_tensors(res.stage1);
            const auto ci_res = vae::train_stage2(ci, train, val, cfg.train.schedule, model_seed(cfg, "vae.train_ci", views, fold),
                                                  reporter("rvae_ci"));
            save_vae(ws.paths.model(views, fold, "rvae_ci"), "rvae_ci", ci, cfg, run_metadata(fold, cfg, ci_res));
            write_text(ws.paths.model_log(views, fold, "rvae_ci"), vae::log_csv(ci_res.log));
            runs[f].push_back(FoldRun{fold, "rvae_ci", train.size(), val.size(), ci_res.best_epoch, ci_res.best_val_mrva});
        }
    });
    std::vector<FoldRun> out;
    for (auto& r : runs) out.insert(out.end(), r.begin(), r.end());
    return out;
}

}  // namespace spv::app
