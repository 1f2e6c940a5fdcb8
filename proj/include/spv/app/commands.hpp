#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spv/analysis/metrics.hpp"
#include "spv/app/config.hpp"

namespace spv::app {

namespace fs = std::filesystem;

/// Progress lines from long-running commands; may be called from worker threads.
using Progress = std::function<void(const std::string&)>;

/// File layout under the output directory.
struct Paths {
    fs::path root;

    fs::path data_dir() const { return root / "data"; }
    fs::path manifest() const { return data_dir() / "manifest.jsonl"; }
    fs::path grid(const std::string& id) const { return data_dir() / "grids" / (id + ".spvg"); }
    fs::path slice(const std::string& id, phantom::SliceAxis axis) const;
    fs::path us_image(const std::string& id) const { return root / "us" / (id + "_image.pgm"); }
    fs::path us_layout(const std::string& id) const { return root / "us" / (id + "_layout.pgm"); }
    fs::path unet() const { return root / "models" / "unet.spvw"; }
    fs::path unet_log() const { return root / "models" / "unet_log.csv"; }
    // kind: "vae" (stage-1 snapshot), "rvae", "rvae_ci"
    fs::path model(vae::ViewMode views, int fold, const std::string& kind) const;
    fs::path model_log(vae::ViewMode views, int fold, const std::string& kind) const;
    fs::path reports() const { return root / "reports"; }
};

struct GenDataResult {
    std::size_t records = 0;
    std::array<std::size_t, phantom::kFoldCount> fold_sizes{};
    std::array<std::size_t, phantom::kFoldCount> fold_positives{};
    std::string manifest_digest;
};

struct RenderResult {
    std::size_t images = 0;
    std::string digest;
};

struct SegRunResult {
    std::size_t train = 0, val = 0, test = 0;
    std::size_t best_epoch = 0;
    double best_val_dice = 0.0;
    double test_dice = 0.0;
};

struct FoldRun {
    int fold = 0;
    std::string kind;
    std::size_t train = 0, val = 0;
    std::size_t best_epoch = 0;
    std::optional<double> best_val_mrva;
};

/// Metrics of one method, averaged over the cross-validation models.
struct EvalRow {
    std::string method;
    std::string views;  // "single", "dual", or "none" for formula baselines
    std::size_t n = 0;
    std::size_t models = 0;
    analysis::MeanStd mrva;
    std::optional<double> pearson, mcia, sen, spe;
    double acc = 0.0;
};

struct RobustnessRow {
    double angle_deg = 0.0;
    analysis::MeanStd mrva;
};

struct PipelineRow {
    std::string id;
    double volume_ml = 0.0;
    double dice = 0.0;
    std::optional<double> hausdorff_mm;
    double gt_estimate_ml = 0.0;    // mean over models
    double pred_estimate_ml = 0.0;
};

struct PipelineResult {
    std::vector<PipelineRow> rows;
    double mean_dice = 0.0;
    analysis::MeanStd gt_mrva, pred_mrva;  // averaged over models
};

struct LatentMapResult {
    std::string model;  // "rvae" or "vae"
    std::size_t points = 0;
    double pc1_r = 0.0;
    double explained_ratio = 0.0;
    std::vector<std::size_t> decode_areas;  // foreground pixels per decoded sample
    std::size_t inversions = 0;             // adjacent decreases along PC1
};

struct ReportResult {
    std::vector<std::pair<std::string, std::string>> digests;  // relative path, digest
    std::string combined_digest;
};

GenDataResult cmd_gen_data(const ExperimentConfig& cfg, const Progress& progress = {});
RenderResult cmd_render_us(const ExperimentConfig& cfg, const Progress& progress = {});
SegRunResult cmd_train_seg(const ExperimentConfig& cfg, const Progress& progress = {});
/// Fold 0 is held out; one model per validation fold, trained on the rest.
std::vector<FoldRun> cmd_train_vae(const ExperimentConfig& cfg, vae::ViewMode views, const Progress& progress = {});
std::vector<EvalRow> cmd_eval(const ExperimentConfig& cfg, const Progress& progress = {});
std::vector<RobustnessRow> cmd_robustness(const ExperimentConfig& cfg, vae::ViewMode views,
                                          const Progress& progress = {});
PipelineResult cmd_pipeline(const ExperimentConfig& cfg, const Progress& progress = {});
std::vector<LatentMapResult> cmd_latent_map(const ExperimentConfig& cfg, vae::ViewMode views,
                                            const Progress& progress = {});
ReportResult cmd_report(const ExperimentConfig& cfg);

/// Predicted organ mask in the ultrasound frame back to the model-input
/// frame: largest 4-connected component, quarter turn clockwise, centred by
/// centroid in a size x size frame (pixels that still fall outside are dropped).
phantom::Mask2D us_mask_to_model_frame(const phantom::Mask2D& us_mask, std::size_t size);

}  // namespace spv::app
