#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spv/app/data.hpp"
#include "spv/phantom/dataset.hpp"
#include "spv/segnet/unet.hpp"
#include "spv/ussim/ussim.hpp"
#include "spv/vae/train.hpp"
#include "spv/vae/vae.hpp"

namespace spv::app {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct VaeTrainConfig {
    vae::TrainSchedule schedule;
    bool ci_variant = true;                 // also train the z-head model per fold
    std::vector<int> validation_folds{1, 2, 3, 4};
};

struct UNetTrainConfig {
    segnet::UNetConfig model;
    segnet::SegSchedule schedule;
    std::size_t max_train_records = 30;     // 0 uses every training record
};

struct ExperimentConfig {
    std::string preset = "desk";
    std::uint64_t seed = 7;
    std::filesystem::path out_dir = "spv_run";
    std::vector<vae::ViewMode> views{vae::ViewMode::Single, vae::ViewMode::Dual};
    double threshold_ml = phantom::kSplenomegalyThresholdMl;

    phantom::DatasetConfig data;
    std::size_t slice_size = 64;
    AugmentConfig augment;
    vae::VAEConfig vae;                     // views and head_input are set per model
    VaeTrainConfig train;

    ussim::ConeParams cone;
    ussim::RenderParams render;
    UNetTrainConfig unet;

    std::vector<double> robustness_angles{-15, -10, -5, 0, 5, 10, 15};
    std::size_t latent_samples = 5;
    int latent_fold = 1;                    // which cross-validation model to visualise
};

/// Named presets: "desk" (defaults sized for a workstation) and "paper"
/// (the published hyperparameters).
ExperimentConfig preset_config(const std::string& name);

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

/// Overlays `j` on the preset named by j["preset"] (default "desk").
/// Unknown keys and invalid values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

void validate(const ExperimentConfig& cfg);

/// Human-readable description of every key.
std::string config_schema();

vae::ViewMode parse_views(const std::string& s);

}  // namespace spv::app
