#pragma once

#include <memory>
#include <string>
#include <vector>

#include "spv/app/commands.hpp"
#include "spv/grad/checkpoint.hpp"
#include "spv/ussim/ussim.hpp"

namespace spv::app::detail {

struct Workspace {
    Paths paths;
    std::vector<phantom::PhantomRecord> records;
    std::vector<phantom::VoxelGrid> grids;  // empty unless requested
};

Workspace load_workspace(const ExperimentConfig& cfg, bool with_grids);

/// Record indices of one fold.
std::vector<std::size_t> fold_indices(const Workspace& ws, int fold);

struct Split {
    std::vector<std::size_t> train, val, test;
};

/// Test = fold 0, val = `val_fold`, train = everything else. Throws
/// std::logic_error if any id is shared between test and development data.
Split cv_split(const Workspace& ws, int val_fold);

vae::VAEConfig model_config(const ExperimentConfig& cfg, vae::ViewMode views, vae::HeadInput head);

/// Digest of the configuration with out_dir removed, so identical runs in
/// different directories produce identical artefacts.
std::string config_digest(const ExperimentConfig& cfg);

std::uint64_t model_seed(const ExperimentConfig& cfg, const std::string& purpose, vae::ViewMode views, int fold);

void save_vae(const fs::path& path, const std::string& kind, vae::VAE& model, const ExperimentConfig& cfg,
              nlohmann::ordered_json metadata);
/// Loads a checkpoint written by save_vae, checking kind, view mode and
/// architecture. Missing files and mismatches raise DataError.
std::unique_ptr<vae::VAE> load_vae(const fs::path& path, const std::string& kind, const ExperimentConfig& cfg,
                                   vae::ViewMode views);

struct FoldModel {
    int fold = 0;
    std::unique_ptr<vae::VAE> rvae, plain, ci;
};

std::vector<FoldModel> load_fold_models(const ExperimentConfig& cfg, vae::ViewMode views, bool with_plain, bool with_ci);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

std::string fmt(double v);
std::string fmt(const std::optional<double>& v);

grad::Tensor gray_to_tensor(const ussim::Gray8& g);
phantom::Mask2D gray_to_mask(const ussim::Gray8& g, std::uint8_t value, double spacing_mm);

/// Runs `fn`, converting file-format and I/O failures into DataError.
template <typename F>
auto guard_io(const std::string& what, F&& fn) {
    try {
        return fn();
    } catch (const DataError&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const grad::NumericalError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError(what + ": " + e.what());
    }
}

}  // namespace spv::app::detail
