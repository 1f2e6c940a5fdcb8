#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spv/phantom/phantom.hpp"

namespace spv::phantom {

/// Volumes strictly above this are splenomegaly.
inline constexpr double kSplenomegalyThresholdMl = 314.5;
inline constexpr int kFoldCount = 5;

inline bool is_splenomegaly(double volume_ml) { return volume_ml > kSplenomegalyThresholdMl; }

struct DatasetConfig {
    std::size_t n = 150;
    double min_volume_ml = 60.0;
    double max_volume_ml = 600.0;
    double splenomegaly_fraction = 35.0 / 150.0;
    std::uint64_t seed = 20240521;
    GridGeometry geometry;
    double max_deform_amplitude = 0.12;
    int harmonic_order = 3;
    double max_pose_deg = 10.0;
    // Shape ratios: b/a and c/b drawn uniformly from these ranges.
    double min_width_ratio = 0.65, max_width_ratio = 0.85;
    double min_depth_ratio = 0.62, max_depth_ratio = 0.78;
};

struct PhantomRecord {
    std::string id;
    std::string grid_file;
    double volume_ml = 0.0;
    bool splenomegaly = false;
    int fold = 0;
    std::uint64_t seed = 0;
    PhantomSpec spec;
};

struct Dataset {
    std::vector<PhantomRecord> records;
    std::vector<VoxelGrid> grids;  // parallel to records, centroid-centred
};

/// Stratified 5-fold assignment: positives and negatives are shuffled
/// separately and dealt round-robin, negatives continuing where positives
/// stopped. Returns one fold index per label.
std::vector<int> stratified_folds(const std::vector<bool>& labels, std::uint64_t seed);

/// Generates n phantoms, exactly round(n * fraction) of them splenomegalic,
/// with ground-truth volumes measured on the voxel grid.
Dataset make_dataset(const DatasetConfig& config);

/// One JSON object per line: {id, grid_file, volume_ml, splenomegaly, fold, seed}.
std::string manifest_jsonl(const std::vector<PhantomRecord>& records);
void write_manifest(const std::filesystem::path& path, const std::vector<PhantomRecord>& records);
std::vector<PhantomRecord> read_manifest(const std::filesystem::path& path);

}  // namespace spv::phantom
