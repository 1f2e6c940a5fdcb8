#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spv/vae/vae.hpp"

namespace spv::estimators {

struct ConfidenceInterval {
    double low = 0.0;
    double high = 0.0;
    double eta = 0.0;    // mean of the sampled estimates
    double theta = 0.0;  // population standard deviation of the sampled estimates
};

struct VolumeEstimate {
    double vol_ml = 0.0;   // reported value
    double raw_ml = 0.0;   // before any reporting floor
    std::optional<ConfidenceInterval> ci;
    std::string method;
    bool flagged = false;  // e.g. a negative clinical-formula output
};

struct LatentEntry {
    std::vector<double> mu;
    double volume_ml = 0.0;
    std::string id;
};

using TrainingLatentIndex = std::vector<LatentEntry>;

/// Volume of the Euclidean-nearest training latent; ties go to the lowest id.
VolumeEstimate nn_estimate(const std::vector<double>& query, const TrainingLatentIndex& index);

struct PlrModel {
    std::vector<double> weights;
    double intercept = 0.0;
    bool ridge = false;           // fewer samples than D + 1
    bool intercept_only = false;  // every latent identical
};

inline constexpr double kPlrRidge = 1e-8;

/// Least-squares linear map from latent means to volume.
PlrModel plr_fit(const TrainingLatentIndex& index);
VolumeEstimate plr_estimate(const std::vector<double>& query, const PlrModel& model);

/// Head output (scaled volume) to mL, floored at zero for reporting.
VolumeEstimate rvae_from_output(double head_output, double volume_scale);

/// Interval from sampled volume estimates (mL): eta +/- 1.96 theta.
VolumeEstimate ci_from_samples(const std::vector<double>& estimates_ml);

/// Head applied to mu of each input.
std::vector<VolumeEstimate> rvae_estimate(vae::VAE& model, const std::vector<grad::Tensor>& inputs);

/// n latent draws per input through the head; requires n >= 2.
std::vector<VolumeEstimate> rvae_ci(vae::VAE& model, const std::vector<grad::Tensor>& inputs, std::size_t n,
                                    std::uint64_t seed);

/// (L - 5.8006) / 0.0126 with L in cm; negative outputs pass through flagged.
VolumeEstimate clinical_length(double length_cm);
/// 30 + 0.58 W L Th with all lengths in cm.
VolumeEstimate clinical_three_measure(double length_cm, double width_cm, double thickness_cm);

}  // namespace spv::estimators
