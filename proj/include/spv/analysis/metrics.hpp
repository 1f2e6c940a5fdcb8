#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spv/phantom/mask2d.hpp"

namespace spv::analysis {

using phantom::Mask2D;

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

/// Mean relative volume accuracy in percent, unclamped.
MeanStd mrva(const std::vector<double>& truths, const std::vector<double>& estimates);

/// Per-sample (1 - |e - t| / t) * 100.
std::vector<double> relative_accuracy(const std::vector<double>& truths, const std::vector<double>& estimates);

double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

/// Percentage of truths inside their interval, endpoints inclusive.
double mcia(const std::vector<double>& truths, const std::vector<Interval>& cis);

struct Classification {
    std::optional<double> sen;  // absent when there are no positives
    std::optional<double> spe;  // absent when there are no negatives
    double acc = 0.0;
};

Classification sen_spe_acc(const std::vector<double>& truths, const std::vector<double>& estimates,
                           double threshold_ml = 314.5);

/// 2|a & b| / (|a| + |b|); 1 when both are empty.
double dice(const Mask2D& a, const Mask2D& b);

/// Occupied pixels with at least one unoccupied (or out-of-frame) 4-neighbour.
std::vector<std::pair<int, int>> boundary_pixels(const Mask2D& mask);

/// Symmetric Hausdorff distance between the boundary sets, in mm.
double hausdorff(const Mask2D& a, const Mask2D& b, double spacing_mm);

struct MetricReport {
    MeanStd mrva;
    std::optional<double> pearson;  // absent when either side has zero variance
    std::optional<double> mcia;
    Classification cls;
};

MetricReport make_report(const std::vector<double>& truths, const std::vector<double>& estimates,
                         const std::vector<Interval>* cis = nullptr);

}  // namespace spv::analysis
