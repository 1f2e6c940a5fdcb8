#include "spv/estimators/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace spv::estimators {

namespace {

void check_dims(const TrainingLatentIndex& index) {
    for (const auto& e : index)
        if (e.mu.size() != index[0].mu.size()) throw std::invalid_argument("latent index: inconsistent dimensions");
}

}  // namespace

VolumeEstimate nn_estimate(const std::vector<double>& query, const TrainingLatentIndex& index) {
    if (index.empty()) throw std::invalid_argument("nn_estimate: empty index");
    const LatentEntry* best = nullptr;
    double best_d = 0.0;
    for (const auto& e : index) {
        if (e.mu.size() != query.size()) throw std::invalid_argument("nn_estimate: dimension mismatch");
        double d = 0.0;
        for (std::size_t j = 0; j < query.size(); ++j) d += (e.mu[j] - query[j]) * (e.mu[j] - query[j]);
        if (!best || d < best_d || (d == best_d && e.id < best->id)) best = &e, best_d = d;
    }
    return {best->volume_ml, best->volume_ml, std::nullopt, "nn", false};
}

PlrModel plr_fit(const TrainingLatentIndex& index) {
    if (index.size() < 2) throw std::invalid_argument("plr_fit: need at least two samples");
    check_dims(index);
    const auto n = static_cast<Eigen::Index>(index.size());
    const auto d = static_cast<Eigen::Index>(index[0].mu.size());
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = index[static_cast<std::size_t>(i)].mu[static_cast<std::size_t>(j)];
        y(i) = index[static_cast<std::size_t>(i)].volume_ml;
    }
    // Centring absorbs the intercept so the ridge term never shrinks it.
    const Eigen::RowVectorXd xm = x.colwise().mean();
    const double ym = y.mean();
    x.rowwise() -= xm;
    y.array() -= ym;

    PlrModel m;
    m.weights.assign(static_cast<std::size_t>(d), 0.0);
    if (x.cwiseAbs().maxCoeff() == 0.0) {
        m.intercept_only = true;
        m.intercept = ym;
        return m;
    }
    Eigen::VectorXd w;
    if (n < d + 1) {
        m.ridge = true;
        // (X^T X + lambda I)^-1 X^T y == X^T (X X^T + lambda I)^-1 y, the cheaper side when n < d.
        const Eigen::MatrixXd gram = x * x.transpose() + kPlrRidge * Eigen::MatrixXd::Identity(n, n);
        w = x.transpose() * gram.ldlt().solve(y);
    } else {
        w = x.colPivHouseholderQr().solve(y);
    }
    for (Eigen::Index j = 0; j < d; ++j) m.weights[static_cast<std::size_t>(j)] = w(j);
    m.intercept = ym - xm.dot(w);
    return m;
}

VolumeEstimate plr_estimate(const std::vector<double>& query, const PlrModel& model) {
    if (query.size() != model.weights.size()) throw std::invalid_argument("plr_estimate: dimension mismatch");
    double v = model.intercept;
    for (std::size_t j = 0; j < query.size(); ++j) v += model.weights[j] * query[j];
    return {v, v, std::nullopt, "plr", false};
}

VolumeEstimate rvae_from_output(double head_output, double volume_scale) {
    const double raw = head_output * volume_scale;
    return {std::max(0.0, raw), raw, std::nullopt, "rvae", raw < 0.0};
}

VolumeEstimate ci_from_samples(const std::vector<double>& est) {
    if (est.size() < 2) throw std::invalid_argument("rvae_ci: need at least two samples");
    double eta = 0.0;
    for (double v : est) eta += v;
    eta /= static_cast<double>(est.size());
    if (std::all_of(est.begin(), est.end(), [&](double v) { return v == est[0]; })) eta = est[0];  // exact zero spread
    double var = 0.0;
    for (double v : est) var += (v - eta) * (v - eta);
    const double theta = std::sqrt(var / static_cast<double>(est.size()));
    VolumeEstimate out{std::max(0.0, eta), eta, ConfidenceInterval{eta - 1.96 * theta, eta + 1.96 * theta, eta, theta},
                       "rvae_ci", eta < 0.0};
    return out;
}

std::vector<VolumeEstimate> rvae_estimate(vae::VAE& model, const std::vector<grad::Tensor>& inputs) {
    const auto codes = vae::encode_all(model, inputs);
    std::vector<std::vector<double>> mus;
    for (const auto& c : codes) mus.push_back(c.mu);
    std::vector<VolumeEstimate> out;
    for (double h : vae::head_outputs(model, mus)) out.push_back(rvae_from_output(h, model.config().volume_scale));
    return out;
}

std::vector<VolumeEstimate> rvae_ci(vae::VAE& model, const std::vector<grad::Tensor>& inputs, std::size_t n,
                                    std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("rvae_ci: need at least two samples");
    const auto codes = vae::encode_all(model, inputs);
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<VolumeEstimate> out;
    for (const auto& code : codes) {
        std::vector<std::vector<double>> zs(n);
        std::vector<double> zeta(code.mu.size());
        for (auto& z : zs) {
            for (double& v : zeta) v = g(rng);
            z = vae::reparameterize(code, zeta);
        }
        auto h = vae::head_outputs(model, zs);
        for (double& v : h) v *= model.config().volume_scale;
        out.push_back(ci_from_samples(h));
    }
    return out;
}

VolumeEstimate clinical_length(double length_cm) {
    const double v = (length_cm - 5.8006) / 0.0126;
    return {v, v, std::nullopt, "clinical_length", v < 0.0};
}

VolumeEstimate clinical_three_measure(double l, double w, double th) {
    const double v = 30.0 + 0.58 * (w * l * th);
    return {v, v, std::nullopt, "clinical_lwt", false};
}

}  // namespace spv::estimators
