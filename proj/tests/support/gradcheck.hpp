#pragma once

// Central finite-difference oracle for gradient checks. Independent of the
// backward implementations: it only calls forward ops under NoGradScope.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "spv/common/rng.hpp"
#include "spv/grad/ops.hpp"

namespace spv::testing {

using grad::Tensor;
using grad::Var;

inline Tensor random_tensor(grad::Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.data()) v = u(rng);
    return t;
}

/// Max over all input elements of |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline double gradcheck(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<Tensor>& inputs,
                        Rng& rng, double h = 1e-5, double floor = 1e-3) {
    // Fixed random projection turns any output into a scalar loss.
    Tensor proj;
    auto loss_of = [&](const std::vector<Var>& vars) {
        Var out = f(vars);
        if (proj.shape() != out.shape()) proj = random_tensor(out.shape(), rng, -1.0, 1.0);
        return grad::sum(grad::mul(out, Var(proj)));
    };

    std::vector<Var> vars;
    for (const auto& t : inputs) vars.emplace_back(t, true);
    grad::backward(loss_of(vars));

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
            auto eval = [&](double delta) {
                grad::NoGradScope ng;
                std::vector<Var> shifted;
                for (std::size_t j = 0; j < inputs.size(); ++j) {
                    Tensor t = inputs[j];
                    if (j == k) t[i] += delta;
                    shifted.emplace_back(std::move(t));
                }
                return loss_of(shifted).value().item();
            };
            const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
            const double analytic = vars[k].grad()[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace spv::testing
