#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "peftforge/ops.hpp"
#include "peftforge/tensor.hpp"

namespace peftforge {

/// Compares reverse-mode gradients against central finite differences.
///
/// `f` must rebuild the scalar loss from scratch on every call so that the
/// ±eps perturbations of the parameters are observed. Returns the maximum of
/// |analytic - difference| / (|analytic| + |difference| + 1e-12) over every
/// parameter entry. The finite-difference loop is the independent oracle: it
/// never touches the tape.
template <typename S>
double grad_check(std::vector<Tensor<S>> params,
                  const std::function<Tensor<S>(Graph<S>&)>& f, double eps) {
    if (eps <= 0) throw ContractError("grad_check: eps must be positive");
    for (auto& p : params) {
        if (!p.trainable()) throw ContractError("grad_check: every checked parameter must be trainable");
        if (!p.value().isFinite().all()) throw NumericError("grad_check: non-finite parameter");
    }

    auto eval = [&]() -> double {
        Graph<S> g(/*recording=*/false);
        Tensor<S> loss = f(g);
        if (loss.numel() != 1) throw ContractError("grad_check: f must return a scalar");
        const double v = static_cast<double>(loss.value()[0]);
        if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
        return v;
    };

    // Analytic pass.
    for (auto& p : params) p.clear_grad();
    Graph<S> g;
    Tensor<S> loss = f(g);
    if (loss.numel() != 1) throw ContractError("grad_check: f must return a scalar");
    if (!std::isfinite(static_cast<double>(loss.value()[0])))
        throw NumericError("grad_check: non-finite function value");
    g.backward(loss);

    double worst = 0.0;
    for (auto& p : params) {
        for (Index i = 0; i < p.numel(); ++i) {
            const double analytic = p.has_grad() ? static_cast<double>(p.grad()[i]) : 0.0;
            const S original = p.value()[i];
            p.value()[i] = original + S(eps);
            const double up = eval();
            p.value()[i] = original - S(eps);
            const double down = eval();
            p.value()[i] = original;
            const double diff = (up - down) / (2.0 * eps);
            const double rel = std::abs(analytic - diff) / (std::abs(analytic) + std::abs(diff) + 1e-12);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace peftforge
