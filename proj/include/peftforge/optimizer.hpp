#pragma once

#include <map>
#include <string>

#include "peftforge/tensor.hpp"

namespace peftforge {

/// Adam with bias correction, constant learning rate, no weight decay.
/// Updates exactly the named tensors it is handed; tensors without an
/// accumulated gradient are left untouched.
template <typename S>
class AdamOptimizer {
  public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::map<std::string, Tensor<S>>& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (auto& [name, p] : params) {
            if (!p.has_grad()) continue;
            Slot& slot = slots_[name];
            if (slot.m.size() == 0) {
                slot.m = ColArray<S>::Zero(p.numel());
                slot.v = ColArray<S>::Zero(p.numel());
            }
            const auto& grad = p.grad();
            slot.m = S(beta1_) * slot.m + S(1.0 - beta1_) * grad;
            slot.v = S(beta2_) * slot.v + S(1.0 - beta2_) * grad * grad;
            p.value() -= S(lr_) * (slot.m / S(bc1)) /
                         ((slot.v / S(bc2)).sqrt() + S(eps_));
        }
    }

    long step_count() const { return t_; }

  private:
    struct Slot {
        ColArray<S> m, v;
    };
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<std::string, Slot> slots_;
};

}  // namespace peftforge
