#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kgap/autodiff.hpp"

namespace kgap::ad {

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam. Moments are kept per parameter in the order of the
// parameter set it was built for.
template <typename T>
class Adam {
public:
    Adam(const ParameterSet<T>& params, AdamConfig config) : config_(config) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            first_.emplace_back(params[i].value.rows(), params[i].value.cols());
            second_.emplace_back(params[i].value.rows(), params[i].value.cols());
        }
    }

    void step(ParameterSet<T>& params) {
        if (params.size() != first_.size()) throw ContractViolation("Adam state does not match parameter set");
        for (std::size_t i = 0; i < params.size(); ++i)
            if (!params[i].has_grad()) throw ContractViolation("parameter '" + params[i].name + "' has no gradient");

        ++steps_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            auto& m = first_[i];
            auto& v = second_[i];
            if (!m.same_shape(p.value)) throw ContractViolation("Adam moment shape mismatch for '" + p.name + "'");
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                double g = p.grad[k];
                double mk = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
                double vk = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
                m[k] = static_cast<T>(mk);
                v[k] = static_cast<T>(vk);
                double update = config_.lr * (mk / c1) / (std::sqrt(vk / c2) + config_.eps);
                p.value[k] = static_cast<T>(p.value[k] - update);
            }
        }
    }

    double lr() const { return config_.lr; }
    void set_lr(double lr) { config_.lr = lr; }
    std::uint64_t steps() const { return steps_; }
    const Tensor<T>& first_moment(std::size_t i) const { return first_.at(i); }
    const Tensor<T>& second_moment(std::size_t i) const { return second_.at(i); }

private:
    AdamConfig config_;
    std::uint64_t steps_ = 0;
    std::vector<Tensor<T>> first_;
    std::vector<Tensor<T>> second_;
};

struct GradCheckOptions {
    double eps = 1e-5;
    // Relative error is |a - n| / max(|a|, |n|, floor) so near-zero
    // gradients are judged on absolute error.
    double floor = 1e-4;
    // Test hook: runs on the analytic gradients before comparison.
    std::function<void(ParameterSet<double>&)> corrupt_analytic;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
};

using LossFn = std::function<Var<double>(Tape<double>&, ParameterSet<double>&)>;

// Compares backward() against central differences (f(θ+ε) - f(θ-ε)) / 2ε for
// every element of every parameter. `loss` must be deterministic.
GradCheckReport grad_check(const LossFn& loss, ParameterSet<double>& params, const GradCheckOptions& options = {});

}  // namespace kgap::ad
