#pragma once

#include "txpert/tape.hpp"

#include <unordered_map>

namespace txpert {

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Applies one update from the gradients held in each Parameter and zeroes
/// them. Adam keeps per-parameter moment estimates keyed by address, so the
/// same Parameter objects must be passed on every step.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

    /// Throws std::runtime_error, leaving every value untouched, if any
    /// gradient is non-finite.
    void step(std::span<Parameter* const> params);

    const OptimizerConfig& config() const { return config_; }
    long steps_taken() const { return t_; }

private:
    struct Moments {
        Matrix m;
        Matrix v;
    };
    OptimizerConfig config_;
    long t_ = 0;
    std::unordered_map<const Parameter*, Moments> moments_;
};

/// Scalar loss evaluated on a fresh tape.
using LossFn = std::function<Var(GradTape&)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    Index worst_entry = 0;
    Index entries_checked = 0;
};

/// Reverse-mode gradient versus central finite differences, entry by entry.
/// Relative error uses max(|a|, |b|, 1e-8) as the denominator. Parameter
/// values are restored on return.
GradCheckResult grad_check(const LossFn& loss_fn, std::span<Parameter* const> params,
                           double step = 1e-5);

/// As above, with the analytic gradient supplied by the caller.
GradCheckResult grad_check_against(const LossFn& loss_fn, std::span<Parameter* const> params,
                                   std::span<const Matrix> analytic, double step = 1e-5);

}  // namespace txpert
