#include "txpert/optim.hpp"

#include <cmath>

namespace txpert {

void Optimizer::step(std::span<Parameter* const> params) {
    for (const Parameter* p : params) {
        if (!p->grad.allFinite()) {
            throw std::runtime_error("optimizer: non-finite gradient in parameter '" + p->name + "'");
        }
    }
    ++t_;
    const double lr = config_.learning_rate;
    if (config_.kind == OptimizerKind::Sgd) {
        for (Parameter* p : params) {
            p->value -= lr * p->grad;
            p->zero_grad();
        }
        return;
    }
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (Parameter* p : params) {
        auto [it, inserted] = moments_.try_emplace(p);
        Moments& mo = it->second;
        if (inserted) {
            mo.m.setZero(p->value.rows(), p->value.cols());
            mo.v.setZero(p->value.rows(), p->value.cols());
        }
        mo.m = b1 * mo.m + (1.0 - b1) * p->grad;
        mo.v = b2 * mo.v + (1.0 - b2) * p->grad.cwiseAbs2();
        p->value.array() -=
            lr * (mo.m.array() / c1) / ((mo.v.array() / c2).sqrt() + config_.epsilon);
        p->zero_grad();
    }
}

namespace {

double evaluate(const LossFn& loss_fn) {
    GradTape tape;
    const double v = loss_fn(tape).value()(0, 0);
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
    return v;
}

}  // namespace

GradCheckResult grad_check(const LossFn& loss_fn, std::span<Parameter* const> params,
                           double step) {
    for (Parameter* p : params) p->zero_grad();
    {
        GradTape tape;
        Var loss = loss_fn(tape);
        if (!std::isfinite(loss.value()(0, 0))) throw std::runtime_error("grad_check: non-finite loss");
        tape.backward(loss);
    }
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) {
        analytic.push_back(p->grad);
        p->zero_grad();
    }
    return grad_check_against(loss_fn, params, analytic, step);
}

GradCheckResult grad_check_against(const LossFn& loss_fn, std::span<Parameter* const> params,
                                   std::span<const Matrix> analytic, double step) {
    GradCheckResult result;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        for (Index i = 0; i < p.value.size(); ++i) {
            double& x = p.value.data()[i];
            const double saved = x;
            x = saved + step;
            const double up = evaluate(loss_fn);
            x = saved - step;
            const double down = evaluate(loss_fn);
            x = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[k].data()[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            ++result.entries_checked;
            if (rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_parameter = p.name;
                result.worst_entry = i;
            }
        }
    }
    return result;
}

}  // namespace txpert
