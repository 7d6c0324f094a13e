#include "txpert/tape.hpp"

#include <algorithm>
#include <unordered_map>

namespace txpert {

Parameter::Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    require_finite(value, "Parameter " + name);
    zero_grad();
}

Parameter& ParameterStore::add(std::string name, Matrix value) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
    return *params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
    for (auto& p : params_) {
        if (p->name == name) return *p;
    }
    throw std::out_of_range("unknown parameter: " + name);
}

const Parameter& ParameterStore::get(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->get(name);
}

bool ParameterStore::contains(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(),
                       [&](const auto& p) { return p->name == name; });
}

std::vector<Parameter*> ParameterStore::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
}

Index ParameterStore::scalar_count() const {
    Index n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

const Matrix& Var::value() const { return tape->value(id); }

Var GradTape::constant(Matrix value) {
    require_finite(value, "GradTape::constant");
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false, false});
    return Var{this, nodes_.size() - 1};
}

Var GradTape::parameter(Parameter& p) {
    nodes_.push_back(Node{p.value, {}, {}, &p, true, false});
    return Var{this, nodes_.size() - 1};
}

Matrix& GradTape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad.setZero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return n.grad;
}

Var GradTape::record(Matrix value, std::initializer_list<Var> inputs, Backprop backprop) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backprop));
}

Var GradTape::record(Matrix value, std::span<const Var> inputs, Backprop backprop) {
    bool needs = false;
    for (const Var& v : inputs) {
        if (v.tape != this) throw std::invalid_argument("GradTape: operand from another tape");
        needs = needs || nodes_[v.id].requires_grad;
    }
    if (!value.allFinite()) throw std::runtime_error("GradTape: operation produced non-finite values");
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backprop) : Backprop{}, nullptr,
                          needs, false});
    return Var{this, nodes_.size() - 1};
}

void GradTape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss from another tape");
    if (value(loss.id).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad(loss.id)(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.requires_grad) continue;
        if (n.param != nullptr) {
            n.param->grad += n.grad;
        } else if (n.backprop) {
            n.backprop(*this, i);
        }
    }
}

namespace ad {
namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
    }
}

}  // namespace

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                    ")");
    }
    Matrix out = a.value() * b.value();
    return a.tape->record(std::move(out), {a, b}, [a, b](GradTape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a.id)) t.grad(a.id).noalias() += g * t.value(b.id).transpose();
        if (t.requires_grad(b.id)) t.grad(b.id).noalias() += t.value(a.id).transpose() * g;
    });
}

Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Matrix out = a.value() + b.value();
    return a.tape->record(std::move(out), {a, b}, [a, b](GradTape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a.id)) t.grad(a.id) += g;
        if (t.requires_grad(b.id)) t.grad(b.id) += g;
    });
}

Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Matrix out = a.value() - b.value();
    return a.tape->record(std::move(out), {a, b}, [a, b](GradTape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a.id)) t.grad(a.id) += g;
        if (t.requires_grad(b.id)) t.grad(b.id) -= g;
    });
}

Var scale(Var a, double c) {
    Matrix out = c * a.value();
    return a.tape->record(std::move(out), {a}, [a, c](GradTape& t, std::size_t self) {
        t.grad(a.id) += c * t.grad(self);
    });
}

Var hadamard(Var a, Var b) {
    check_same_shape(a, b, "hadamard");
    Matrix out = a.value().cwiseProduct(b.value());
    return a.tape->record(std::move(out), {a, b}, [a, b](GradTape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a.id)) t.grad(a.id) += g.cwiseProduct(t.value(b.id));
        if (t.requires_grad(b.id)) t.grad(b.id) += g.cwiseProduct(t.value(a.id));
    });
}

Var add_row(Var a, Var bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols()) {
        throw std::invalid_argument("add_row: bias must be 1 x " + std::to_string(a.cols()));
    }
    Matrix out = a.value().rowwise() + bias.value().row(0);
    return a.tape->record(std::move(out), {a, bias}, [a, bias](GradTape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a.id)) t.grad(a.id) += g;
        if (t.requires_grad(bias.id)) t.grad(bias.id) += g.colwise().sum();
    });
}

Var leaky_relu(Var a, double slope) {
    Matrix out = txpert::leaky_relu(a.value(), slope);
    return a.tape->record(std::move(out), {a}, [a, slope](GradTape& t, std::size_t self) {
        const Matrix& x = t.value(a.id);
        const Matrix& g = t.grad(self);
        Matrix& ga = t.grad(a.id);
        for (Index i = 0; i < x.size(); ++i) {
            ga.data()[i] += x.data()[i] >= 0.0 ? g.data()[i] : slope * g.data()[i];
        }
    });
}

Var linear(Var input, Var weight, const Var* bias) {
    Var out = matmul(input, weight);
    return bias != nullptr ? add_row(out, *bias) : out;
}

Var gather_rows(Var a, std::span<const Index> index) {
    const Matrix& av = a.value();
    Matrix out(static_cast<Index>(index.size()), av.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] < 0 || index[i] >= av.rows()) throw std::out_of_range("gather_rows: index");
        out.row(static_cast<Index>(i)) = av.row(index[i]);
    }
    std::vector<Index> idx(index.begin(), index.end());
    return a.tape->record(std::move(out), {a},
                          [a, idx = std::move(idx)](GradTape& t, std::size_t self) {
                              const Matrix& g = t.grad(self);
                              Matrix& ga = t.grad(a.id);
                              for (std::size_t i = 0; i < idx.size(); ++i) {
                                  ga.row(idx[i]) += g.row(static_cast<Index>(i));
                              }
                          });
}

Var scatter_add_rows(Var a, std::span<const Index> index, Index rows) {
    const Matrix& av = a.value();
    if (static_cast<Index>(index.size()) != av.rows()) {
        throw std::invalid_argument("scatter_add_rows: one index per input row required");
    }
    Matrix out = Matrix::Zero(rows, av.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] < 0 || index[i] >= rows) throw std::out_of_range("scatter_add_rows: index");
        out.row(index[i]) += av.row(static_cast<Index>(i));
    }
    std::vector<Index> idx(index.begin(), index.end());
    return a.tape->record(std::move(out), {a},
                          [a, idx = std::move(idx)](GradTape& t, std::size_t self) {
                              const Matrix& g = t.grad(self);
                              Matrix& ga = t.grad(a.id);
                              for (std::size_t i = 0; i < idx.size(); ++i) {
                                  ga.row(static_cast<Index>(i)) += g.row(idx[i]);
                              }
                          });
}

Var scale_rows(Var a, Var w) {
    if (w.cols() != 1 || w.rows() != a.rows()) {
        throw std::invalid_argument("scale_rows: weights must be a column with one entry per row");
    }
    Matrix out = a.value().array().colwise() * w.value().col(0).array();
    return a.tape->record(std::move(out), {a, w}, [a, w](GradTape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a.id)) {
            t.grad(a.id).array() += g.array().colwise() * t.value(w.id).col(0).array();
        }
        if (t.requires_grad(w.id)) {
            t.grad(w.id).col(0) += g.cwiseProduct(t.value(a.id)).rowwise().sum();
        }
    });
}

Var row_dot(Var a, Var b) {
    check_same_shape(a, b, "row_dot");
    Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
    return a.tape->record(std::move(out), {a, b}, [a, b](GradTape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a.id)) {
            t.grad(a.id).array() += t.value(b.id).array().colwise() * g.col(0).array();
        }
        if (t.requires_grad(b.id)) {
            t.grad(b.id).array() += t.value(a.id).array().colwise() * g.col(0).array();
        }
    });
}

Var segment_softmax(Var scores, std::span<const Index> segments, Index num_segments) {
    if (scores.cols() != 1) throw std::invalid_argument("segment_softmax: scores must be a column");
    const Matrix& s = scores.value();
    std::vector<double> y = txpert::segment_softmax(
        std::span<const double>(s.data(), static_cast<std::size_t>(s.rows())), segments,
        num_segments);
    Matrix out = Eigen::Map<const Matrix>(y.data(), static_cast<Index>(y.size()), 1);
    std::vector<Index> seg(segments.begin(), segments.end());
    return scores.tape->record(
        std::move(out), {scores},
        [scores, seg = std::move(seg), num_segments](GradTape& t, std::size_t self) {
            const Matrix& yv = t.value(self);
            const Matrix& g = t.grad(self);
            std::vector<double> dot(static_cast<std::size_t>(num_segments), 0.0);
            for (std::size_t e = 0; e < seg.size(); ++e) {
                dot[static_cast<std::size_t>(seg[e])] += yv(static_cast<Index>(e), 0) *
                                                         g(static_cast<Index>(e), 0);
            }
            Matrix& gs = t.grad(scores.id);
            for (std::size_t e = 0; e < seg.size(); ++e) {
                const auto r = static_cast<Index>(e);
                gs(r, 0) += yv(r, 0) * (g(r, 0) - dot[static_cast<std::size_t>(seg[e])]);
            }
        });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const Index rows = parts[0].rows();
    Index cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
        cols += p.cols();
    }
    Matrix out(rows, cols);
    Index at = 0;
    for (const Var& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return parts[0].tape->record(std::move(out), inputs,
                                 [inputs](GradTape& t, std::size_t self) {
                                     const Matrix& g = t.grad(self);
                                     Index at = 0;
                                     for (const Var& p : inputs) {
                                         const Index w = t.value(p.id).cols();
                                         if (t.requires_grad(p.id)) {
                                             t.grad(p.id) += g.middleCols(at, w);
                                         }
                                         at += w;
                                     }
                                 });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const Index cols = parts[0].cols();
    Index rows = 0;
    for (const Var& p : parts) {
        if (p.cols() != cols) throw std::invalid_argument("concat_rows: column count mismatch");
        rows += p.rows();
    }
    Matrix out(rows, cols);
    Index at = 0;
    for (const Var& p : parts) {
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return parts[0].tape->record(std::move(out), inputs,
                                 [inputs](GradTape& t, std::size_t self) {
                                     const Matrix& g = t.grad(self);
                                     Index at = 0;
                                     for (const Var& p : inputs) {
                                         const Index h = t.value(p.id).rows();
                                         if (t.requires_grad(p.id)) {
                                             t.grad(p.id) += g.middleRows(at, h);
                                         }
                                         at += h;
                                     }
                                 });
}

Var slice_cols(Var a, Index start, Index width) {
    if (start < 0 || width < 0 || start + width > a.cols()) {
        throw std::out_of_range("slice_cols: range outside matrix");
    }
    Matrix out = a.value().middleCols(start, width);
    return a.tape->record(std::move(out), {a}, [a, start, width](GradTape& t, std::size_t self) {
        t.grad(a.id).middleCols(start, width) += t.grad(self);
    });
}

Var slice_rows(Var a, Index start, Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) {
        throw std::out_of_range("slice_rows: range outside matrix");
    }
    Matrix out = a.value().middleRows(start, count);
    return a.tape->record(std::move(out), {a}, [a, start, count](GradTape& t, std::size_t self) {
        t.grad(a.id).middleRows(start, count) += t.grad(self);
    });
}

Var sum(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("sum: no inputs");
    Matrix out = parts[0].value();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        if (parts[i].rows() != out.rows() || parts[i].cols() != out.cols()) {
            throw std::invalid_argument("sum: shape mismatch");
        }
        out += parts[i].value();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return parts[0].tape->record(std::move(out), inputs, [inputs](GradTape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        for (const Var& p : inputs) {
            if (t.requires_grad(p.id)) t.grad(p.id) += g;
        }
    });
}

Var mean(std::span<const Var> parts) {
    return scale(sum(parts), 1.0 / static_cast<double>(parts.size()));
}

Var mse(Var pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw std::invalid_argument("mse: shape mismatch");
    }
    Matrix out(1, 1);
    out(0, 0) = txpert::mse_loss(pred.value(), target);
    const double n = static_cast<double>(target.size());
    return pred.tape->record(std::move(out), {pred},
                             [pred, target, n](GradTape& t, std::size_t self) {
                                 const double g = t.grad(self)(0, 0);
                                 t.grad(pred.id) += (2.0 * g / n) * (t.value(pred.id) - target);
                             });
}

Var weighted_sum(Var a, const Matrix& weights) {
    if (a.rows() != weights.rows() || a.cols() != weights.cols()) {
        throw std::invalid_argument("weighted_sum: shape mismatch");
    }
    Matrix out(1, 1);
    out(0, 0) = a.value().cwiseProduct(weights).sum();
    return a.tape->record(std::move(out), {a}, [a, weights](GradTape& t, std::size_t self) {
        t.grad(a.id) += t.grad(self)(0, 0) * weights;
    });
}

}  // namespace ad
}  // namespace txpert
