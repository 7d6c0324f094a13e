#pragma once

#include "txpert/numerics.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace txpert {

/// A trainable matrix and its accumulated gradient.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string name, Matrix value);

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Named, stable-address collection of parameters owned by a model.
class ParameterStore {
public:
    Parameter& add(std::string name, Matrix value);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    std::size_t size() const { return params_.size(); }
    Index scalar_count() const;
    void zero_grad();

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

class GradTape;

/// Handle to a node on a GradTape.
struct Var {
    GradTape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
};

/// Records matrix operations in evaluation order and replays them in reverse
/// to accumulate exact gradients into the Parameters that fed the result.
class GradTape {
public:
    using Backprop = std::function<void(GradTape&, std::size_t)>;

    Var constant(Matrix value);
    Var parameter(Parameter& p);

    /// Seeds d(loss)/d(loss) = 1 and adds gradients into Parameter::grad.
    void backward(Var loss);

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer of a node, allocated on first use.
    Matrix& grad(std::size_t id);
    std::size_t size() const { return nodes_.size(); }

    /// Appends an op node; `backprop` runs only if some input needs gradients.
    Var record(Matrix value, std::initializer_list<Var> inputs, Backprop backprop);
    Var record(Matrix value, std::span<const Var> inputs, Backprop backprop);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backprop backprop;
        Parameter* param = nullptr;
        bool requires_grad = false;
        bool has_grad = false;
    };
    std::vector<Node> nodes_;
};

// Differentiable operations. All inputs must live on the same tape.
namespace ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
Var hadamard(Var a, Var b);
/// a (n x k) + bias (1 x k) broadcast over rows.
Var add_row(Var a, Var bias);
Var leaky_relu(Var a, double slope);
/// input * weight (+ bias).
Var linear(Var input, Var weight, const Var* bias = nullptr);
/// out.row(i) = a.row(index[i]).
Var gather_rows(Var a, std::span<const Index> index);
/// out.row(index[i]) += a.row(i); out has `rows` rows.
Var scatter_add_rows(Var a, std::span<const Index> index, Index rows);
/// out.row(i) = w(i) * a.row(i); w is (n x 1).
Var scale_rows(Var a, Var w);
/// Row-wise dot product, (n x k),(n x k) -> (n x 1).
Var row_dot(Var a, Var b);
/// Softmax of a column vector within segment groups.
Var segment_softmax(Var scores, std::span<const Index> segments, Index num_segments);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Index start, Index width);
Var slice_rows(Var a, Index start, Index count);
Var sum(std::span<const Var> parts);
Var mean(std::span<const Var> parts);
/// Scalar (1 x 1) mean squared error against a constant target.
Var mse(Var pred, const Matrix& target);
/// Scalar (1 x 1) sum of all entries of a .* weights (weights constant).
Var weighted_sum(Var a, const Matrix& weights);

}  // namespace ad

}  // namespace txpert
