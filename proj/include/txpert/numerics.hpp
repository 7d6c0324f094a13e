#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace txpert {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Node features, weights and profiles are stored one entity per row.
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using Index = Eigen::Index;

/// Throws std::invalid_argument naming `what` if any entry is NaN or infinite.
template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const std::string& what) {
    if (!m.derived().allFinite()) {
        throw std::invalid_argument(what + ": non-finite value");
    }
}

/// Deterministic generator. Uniform, normal and index draws are derived from
/// raw mt19937_64 output rather than the implementation-defined std::
/// distributions, so a seed gives the same stream on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64();
    double uniform();                        // [0, 1)
    double normal();                         // standard normal, Box-Muller
    std::size_t uniform_index(std::size_t n);  // uniform on [0, n)
    /// Independent child stream; same (seed, stream) always yields the same child.
    Rng fork(std::uint64_t stream) const;

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

    /// k distinct indices from [0, n), in sampled order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Entries i.i.d. N(0, 2 / fan_in).
Matrix kaiming_init(Index rows, Index cols, Index fan_in, Rng& rng);

template <typename Derived>
auto leaky_relu(const Eigen::MatrixBase<Derived>& x, double slope) {
    return x.unaryExpr([slope](double v) { return v >= 0.0 ? v : slope * v; });
}

/// Softmax within groups. segments[e] is the group of scores[e]; groups are
/// 0..num_segments-1 and every group must be non-empty.
std::vector<double> segment_softmax(std::span<const double> scores,
                                    std::span<const Index> segments, Index num_segments);

/// Mean over rows of (1/n)||y - yhat||^2.
template <typename A, typename B>
double mse_loss(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw std::invalid_argument("mse_loss: shape mismatch");
    }
    if (pred.size() == 0) return 0.0;
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

}  // namespace txpert
