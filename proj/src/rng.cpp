#include "txpert/numerics.hpp"

#include <cmath>
#include <numbers>

namespace txpert {

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % bound);
}

Rng Rng::fork(std::uint64_t stream) const {
    // splitmix64 finalizer over (seed, stream)
    std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(pool[i], pool[i + uniform_index(n - i)]);
    }
    pool.resize(k);
    return pool;
}

Matrix kaiming_init(Index rows, Index cols, Index fan_in, Rng& rng) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("kaiming_init: non-positive dimensions");
    if (fan_in < 1) throw std::invalid_argument("kaiming_init: fan_in must be >= 1");
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = std_dev * rng.normal();
    return m;
}

std::vector<double> segment_softmax(std::span<const double> scores,
                                    std::span<const Index> segments, Index num_segments) {
    if (scores.size() != segments.size()) {
        throw std::invalid_argument("segment_softmax: scores/segments length mismatch");
    }
    const auto nseg = static_cast<std::size_t>(num_segments);
    std::vector<double> max_score(nseg, -std::numeric_limits<double>::infinity());
    std::vector<double> denom(nseg, 0.0);
    std::vector<std::size_t> count(nseg, 0);
    for (std::size_t e = 0; e < scores.size(); ++e) {
        const auto s = static_cast<std::size_t>(segments[e]);
        if (s >= nseg) throw std::invalid_argument("segment_softmax: segment id out of range");
        max_score[s] = std::max(max_score[s], scores[e]);
        ++count[s];
    }
    for (std::size_t s = 0; s < nseg; ++s) {
        if (count[s] == 0) {
            throw std::invalid_argument("segment_softmax: empty segment " + std::to_string(s));
        }
    }
    std::vector<double> out(scores.size());
    for (std::size_t e = 0; e < scores.size(); ++e) {
        const auto s = static_cast<std::size_t>(segments[e]);
        out[e] = std::exp(scores[e] - max_score[s]);
        denom[s] += out[e];
    }
    for (std::size_t e = 0; e < scores.size(); ++e) {
        out[e] /= denom[static_cast<std::size_t>(segments[e])];
    }
    return out;
}

}  // namespace txpert
