#include "txpert/optim.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace txpert;

namespace {

Matrix random_matrix(Index r, Index c, Rng& rng) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i) {
        for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    }
    return m;
}

// Checks d(sum(W .* f(params)))/d(params) against finite differences.
double check(ParameterStore& store, const std::function<Var(GradTape&, std::vector<Var>&)>& f,
             const Matrix& weights) {
    auto params = store.all();
    const LossFn loss = [&](GradTape& tape) {
        std::vector<Var> vars;
        for (Parameter* p : params) vars.push_back(tape.parameter(*p));
        return ad::weighted_sum(f(tape, vars), weights);
    };
    return grad_check(loss, params).max_relative_error;
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, ForkIsDeterministicAndDistinct) {
    const Rng root(7);
    Rng f1 = root.fork(3);
    Rng f2 = root.fork(3);
    Rng f3 = root.fork(4);
    Rng parent(7);
    const auto x = f1.next_u64();
    EXPECT_EQ(x, f2.next_u64());
    EXPECT_NE(x, f3.next_u64());
    EXPECT_NE(x, parent.next_u64());
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
    Rng rng(1);
    const auto s = rng.sample_without_replacement(50, 20);
    ASSERT_EQ(s.size(), 20u);
    std::set<std::size_t> u(s.begin(), s.end());
    EXPECT_EQ(u.size(), 20u);
    for (auto i : s) EXPECT_LT(i, 50u);
}

TEST(Rng, UniformInUnitInterval) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Tape, MatmulAddLeakyGradients) {
    Rng rng(0);
    ParameterStore store;
    store.add("a", random_matrix(3, 4, rng));
    store.add("b", random_matrix(4, 2, rng));
    store.add("bias", random_matrix(1, 2, rng));
    const Matrix w = random_matrix(3, 2, rng);
    const double err = check(store, [](GradTape&, std::vector<Var>& v) {
        return ad::leaky_relu(ad::add_row(ad::matmul(v[0], v[1]), v[2]), 0.2);
    }, w);
    EXPECT_LT(err, 1e-6);
}

TEST(Tape, ElementwiseGradients) {
    Rng rng(1);
    ParameterStore store;
    store.add("a", random_matrix(4, 3, rng));
    store.add("b", random_matrix(4, 3, rng));
    const Matrix w = random_matrix(4, 3, rng);
    const double err = check(store, [](GradTape&, std::vector<Var>& v) {
        Var h = ad::hadamard(v[0], v[1]);
        Var s = ad::sub(ad::scale(h, 1.5), v[1]);
        std::vector<Var> parts{s, v[0]};
        return ad::mean(parts);
    }, w);
    EXPECT_LT(err, 1e-6);
}

TEST(Tape, GatherScatterGradients) {
    Rng rng(2);
    ParameterStore store;
    store.add("a", random_matrix(5, 3, rng));
    const std::vector<Index> idx{0, 2, 2, 4, 1, 0};
    const std::vector<Index> dst{1, 1, 0, 2, 2, 2};
    const Matrix w = random_matrix(3, 3, rng);
    const double err = check(store, [&](GradTape&, std::vector<Var>& v) {
        return ad::scatter_add_rows(ad::gather_rows(v[0], idx), dst, 3);
    }, w);
    EXPECT_LT(err, 1e-6);
}

TEST(Tape, SegmentSoftmaxAndRowOpsGradients) {
    Rng rng(3);
    ParameterStore store;
    store.add("a", random_matrix(6, 4, rng));
    store.add("b", random_matrix(6, 4, rng));
    const std::vector<Index> seg{0, 0, 1, 1, 1, 2};
    const Matrix w = random_matrix(6, 4, rng);
    const double err = check(store, [&](GradTape&, std::vector<Var>& v) {
        Var scores = ad::row_dot(v[0], v[1]);
        Var alpha = ad::segment_softmax(scores, seg, 3);
        return ad::scale_rows(v[1], alpha);
    }, w);
    EXPECT_LT(err, 1e-6);
}

TEST(Tape, SliceConcatGradients) {
    Rng rng(4);
    ParameterStore store;
    store.add("a", random_matrix(4, 6, rng));
    const Matrix w = random_matrix(6, 3, rng);
    const double err = check(store, [](GradTape&, std::vector<Var>& v) {
        Var left = ad::slice_cols(v[0], 0, 3);
        Var right = ad::slice_cols(v[0], 3, 3);
        std::vector<Var> cols{ad::slice_rows(left, 0, 2), ad::slice_rows(right, 2, 2)};
        Var stacked = ad::concat_rows(cols);
        std::vector<Var> more{stacked, ad::slice_rows(left, 1, 2)};
        return ad::concat_rows(more);
    }, w);
    EXPECT_LT(err, 1e-6);
}

TEST(Tape, MseGradient) {
    Rng rng(5);
    ParameterStore store;
    Parameter& p = store.add("p", random_matrix(3, 3, rng));
    const Matrix target = random_matrix(3, 3, rng);
    GradTape tape;
    tape.backward(ad::mse(tape.parameter(p), target));
    const Matrix expected = 2.0 * (p.value - target) / 9.0;
    EXPECT_LT((p.grad - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Tape, SegmentSoftmaxSumsToOnePerSegment) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 30;
        std::vector<Index> seg;
        for (Index i = 0; i < n; ++i) seg.push_back(static_cast<Index>(rng.uniform_index(5)));
        GradTape tape;
        Var s = tape.constant(random_matrix(n, 1, rng) * 20.0);
        const Matrix a = ad::segment_softmax(s, seg, 5).value();
        std::vector<double> sums(5, 0.0);
        std::vector<bool> used(5, false);
        for (Index i = 0; i < n; ++i) {
            EXPECT_GE(a(i, 0), 0.0);
            sums[static_cast<std::size_t>(seg[static_cast<std::size_t>(i)])] += a(i, 0);
            used[static_cast<std::size_t>(seg[static_cast<std::size_t>(i)])] = true;
        }
        for (int k = 0; k < 5; ++k) {
            if (used[static_cast<std::size_t>(k)]) EXPECT_NEAR(sums[static_cast<std::size_t>(k)], 1.0, 1e-12);
        }
    }
}

TEST(Optimizer, AdamReducesQuadratic) {
    ParameterStore store;
    Parameter& p = store.add("x", Matrix::Constant(2, 2, 3.0));
    Optimizer opt({OptimizerKind::Adam, 0.1});
    auto params = store.all();
    for (int i = 0; i < 200; ++i) {
        GradTape tape;
        tape.backward(ad::mse(tape.parameter(p), Matrix::Zero(2, 2)));
        opt.step(params);
    }
    EXPECT_LT(p.value.cwiseAbs().maxCoeff(), 0.1);
    EXPECT_EQ(opt.steps_taken(), 200);
}

TEST(Optimizer, SgdMatchesClosedForm) {
    ParameterStore store;
    Parameter& p = store.add("x", Matrix::Constant(1, 1, 2.0));
    Optimizer opt({OptimizerKind::Sgd, 0.25});
    auto params = store.all();
    GradTape tape;
    tape.backward(ad::mse(tape.parameter(p), Matrix::Zero(1, 1)));
    opt.step(params);
    EXPECT_DOUBLE_EQ(p.value(0, 0), 2.0 - 0.25 * 4.0);
    EXPECT_EQ(p.grad(0, 0), 0.0);
}

TEST(Optimizer, NonFiniteGradientLeavesValuesUntouched) {
    ParameterStore store;
    Parameter& p = store.add("x", Matrix::Constant(1, 2, 1.0));
    p.grad(0, 1) = std::numeric_limits<double>::infinity();
    Optimizer opt;
    auto params = store.all();
    EXPECT_THROW(opt.step(params), std::runtime_error);
    EXPECT_EQ(p.value(0, 0), 1.0);
    EXPECT_EQ(p.value(0, 1), 1.0);
}

TEST(GradCheck, DetectsWrongGradient) {
    ParameterStore store;
    Rng rng(8);
    store.add("x", random_matrix(2, 2, rng));
    auto params = store.all();
    const LossFn loss = [&](GradTape& tape) {
        return ad::weighted_sum(tape.parameter(*params[0]), Matrix::Ones(2, 2));
    };
    const std::vector<Matrix> wrong{Matrix::Constant(2, 2, 2.0)};
    EXPECT_GT(grad_check_against(loss, params, wrong).max_relative_error, 0.4);
    const std::vector<Matrix> right{Matrix::Ones(2, 2)};
    EXPECT_LT(grad_check_against(loss, params, right).max_relative_error, 1e-8);
}
