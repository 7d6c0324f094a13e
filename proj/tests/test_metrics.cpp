#include "txpert/metrics.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace txpert;

namespace {

Matrix gaussian(Index r, Index c, Rng& rng) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i) {
        for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    }
    return m;
}

std::vector<ReplicateGroup> random_groups(Rng& rng, Index labels, Index genes) {
    std::vector<ReplicateGroup> groups;
    for (Index l = 0; l < labels; ++l) {
        const Matrix signal = gaussian(1, genes, rng);
        for (int c = 0; c < 2; ++c) {
            const auto k = static_cast<Index>(1 + rng.uniform_index(7));
            Matrix d = gaussian(k, genes, rng);
            for (Index r = 0; r < k; ++r) d.row(r) += signal;
            groups.push_back({"p" + std::to_string(l), {"L", "b" + std::to_string(c)}, d});
        }
    }
    return groups;
}

}  // namespace

TEST(Pearson, MatchesOracleAndHandlesConstants) {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const Matrix a = gaussian(1, 40, rng);
        const Matrix b = gaussian(1, 40, rng) + 0.5 * a;
        const auto r = pearson(a.row(0), b.row(0));
        ASSERT_TRUE(r.has_value());
        EXPECT_NEAR(*r, oracle::pearson(oracle::row(a, 0), oracle::row(b, 0)), 1e-12);
    }
    const RowVector c = RowVector::Constant(5, 2.0);
    const RowVector x = RowVector::LinSpaced(5, 0, 1);
    EXPECT_FALSE(pearson(c, x).has_value());
    EXPECT_NEAR(*pearson(x, x), 1.0, 1e-15);
    EXPECT_NEAR(*pearson(x, (-3.0 * x).eval()), -1.0, 1e-15);
    EXPECT_FALSE(cosine(RowVector::Zero(3), x.head(3)).has_value());
}

TEST(Retrieval, FullMatchesOracle) {
    Rng rng(2);
    for (int t = 0; t < 5; ++t) {
        const Matrix ref = gaussian(30, 20, rng);
        const Matrix pred = ref + 1.5 * gaussian(30, 20, rng);
        Rng unused(0);
        const auto got = retrieval(pred, ref, RetrievalMode::Full, unused);
        const auto want = oracle::retrieval_full(pred, ref);
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
    }
}

TEST(Retrieval, FastMatchesOracleOnSameSample) {
    Rng rng(3);
    const Matrix ref = gaussian(140, 15, rng);
    const Matrix pred = ref + 2.0 * gaussian(140, 15, rng);
    Rng a(77);
    Rng b(77);
    const auto got = retrieval(pred, ref, RetrievalMode::Fast, a);
    const auto want = oracle::retrieval_fast(pred, ref, b);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Retrieval, FastFallsBackToFullForSmallSets) {
    Rng rng(4);
    const Matrix ref = gaussian(60, 10, rng);
    const Matrix pred = gaussian(60, 10, rng);
    Rng a(1), b(1);
    EXPECT_EQ(retrieval(pred, ref, RetrievalMode::Fast, a), retrieval(pred, ref, RetrievalMode::Full, b));
}

TEST(Retrieval, PerfectPredictionsScoreOne) {
    Rng rng(5);
    const Matrix ref = gaussian(50, 25, rng);
    Rng unused(0);
    for (double r : retrieval(ref, ref, RetrievalMode::Full, unused)) EXPECT_EQ(r, 1.0);
}

TEST(Retrieval, UndefinedSimilarityHandling) {
    Matrix ref(3, 4);
    ref << 1, 2, 3, 4, 5, 5, 5, 5, 4, 1, 2, 0;
    Matrix pred = ref;
    pred.row(2).setConstant(7.0);
    Rng unused(0);
    const auto r = retrieval(pred, ref, RetrievalMode::Full, unused);
    EXPECT_EQ(r[0], 1.0);  // the constant reference counts for the query
    EXPECT_TRUE(std::isnan(r[1]));
    EXPECT_TRUE(std::isnan(r[2]));
    EXPECT_THROW(retrieval(pred.topRows(1), ref.topRows(1), RetrievalMode::Full, unused), std::invalid_argument);
}

TEST(Retrieval, RandomPredictionsAverageHalf) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 3; ++s) {
        Rng rng(100 + s);
        const Matrix ref = gaussian(200, 50, rng);
        const Matrix pred = gaussian(200, 50, rng);
        Rng unused(0);
        const auto r = retrieval(pred, ref, RetrievalMode::Full, unused);
        total += oracle::mean_finite(r);
    }
    EXPECT_NEAR(total / 3.0, 0.5, 0.03);
}

TEST(SplitHalf, MatchesOracle) {
    Rng rng(6);
    for (int t = 0; t < 5; ++t) {
        const auto groups = random_groups(rng, 12, 30);
        const auto got = split_half_reproducibility(groups, 4, 9 + t);
        const auto want = oracle::split_half(groups, 4, 9 + t);
        EXPECT_NEAR(got.pearson_delta, want.pearson, 1e-12);
        EXPECT_NEAR(got.retrieval, want.retrieval, 1e-12);
    }
}

TEST(SplitHalf, SkipsSingletonGroups) {
    Rng rng(7);
    std::vector<ReplicateGroup> groups{{"a", {"L", "b"}, gaussian(1, 5, rng)},
                                       {"b", {"L", "b"}, gaussian(4, 5, rng)},
                                       {"c", {"L", "b"}, gaussian(3, 5, rng)}};
    const auto r = split_half_reproducibility(groups, 2, 0);
    EXPECT_EQ(r.skipped_groups, 1);
    EXPECT_EQ(r.per_perturbation.count("a"), 0u);
    EXPECT_EQ(r.per_perturbation.size(), 2u);
    EXPECT_THROW(split_half_reproducibility(groups, 0, 0), std::invalid_argument);
}

TEST(GeneralBaseline, HandComputedCases) {
    const ExpressionDataset ds = fixtures::hand_dataset();
    const ControlIndex controls(ds);
    const std::vector<Index> train{4, 5, 6, 7, 8, 9};
    const GeneralBaseline gb(ds, train, controls);
    const auto want = fixtures::hand_baseline(ds);
    EXPECT_TRUE(gb.predict_delta({"A"}) == want.label_mean.at("A"));
    EXPECT_TRUE(gb.predict_delta({"C"}) == want.label_mean.at("C"));
    EXPECT_TRUE(gb.global_delta() == want.global);
    EXPECT_TRUE(gb.predict_delta({"D"}) == want.global);
    EXPECT_TRUE(gb.predict_delta({"A", "B"}) == RowVector(want.label_mean.at("A") + want.label_mean.at("B")));
    EXPECT_TRUE(gb.predict_delta({"A", "D"}) == RowVector(want.label_mean.at("A") + want.global));
    EXPECT_TRUE(gb.predict_delta({}) == RowVector::Zero(5));
    const ConditionRequest req{{"A"}, {"L", "b2"}};
    EXPECT_TRUE(gb.predict_profile(req, controls) == RowVector(controls.mean({"L", "b2"}) + want.label_mean.at("A")));
}

TEST(BatchRidgeBaseline, MatchesDirectNormalEquations) {
    const ExpressionDataset ds = fixtures::hand_dataset();
    const ControlIndex controls(ds);
    const std::vector<Index> train{4, 5, 6, 7, 8, 9};
    const BatchRidgeBaseline ridge(ds, train, controls, 1.0);
    // One row per cell: intercept, line L, context (L,b1), context (L,b2).
    Matrix x = Matrix::Zero(6, 4);
    Matrix y(6, 5);
    for (Index r = 0; r < 6; ++r) {
        const Index cell = train[static_cast<std::size_t>(r)];
        const auto& c = ds.cells()[static_cast<std::size_t>(cell)];
        x(r, 0) = 1;
        x(r, 1) = 1;
        x(r, c.batch == "b1" ? 2 : 3) = 1;
        y.row(r) = ds.normalized().row(cell) - controls.mean({c.cell_line, c.batch});
    }
    Matrix reg = Matrix::Identity(4, 4);
    reg(0, 0) = 0;
    const Matrix beta = (x.transpose() * x + reg).fullPivLu().solve(x.transpose() * y);
    const RowVector want = beta.row(0) + beta.row(1) + beta.row(3);
    EXPECT_LT((ridge.predict_delta({"L", "b2"}) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Evaluate, ReportIsConsistent) {
    SyntheticSpec s;
    s.num_genes = 30;
    s.num_perturbations = 16;
    s.replicates = 4;
    s.controls_per_context = 5;
    const SyntheticData d = synth_generate(s);
    Rng rng(1);
    const SplitSpec split = split_by_perturbation(d.dataset, rng);
    const ControlIndex controls(d.dataset);
    const GeneralBaseline gb(d.dataset, split.cells_in(d.dataset, Split::Train), controls);
    EvaluateOptions opt;
    opt.reproducibility_seeds = 2;
    const MetricReport r = evaluate(gb.predictor(), d.dataset, split, opt);
    EXPECT_EQ(r.split, "perturbation");
    EXPECT_EQ(static_cast<Index>(r.records.size()), 4);
    const MetricAggregates again = aggregate(r.records);
    EXPECT_EQ(again.pearson_delta, r.aggregates.pearson_delta);
    EXPECT_EQ(r.aggregates.pearson_delta, r.general_baseline.pearson_delta);
    ASSERT_TRUE(r.batch_baseline.has_value());
    EXPECT_GT(r.reproducibility.pearson_delta, 0.0);
}

TEST(PerturbationDeltas, CellWeightedContexts) {
    const ExpressionDataset ds = fixtures::hand_dataset();
    const ControlIndex controls(ds);
    const std::vector<Index> cells{4, 5};
    const DeltaPredictor constant = [](std::span<const ConditionRequest> reqs) {
        Matrix out(static_cast<Index>(reqs.size()), 5);
        for (Index i = 0; i < out.rows(); ++i) out.row(i).setConstant(reqs[static_cast<std::size_t>(i)].context.batch == "b1" ? 1.0 : 3.0);
        return out;
    };
    const auto d = perturbation_deltas(ds, cells, controls, constant);
    ASSERT_EQ(d.labels, std::vector<std::string>{"A"});
    EXPECT_EQ(d.n_cells[0], 2);
    EXPECT_TRUE(d.predicted.row(0).isApproxToConstant(2.0));
    const auto want = fixtures::hand_baseline(ds);
    EXPECT_LT((d.observed.row(0) - want.label_mean.at("A")).cwiseAbs().maxCoeff(), 1e-12);
}
