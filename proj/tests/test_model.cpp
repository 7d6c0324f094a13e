#include "txpert/model.hpp"

#include "test_util.hpp"

using namespace txpert;
using namespace testutil;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.encoder.layers = 2;
    c.encoder.input_dim = 8;
    c.encoder.hidden_dim = 8;
    c.encoder.heads = 2;
    c.basal_hidden = {16};
    c.init_seed = 4;
    return c;
}

SyntheticData tiny_data() {
    SyntheticSpec s;
    s.num_genes = 24;
    s.num_perturbations = 12;
    s.replicates = 4;
    s.controls_per_context = 6;
    s.seed = 2;
    return synth_generate(s);
}

}  // namespace

TEST(ModelConfig, Validation) {
    ModelConfig c = tiny_config();
    EXPECT_NO_THROW(c.validate(24));
    c.mode = ShiftMode::DeltaOnRaw;
    EXPECT_THROW(c.validate(24), std::invalid_argument);
    c.basal = BasalKind::Identity;
    EXPECT_NO_THROW(c.validate(24));
    c.mode = ShiftMode::LatentShift;
    EXPECT_THROW(c.validate(24), std::invalid_argument);
    EXPECT_NO_THROW(c.validate(8));
    EXPECT_EQ(parse_shift_mode("delta_on_raw"), ShiftMode::DeltaOnRaw);
}

TEST(Model, ParameterCountOfDefaultShape) {
    const SyntheticData d = tiny_data();
    const TxPertModel m(tiny_config(), d.dataset.genes(), {d.truth.graph});
    const Index n = 24, dd = 8;
    const Index table = n * dd;
    const Index gat = 2 * 2 * (dd * dd + 2 * dd);
    const Index basal = n * 16 + 16 + 16 * dd + dd;
    const Index decoder = dd * 4 * dd + 4 * dd + 4 * dd * 4 * dd + 4 * dd + 4 * dd * n + n;
    EXPECT_EQ(m.parameters().scalar_count(), table + gat + basal + decoder);
}

TEST(Model, ForwardShapesAndAdditiveShift) {
    const SyntheticData d = tiny_data();
    ModelConfig c = tiny_config();
    const TxPertModel m(c, d.dataset.genes(), {d.truth.graph});
    const Matrix basal = d.dataset.normalized().topRows(3);
    const std::vector<std::vector<std::string>> perts{{}, {"G01"}, {"G01", "G02"}};
    GradTape tape;
    ParamBinder bind(tape);
    const auto out = m.forward(bind, basal, perts);
    EXPECT_EQ(out.prediction.rows(), 3);
    EXPECT_EQ(out.prediction.cols(), 24);
    EXPECT_EQ(out.latent.cols(), 8);
    const Matrix z = m.encoder().encode_values();
    const Matrix lat = out.latent.value();
    const RowVector s0 = lat.row(0);
    // Same basal row would give the same s; compare shifts via differences of a repeated basal.
    const Matrix same = basal.row(0).replicate(3, 1);
    GradTape t2;
    ParamBinder b2(t2);
    const Matrix l2 = m.forward(b2, same, perts).latent.value();
    const Index r1 = *m.encoder().row_of("G01");
    const Index r2 = *m.encoder().row_of("G02");
    EXPECT_LT((l2.row(1) - l2.row(0) - z.row(r1)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((l2.row(2) - l2.row(0) - z.row(r1) - z.row(r2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(s0 == l2.row(0));
    EXPECT_THROW(m.forward(bind, basal.topRows(2), perts), std::invalid_argument);
    const std::vector<std::vector<std::string>> unknown{{"nope"}};
    EXPECT_THROW(m.predict_profiles(basal.topRows(1), unknown), std::out_of_range);
}

TEST(Model, DeltaOnRawAddsDecodedShift) {
    const SyntheticData d = tiny_data();
    ModelConfig c = tiny_config();
    c.mode = ShiftMode::DeltaOnRaw;
    c.basal = BasalKind::Identity;
    const TxPertModel m(c, d.dataset.genes(), {d.truth.graph});
    const Matrix basal = d.dataset.normalized().topRows(2);
    const std::vector<std::vector<std::string>> perts{{"G03"}, {"G03"}};
    const Matrix y = m.predict_profiles(basal, perts);
    EXPECT_LT(((y.row(0) - basal.row(0)) - (y.row(1) - basal.row(1))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Model, ClampTargetOverridesPerturbedGene) {
    const SyntheticData d = tiny_data();
    ModelConfig c = tiny_config();
    c.clamp_target = 0.0;
    const TxPertModel m(c, d.dataset.genes(), {d.truth.graph});
    const std::vector<std::vector<std::string>> perts{{"G05"}};
    const Matrix y = m.predict_profiles(d.dataset.normalized().topRows(1), perts);
    EXPECT_EQ(y(0, *d.dataset.gene_index("G05")), 0.0);
}

TEST(Model, GradientsMatchFiniteDifferences) {
    const SyntheticData d = tiny_data();
    ModelConfig c = tiny_config();
    c.encoder.layers = 1;
    c.encoder.input_dim = 4;
    c.encoder.hidden_dim = 4;
    c.basal_hidden = {6};
    c.decoder_width_multiplier = 1;
    TxPertModel m(c, d.dataset.genes(), {d.truth.graph});
    const Matrix basal = d.dataset.normalized().topRows(3);
    const Matrix target = d.dataset.normalized().middleRows(100, 3);
    const std::vector<std::vector<std::string>> perts{{"G01"}, {"G02", "G07"}, {}};
    auto params = m.parameters().all();
    const LossFn loss = [&](GradTape& tape) {
        ParamBinder bind(tape);
        return ad::mse(m.forward(bind, basal, perts).prediction, target);
    };
    EXPECT_LT(grad_check(loss, params).max_relative_error, 1e-4);
}

TEST(Model, SnapshotRestore) {
    const SyntheticData d = tiny_data();
    TxPertModel m(tiny_config(), d.dataset.genes(), {d.truth.graph});
    const auto snap = m.snapshot();
    for (Parameter* p : m.parameters().all()) p->value.setZero();
    m.restore(snap);
    const auto again = m.snapshot();
    for (std::size_t i = 0; i < snap.size(); ++i) EXPECT_TRUE(snap[i] == again[i]);
    EXPECT_THROW(m.restore({}), std::invalid_argument);
}

TEST(Training, ImprovesOnTinyData) {
    const SyntheticData d = tiny_data();
    Rng rng(1);
    const SplitSpec split = split_by_perturbation(d.dataset, rng);
    TxPertModel m(tiny_config(), d.dataset.genes(), {d.truth.graph});
    TrainConfig tc;
    tc.max_epochs = 6;
    tc.patience = 6;
    tc.batch_size = 32;
    tc.optimizer.learning_rate = 3e-3;
    const TrainResult r = train(m, d.dataset, split, tc);
    ASSERT_EQ(r.history.size(), 6u);
    EXPECT_LT(r.history.back().train_mse, r.history.front().train_mse);
    const ControlIndex controls(d.dataset);
    const double val = mean_pearson_delta(d.dataset, split.cells_in(d.dataset, Split::Val), controls, m.predictor(controls));
    EXPECT_NEAR(val, r.best_val_pearson_delta, 1e-12);
    EXPECT_FALSE(m.trained_genes().empty());
}

TEST(Training, IsDeterministic) {
    const SyntheticData d = tiny_data();
    Rng rng(1);
    const SplitSpec split = split_by_perturbation(d.dataset, rng);
    TrainConfig tc;
    tc.max_epochs = 2;
    std::vector<Matrix> snaps[2];
    for (auto& s : snaps) {
        TxPertModel m(tiny_config(), d.dataset.genes(), {d.truth.graph});
        train(m, d.dataset, split, tc);
        s = m.snapshot();
    }
    for (std::size_t i = 0; i < snaps[0].size(); ++i) EXPECT_TRUE(snaps[0][i] == snaps[1][i]);
}

TEST(Training, RejectsBadConfig) {
    TrainConfig tc;
    tc.batch_size = 0;
    EXPECT_THROW(tc.validate(), std::invalid_argument);
    tc = TrainConfig{};
    tc.optimizer.learning_rate = 0;
    EXPECT_THROW(tc.validate(), std::invalid_argument);
}

TEST(Checkpoint, RoundTripPredictsIdentically) {
    const SyntheticData d = tiny_data();
    ModelConfig c = tiny_config();
    c.encoder.kind = EncoderKind::ExphormerMG;
    TxPertModel m(c, d.dataset.genes(), {d.truth.graph, d.truth.graph.renamed("copy")});
    m.set_trained_genes({"G01", "G02"});
    const auto dir = fresh_dir("ckpt");
    save_checkpoint(m, dir / "model.json");
    const auto back = load_checkpoint(dir / "model.json");
    const std::vector<std::vector<std::string>> perts{{"G01"}, {"G04", "G09"}};
    const Matrix basal = d.dataset.normalized().topRows(2);
    EXPECT_TRUE(back->predict_profiles(basal, perts) == m.predict_profiles(basal, perts));
    EXPECT_EQ(back->trained_genes(), m.trained_genes());
    EXPECT_EQ(back->config().encoder.kind, EncoderKind::ExphormerMG);
    write_file(dir / "bad.json", "{\"format\": \"other\"}");
    EXPECT_THROW(load_checkpoint(dir / "bad.json"), std::runtime_error);
}

TEST(History, CsvHeader) {
    const auto dir = fresh_dir("hist");
    save_history_csv({{1, 0.5, 0.25}}, dir / "h.csv");
    const std::string text = read_file(dir / "h.csv");
    EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,train_mse,val_pearson_delta");
}
