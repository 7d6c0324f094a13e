#include "txpert/config.hpp"

#include <gtest/gtest.h>

using namespace txpert;

TEST(Config, SeedIsMandatory) {
    EXPECT_THROW(parse_config("[run]\ndataset = d\n"), ConfigError);
    EXPECT_THROW(parse_config(""), ConfigError);
    EXPECT_EQ(parse_config("[run]\nseed = 12\n").seed, 12u);
}

TEST(Config, ParsesSectionsAndResolvesPaths) {
    const std::string text = R"(# experiment
[run]
seed = 3
dataset = data/ds
output = out

[graph.string]
path = graphs/string.tsv
symmetrize = true

[graph.go]
path = /abs/go.tsv

[encoder]
kind = hybrid
layers = 2
heads = 2

[model]
clamp_target = 0.0

[train]
max_epochs = 7
learning_rate = 0.003
mean_target = true

[split]
held_out_line = L1

[ablation]
rewire = 0, 1.0
downsample = 0.4
graph_subsets = string;string,go

[synth]
num_genes = 50
)";
    const RunConfig c = parse_config(text, "/base");
    EXPECT_EQ(c.dataset, std::filesystem::path("/base/data/ds"));
    ASSERT_EQ(c.graphs.size(), 2u);
    EXPECT_EQ(c.graphs[0].name, "string");
    EXPECT_TRUE(c.graphs[0].symmetrize);
    EXPECT_EQ(c.graphs[0].path, std::filesystem::path("/base/graphs/string.tsv"));
    EXPECT_EQ(c.graphs[1].path, std::filesystem::path("/abs/go.tsv"));
    EXPECT_EQ(c.model.encoder.kind, EncoderKind::Hybrid);
    EXPECT_EQ(c.model.encoder.layers, 2);
    ASSERT_TRUE(c.model.clamp_target.has_value());
    EXPECT_EQ(c.train.max_epochs, 7);
    EXPECT_DOUBLE_EQ(c.train.optimizer.learning_rate, 0.003);
    EXPECT_TRUE(c.train.mean_target);
    EXPECT_EQ(c.split.held_out_line, std::optional<std::string>("L1"));
    EXPECT_EQ(c.ablation.rewire_fractions, (std::vector<double>{0.0, 1.0}));
    ASSERT_EQ(c.ablation.graph_subsets.size(), 2u);
    EXPECT_EQ(c.ablation.graph_subsets[1], (std::vector<std::string>{"string", "go"}));
    EXPECT_EQ(c.synth.num_genes, 50);
    EXPECT_EQ(c.synth.seed, 3u);
}

TEST(Config, RoundTripsThroughText) {
    RunConfig c = parse_config("[run]\nseed = 9\ndataset = /d\n[graph.a]\npath = /a.tsv\n[encoder]\nkind = exphormer\n"
                               "leaky_slope = 0.15\n[train]\nlearning_rate = 0.0001\n[split]\nratios = 0.6,0.2,0.2\n"
                               "[ablation]\ndownsample = 0.25,0.5\n[eval]\nsimilarity = cosine\n");
    const std::string text = to_config_text(c);
    const RunConfig back = parse_config(text);
    EXPECT_EQ(to_config_text(back), text);
    EXPECT_EQ(back.model.encoder.leaky_slope, 0.15);
    EXPECT_EQ(back.train.optimizer.learning_rate, 0.0001);
    EXPECT_EQ(back.eval.similarity, Similarity::Cosine);
    EXPECT_EQ(back.split.ratios[0], 0.6);
    const RunConfig defaults = parse_config("[run]\nseed = 1\n");
    EXPECT_EQ(to_config_text(parse_config(to_config_text(defaults))), to_config_text(defaults));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_config("[run]\nseed = 1\nsed = 2\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[bogus]\nx = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = -1\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[encoder]\nkind = gcn\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[encoder]\nlayers = two\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[ablation]\nrewire = 1.5\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[graph.x]\nsymmetrize = true\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[train]\nbatch_size = 0\n"), ConfigError);
    try {
        parse_config("[run]\nseed = 1\n[train]\nepochs = 3\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("epochs"), std::string::npos);
    }
}

TEST(Config, ListHelpers) {
    EXPECT_EQ(parse_double_list(" 0, 0.5 ,1"), (std::vector<double>{0.0, 0.5, 1.0}));
    EXPECT_THROW(parse_double_list("0,x"), ConfigError);
    EXPECT_EQ(split_list("a;b;;c", ';'), (std::vector<std::string>{"a", "b", "c"}));
}
