#include "txpert/graphs.hpp"

#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <map>

using namespace txpert;
using namespace testutil;

TEST(KnowledgeGraph, RejectsSelfLoopsAndDuplicates) {
    const std::vector<std::string> nodes{"a", "b"};
    EXPECT_THROW(KnowledgeGraph("g", nodes, {{0, 0, 1.0}}), std::invalid_argument);
    EXPECT_THROW(KnowledgeGraph("g", nodes, {{0, 1, 1.0}, {0, 1, 2.0}}), std::invalid_argument);
    EXPECT_THROW(KnowledgeGraph("g", nodes, {{0, 1, std::nan("")}}), std::invalid_argument);
    EXPECT_THROW(KnowledgeGraph("g", nodes, {{0, 2, 1.0}}), std::invalid_argument);
    EXPECT_NO_THROW(KnowledgeGraph("g", nodes, {{0, 1, 1.0}, {1, 0, 1.0}}));
}

TEST(KnowledgeGraph, ReindexPreservesEdgesByName) {
    const KnowledgeGraph g("g", {"x", "y"}, {{0, 1, 0.5}});
    const KnowledgeGraph r = g.reindexed({"q", "y", "x"});
    ASSERT_EQ(r.num_edges(), 1);
    EXPECT_EQ(r.nodes()[static_cast<std::size_t>(r.edges()[0].source)], "x");
    EXPECT_EQ(r.nodes()[static_cast<std::size_t>(r.edges()[0].target)], "y");
    EXPECT_THROW(g.reindexed({"x"}), std::invalid_argument);
}

TEST(EdgeList, DuplicatesKeepMaximumWeight) {
    const auto dir = fresh_dir("edges");
    write_file(dir / "g.tsv", "source\ttarget\tweight\nA\tB\t0.5\nB\tC\t1\nA\tB\t0.9\nA\tB\t0.2\n");
    const KnowledgeGraph g = load_edge_list(dir / "g.tsv");
    EXPECT_EQ(g.name(), "g");
    ASSERT_EQ(g.num_edges(), 2);
    EXPECT_DOUBLE_EQ(g.edges()[0].weight, 0.9);
    EXPECT_EQ(g.nodes(), (std::vector<std::string>{"A", "B", "C"}));
}

TEST(EdgeList, ErrorsNameTheLine) {
    const auto dir = fresh_dir("edges");
    write_file(dir / "bad.tsv", "source\ttarget\tweight\nA\tB\t1\nA\tB\n");
    try {
        load_edge_list(dir / "bad.tsv");
        FAIL() << "expected an error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
    write_file(dir / "loop.tsv", "source\ttarget\tweight\nA\tA\t1\n");
    EXPECT_THROW(load_edge_list(dir / "loop.tsv"), std::runtime_error);
    write_file(dir / "header.tsv", "a\tb\tc\n");
    EXPECT_THROW(load_edge_list(dir / "header.tsv"), std::runtime_error);
}

TEST(EdgeList, SaveLoadRoundTrip) {
    Rng rng(3);
    const KnowledgeGraph g = random_graph(gene_names(12), 30, rng, "rt");
    const auto dir = fresh_dir("edges");
    save_edge_list(g, dir / "rt.tsv");
    const KnowledgeGraph back = load_edge_list(dir / "rt.tsv");
    EXPECT_EQ(back.num_edges(), g.num_edges());
    for (const Edge& e : g.edges()) {
        const Index s = back.index_of(g.nodes()[static_cast<std::size_t>(e.source)]);
        const Index t = back.index_of(g.nodes()[static_cast<std::size_t>(e.target)]);
        ASSERT_TRUE(back.has_edge(s, t));
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "rt.tsv.json"));
}

TEST(Symmetrize, AddsReverseKeepingLargerWeight) {
    const KnowledgeGraph g("g", {"a", "b", "c"}, {{0, 1, 0.3}, {1, 0, 0.7}, {1, 2, 0.4}});
    const KnowledgeGraph s = symmetrize(g);
    EXPECT_EQ(s.num_edges(), 4);
    const Matrix a = s.adjacency();
    EXPECT_DOUBLE_EQ(a(0, 1), 0.7);
    EXPECT_DOUBLE_EQ(a(1, 0), 0.7);
    EXPECT_DOUBLE_EQ(a(2, 1), 0.4);
    EXPECT_TRUE(a.isApprox(a.transpose()));
}

TEST(EmbeddingGraph, MatchesNaiveTopFraction) {
    Rng rng(11);
    const Index n = 25;
    const auto genes = gene_names(n);
    Matrix emb(n, 6);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < 6; ++j) emb(i, j) = rng.normal();
    }
    EmbeddingGraphOptions opt;
    opt.top_fraction = 0.1;
    const KnowledgeGraph g = build_from_embeddings(genes, emb, opt);

    struct P {
        double w;
        Index i, j;
    };
    std::vector<P> pairs;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            double dot = 0, ni = 0, nj = 0;
            for (Index k = 0; k < 6; ++k) {
                dot += emb(i, k) * emb(j, k);
                ni += emb(i, k) * emb(i, k);
                nj += emb(j, k) * emb(j, k);
            }
            pairs.push_back({std::abs(dot) / std::sqrt(ni * nj), i, j});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const P& a, const P& b) { return a.w > b.w; });
    const auto keep = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(pairs.size())));
    ASSERT_EQ(static_cast<std::size_t>(g.num_edges()), keep);
    for (std::size_t k = 0; k < keep; ++k) {
        const auto& p = pairs[k];
        const bool fwd = genes[static_cast<std::size_t>(p.i)] < genes[static_cast<std::size_t>(p.j)];
        const Index s = fwd ? p.i : p.j;
        const Index t = fwd ? p.j : p.i;
        ASSERT_TRUE(g.has_edge(s, t));
        EXPECT_NEAR(g.adjacency()(s, t), p.w, 1e-12);
    }
}

TEST(EmbeddingGraph, MaxInCapsAfterSymmetrize) {
    Rng rng(12);
    const Index n = 20;
    Matrix emb(n, 4);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < 4; ++j) emb(i, j) = rng.normal();
    }
    EmbeddingGraphOptions opt;
    opt.top_fraction = 0.3;
    opt.symmetrize = true;
    opt.max_in = 3;
    const KnowledgeGraph g = build_from_embeddings(gene_names(n), emb, opt);
    for (Index d : g.in_degrees()) EXPECT_LE(d, 3);
    EXPECT_GT(g.num_edges(), 0);
}

TEST(EmbeddingGraph, RejectsBadInput) {
    Matrix emb = Matrix::Ones(3, 2);
    emb.row(1).setZero();
    EXPECT_THROW(build_from_embeddings(gene_names(3), emb), std::invalid_argument);
    EXPECT_THROW(build_from_embeddings(gene_names(2), Matrix::Ones(3, 2)), std::invalid_argument);
}

TEST(Rewire, MovesExactlyTheRequestedShare) {
    Rng grng(5);
    const KnowledgeGraph g = random_graph(gene_names(40), 120, grng);
    for (RewireMode mode : {RewireMode::Source, RewireMode::Target, RewireMode::Both}) {
        for (double f : {0.0, 0.25, 0.5, 1.0}) {
            Rng rng(9);
            const KnowledgeGraph r = rewire(g, f, mode, rng);
            EXPECT_EQ(r.num_edges(), g.num_edges());
            Index changed = 0;
            for (std::size_t e = 0; e < g.edges().size(); ++e) {
                const Edge& a = g.edges()[e];
                const Edge& b = r.edges()[e];
                if (a.source != b.source || a.target != b.target) ++changed;
                if (mode == RewireMode::Source) EXPECT_EQ(a.target, b.target);
                if (mode == RewireMode::Target) EXPECT_EQ(a.source, b.source);
                EXPECT_EQ(a.weight, b.weight);
            }
            EXPECT_EQ(changed, std::llround(f * 120.0)) << to_string(mode) << " " << f;
        }
    }
}

TEST(Rewire, IsSeedDeterministic) {
    Rng grng(6);
    const KnowledgeGraph g = random_graph(gene_names(30), 60, grng);
    Rng a(1), b(1);
    EXPECT_TRUE(rewire(g, 0.5, RewireMode::Both, a).adjacency() == rewire(g, 0.5, RewireMode::Both, b).adjacency());
    Rng bad(1);
    EXPECT_THROW(rewire(g, 1.5, RewireMode::Both, bad), std::invalid_argument);
}

TEST(Downsample, KeepsRoundedSubset) {
    Rng grng(7);
    const KnowledgeGraph g = random_graph(gene_names(30), 81, grng);
    Rng rng(2);
    const KnowledgeGraph d = downsample(g, 0.4, rng);
    EXPECT_EQ(d.num_edges(), std::llround(0.4 * 81));
    for (const Edge& e : d.edges()) EXPECT_TRUE(g.has_edge(e.source, e.target));
    Rng rng2(2);
    EXPECT_EQ(downsample(g, 1.0, rng2).num_edges(), 81);
}

TEST(Expander, IsSimpleRegularAndReproducible) {
    Rng rng(4);
    const ExpanderGraph x = generate_expander(30, 6, rng);
    std::vector<Index> deg(30, 0);
    std::set<std::pair<Index, Index>> seen;
    for (auto [a, b] : x.edges) {
        EXPECT_LT(a, b);
        EXPECT_TRUE(seen.insert({a, b}).second);
        ++deg[static_cast<std::size_t>(a)];
        ++deg[static_cast<std::size_t>(b)];
    }
    for (Index d : deg) EXPECT_EQ(d, 6);
    Rng again(4);
    EXPECT_EQ(generate_expander(30, 6, again).edges, x.edges);
    EXPECT_TRUE(is_connected(x.to_directed(gene_names(30))));
    Rng bad(0);
    EXPECT_THROW(generate_expander(5, 3, bad), std::invalid_argument);
}

TEST(Union, ProvenanceReconstructsSources) {
    Rng rng(21);
    const auto nodes = gene_names(20);
    std::vector<KnowledgeGraph> graphs;
    for (int k = 0; k < 3; ++k) {
        const auto sub = std::vector<std::string>(nodes.begin() + k * 3, nodes.begin() + 14 + k * 3);
        graphs.push_back(random_graph(sub, 40, rng, "s" + std::to_string(k)));
    }
    Rng xrng(1);
    const UnionGraph u0 = build_union(graphs);
    const ExpanderGraph x = generate_expander(static_cast<Index>(u0.nodes().size()), 4, xrng);
    const UnionGraph u = build_union(graphs, x);
    EXPECT_EQ(u.num_sources(), 4);
    for (int k = 0; k < 3; ++k) {
        const KnowledgeGraph back = u.filter_by_source(k);
        const KnowledgeGraph want = graphs[static_cast<std::size_t>(k)].reindexed(u.nodes());
        EXPECT_TRUE(back.adjacency() == want.adjacency()) << k;
    }
    EXPECT_EQ(u.filter_by_source(3).num_edges(), static_cast<Index>(2 * x.edges.size()));
    const Matrix f = u.edge_features();
    for (Index e = 0; e < f.rows(); ++e) EXPECT_GE(f.row(e).sum(), 1.0);
}

TEST(Supra, BlocksAreLayersAndIdentityCouplings) {
    Rng rng(22);
    const auto nodes = gene_names(10);
    const KnowledgeGraph a = random_graph(nodes, 20, rng, "a");
    const KnowledgeGraph b = random_graph(nodes, 15, rng, "b");
    const SupraGraph s = build_supra({a, b});
    const Matrix m = s.adjacency();
    ASSERT_EQ(m.rows(), 20);
    EXPECT_TRUE(m.block(0, 0, 10, 10) == a.adjacency());
    EXPECT_TRUE(m.block(10, 10, 10, 10) == b.adjacency());
    EXPECT_TRUE(m.block(0, 10, 10, 10) == Matrix::Identity(10, 10));
    EXPECT_TRUE(m.block(10, 0, 10, 10) == Matrix::Identity(10, 10));
    EXPECT_EQ(s.as_graph(false).num_edges(), 35);
}

TEST(Supra, PartialOverlapCouplesSharedEntitiesOnly) {
    const KnowledgeGraph a("a", {"x", "y"}, {{0, 1, 1.0}});
    const KnowledgeGraph b("b", {"y", "z"}, {{0, 1, 1.0}});
    const SupraGraph s = build_supra({a, b});
    EXPECT_EQ(s.entities, (std::vector<std::string>{"x", "y", "z"}));
    ASSERT_EQ(s.inter_edges.size(), 2u);
    EXPECT_EQ(s.num_supra_nodes(), 4);
}

TEST(SmallWorld, SymmetricWithLatticeDegree) {
    Rng rng(2);
    const KnowledgeGraph g = small_world(gene_names(50), 4, 0.0, rng);
    const Matrix a = g.adjacency();
    EXPECT_TRUE(a == a.transpose());
    for (Index d : g.in_degrees()) EXPECT_EQ(d, 4);
    Rng rng2(2);
    const KnowledgeGraph w = small_world(gene_names(50), 4, 0.2, rng2);
    EXPECT_EQ(w.num_edges(), 200);
    EXPECT_TRUE(w.adjacency() == w.adjacency().transpose());
}

TEST(HopDistances, Path) {
    const KnowledgeGraph g("p", {"a", "b", "c", "d"}, {{0, 1, 1.0}, {2, 1, 1.0}});
    EXPECT_EQ(hop_distances(g, 0), (std::vector<Index>{0, 1, 2, -1}));
    EXPECT_FALSE(is_connected(g));
}
