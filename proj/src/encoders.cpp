#include "txpert/encoders.hpp"

#include <algorithm>
#include <stdexcept>

namespace txpert {

EncoderKind parse_encoder_kind(const std::string& s) {
    if (s == "gatv2") return EncoderKind::GATv2;
    if (s == "hybrid") return EncoderKind::Hybrid;
    if (s == "exphormer") return EncoderKind::Exphormer;
    if (s == "exphormer-mg") return EncoderKind::ExphormerMG;
    if (s == "multilayer") return EncoderKind::MultiLayer;
    throw std::invalid_argument("unknown encoder '" + s +
                                "' (expected gatv2, hybrid, exphormer, exphormer-mg or multilayer)");
}

std::string to_string(EncoderKind k) {
    switch (k) {
        case EncoderKind::GATv2: return "gatv2";
        case EncoderKind::Hybrid: return "hybrid";
        case EncoderKind::Exphormer: return "exphormer";
        case EncoderKind::ExphormerMG: return "exphormer-mg";
        case EncoderKind::MultiLayer: return "multilayer";
    }
    return "?";
}

HeadAggregation parse_head_aggregation(const std::string& s) {
    if (s == "concat") return HeadAggregation::Concat;
    if (s == "avg") return HeadAggregation::Avg;
    throw std::invalid_argument("unknown head aggregation '" + s + "' (expected concat or avg)");
}

std::string to_string(HeadAggregation a) { return a == HeadAggregation::Concat ? "concat" : "avg"; }

void EncoderConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("encoder: layers must be >= 1");
    if (heads < 1) throw std::invalid_argument("encoder: heads must be >= 1");
    if (input_dim < 1 || hidden_dim < 1) throw std::invalid_argument("encoder: dims must be >= 1");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
        throw std::invalid_argument("encoder: leaky slope must lie in (0, 1)");
    }
    const bool split_heads = aggregation == HeadAggregation::Concat ||
                             kind == EncoderKind::Exphormer || kind == EncoderKind::ExphormerMG;
    if (split_heads && hidden_dim % heads != 0) {
        throw std::invalid_argument("encoder: hidden dim " + std::to_string(hidden_dim) +
                                    " is not divisible by " + std::to_string(heads) + " heads");
    }
    if (kind == EncoderKind::Hybrid && input_dim != hidden_dim) {
        throw std::invalid_argument("encoder: hybrid requires input dim == hidden dim");
    }
    if (expander_degree < 1) throw std::invalid_argument("encoder: expander degree must be >= 1");
}

Index EncoderConfig::head_dim() const {
    return aggregation == HeadAggregation::Concat ? hidden_dim / heads : hidden_dim;
}

Var ParamBinder::operator()(Parameter& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return it->second;
    Var v = tape_.parameter(p);
    bound_.emplace(&p, v);
    return v;
}

MessageGraph MessageGraph::from_edges(Index num_nodes, const std::vector<Edge>& edges) {
    MessageGraph g;
    g.num_nodes = num_nodes;
    std::vector<bool> has_in(static_cast<std::size_t>(num_nodes), false);
    for (const Edge& e : edges) {
        if (e.source < 0 || e.source >= num_nodes || e.target < 0 || e.target >= num_nodes) {
            throw std::out_of_range("message graph: edge endpoint out of range");
        }
        g.src.push_back(e.source);
        g.dst.push_back(e.target);
        g.weight.push_back(e.weight);
        has_in[static_cast<std::size_t>(e.target)] = true;
    }
    for (Index v = 0; v < num_nodes; ++v) {
        if (!has_in[static_cast<std::size_t>(v)]) {
            g.src.push_back(v);
            g.dst.push_back(v);
            g.weight.push_back(1.0);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------

GatLayer make_gat_layer(ParameterStore& store, const std::string& prefix, Index d_in, Index d_head,
                        Index heads, Rng& rng) {
    GatLayer layer;
    for (Index q = 0; q < heads; ++q) {
        const std::string p = prefix + ".h" + std::to_string(q);
        GatHead h;
        h.weight = &store.add(p + ".W", kaiming_init(d_in, d_head, d_in, rng));
        h.attention = &store.add(p + ".theta", kaiming_init(2 * d_head, 1, 2 * d_head, rng));
        layer.heads.push_back(h);
    }
    return layer;
}

Var gatv2_forward(ParamBinder& bind, Var h_in, const MessageGraph& graph, const GatLayer& layer,
                  HeadAggregation aggregation, double slope, std::vector<Matrix>* attention_out) {
    if (h_in.rows() != graph.num_nodes) {
        throw std::invalid_argument("gatv2: feature rows " + std::to_string(h_in.rows()) +
                                    " != graph nodes " + std::to_string(graph.num_nodes));
    }
    if (attention_out) attention_out->clear();
    std::vector<Var> outputs;
    for (const GatHead& head : layer.heads) {
        Var w = bind(*head.weight);
        if (w.rows() != h_in.cols()) throw std::invalid_argument("gatv2: weight/input dim mismatch");
        const Index dh = w.cols();
        Var theta = bind(*head.attention);
        Var wh = ad::matmul(h_in, w);
        // theta^T s([a || b]) splits into theta_1^T s(a) + theta_2^T s(b) because s is elementwise.
        Var act = ad::leaky_relu(wh, slope);
        Var s_src = ad::matmul(act, ad::slice_rows(theta, 0, dh));
        Var s_dst = ad::matmul(act, ad::slice_rows(theta, dh, dh));
        Var score = ad::add(ad::gather_rows(s_src, graph.src), ad::gather_rows(s_dst, graph.dst));
        Var alpha = ad::segment_softmax(score, graph.dst, graph.num_nodes);
        if (attention_out) attention_out->push_back(alpha.value());
        Var msg = ad::scale_rows(ad::gather_rows(wh, graph.src), alpha);
        outputs.push_back(ad::scatter_add_rows(msg, graph.dst, graph.num_nodes));
    }
    Var agg = outputs.size() == 1 ? outputs.front()
              : aggregation == HeadAggregation::Concat ? ad::concat_cols(outputs)
                                                        : ad::mean(outputs);
    return ad::leaky_relu(agg, slope);
}

// ---------------------------------------------------------------------------

ExphormerLayer make_exphormer_layer(ParameterStore& store, const std::string& prefix, Index d,
                                    Index d_head, Index d_edge, Index heads, Rng& rng) {
    ExphormerLayer layer;
    for (Index j = 0; j < heads; ++j) {
        const std::string p = prefix + ".h" + std::to_string(j);
        ExphormerHead h;
        h.query = &store.add(p + ".WQ", kaiming_init(d, d_head, d, rng));
        h.key = &store.add(p + ".WK", kaiming_init(d, d_head, d, rng));
        // Scaled down so that the summed heads start near the residual path.
        Matrix v = kaiming_init(d, d, d, rng) / static_cast<double>(heads);
        h.value = &store.add(p + ".WV", std::move(v));
        h.edge = &store.add(p + ".WE", kaiming_init(d_edge, d_head, d_edge, rng));
        h.bias = &store.add(p + ".WB", kaiming_init(d_edge, 1, d_edge, rng));
        layer.heads.push_back(h);
    }
    layer.ffn_w1 = &store.add(prefix + ".ffn.W1", kaiming_init(d, 2 * d, d, rng));
    layer.ffn_b1 = &store.add(prefix + ".ffn.b1", Matrix::Zero(1, 2 * d));
    layer.ffn_w2 = &store.add(prefix + ".ffn.W2", kaiming_init(2 * d, d, 2 * d, rng));
    layer.ffn_b2 = &store.add(prefix + ".ffn.b2", Matrix::Zero(1, d));
    return layer;
}

Var exphormer_forward(ParamBinder& bind, Var h_in, const MessageGraph& pattern, Var edge_features,
                      const ExphormerLayer& layer, double slope, std::vector<Matrix>* attention_out) {
    if (h_in.rows() != pattern.num_nodes) {
        throw std::invalid_argument("exphormer: feature rows do not match pattern nodes");
    }
    if (edge_features.rows() != pattern.num_edges()) {
        throw std::invalid_argument("exphormer: " + std::to_string(edge_features.rows()) +
                                    " edge feature rows for " + std::to_string(pattern.num_edges()) +
                                    " pattern edges");
    }
    if (attention_out) attention_out->clear();
    std::vector<Var> parts{h_in};
    for (const ExphormerHead& head : layer.heads) {
        Var we = bind(*head.edge);
        if (we.rows() != edge_features.cols()) {
            throw std::invalid_argument("exphormer: edge feature dim " +
                                        std::to_string(edge_features.cols()) + " != expected " +
                                        std::to_string(we.rows()));
        }
        Var q = ad::matmul(h_in, bind(*head.query));
        Var k = ad::matmul(h_in, bind(*head.key));
        Var v = ad::matmul(h_in, bind(*head.value));
        Var e = ad::matmul(edge_features, we);
        Var b = ad::matmul(edge_features, bind(*head.bias));
        Var ek = ad::hadamard(e, ad::gather_rows(k, pattern.src));
        Var score = ad::add(ad::row_dot(ek, ad::gather_rows(q, pattern.dst)), b);
        Var alpha = ad::segment_softmax(score, pattern.dst, pattern.num_nodes);
        if (attention_out) attention_out->push_back(alpha.value());
        Var msg = ad::scale_rows(ad::gather_rows(v, pattern.src), alpha);
        parts.push_back(ad::scatter_add_rows(msg, pattern.dst, pattern.num_nodes));
    }
    Var attn = ad::sum(parts);
    Var b1 = bind(*layer.ffn_b1);
    Var b2 = bind(*layer.ffn_b2);
    Var hidden = ad::leaky_relu(ad::linear(attn, bind(*layer.ffn_w1), &b1), slope);
    return ad::add(attn, ad::linear(hidden, bind(*layer.ffn_w2), &b2));
}

// ---------------------------------------------------------------------------

HybridHead make_hybrid_head(ParameterStore& store, const std::string& prefix, Index d, Rng& rng) {
    HybridHead h;
    h.weight = &store.add(prefix + ".W", kaiming_init(d, d, d, rng));
    h.score = &store.add(prefix + ".vartheta", kaiming_init(2 * d, 1, 2 * d, rng));
    h.mlp_w1 = &store.add(prefix + ".mlp.W1", kaiming_init(d, d, d, rng));
    h.mlp_b1 = &store.add(prefix + ".mlp.b1", Matrix::Zero(1, d));
    h.mlp_w2 = &store.add(prefix + ".mlp.W2", kaiming_init(d, d, d, rng));
    h.mlp_b2 = &store.add(prefix + ".mlp.b2", Matrix::Zero(1, d));
    return h;
}

Var hybrid_combine(ParamBinder& bind, Var h0, std::span<const Var> channels, const HybridHead& head,
                   double slope, Matrix* channel_weights_out) {
    if (channels.empty()) throw std::invalid_argument("hybrid: need at least one channel");
    const Index n = h0.rows();
    Var w = bind(*head.weight);
    const Index d = w.cols();
    for (const Var& c : channels) {
        if (c.rows() != n || c.cols() != w.rows()) {
            throw std::invalid_argument("hybrid: channel output is " + std::to_string(c.rows()) + "x" +
                                        std::to_string(c.cols()) + ", expected " + std::to_string(n) +
                                        "x" + std::to_string(w.rows()));
        }
    }
    Var theta = bind(*head.score);
    Var base = ad::matmul(ad::leaky_relu(ad::matmul(h0, w), slope), ad::slice_rows(theta, 0, d));
    Var theta_f = ad::slice_rows(theta, d, d);

    std::vector<Var> scores;
    std::vector<Var> projected;
    for (const Var& c : channels) {
        Var wc = ad::matmul(c, w);
        projected.push_back(wc);
        scores.push_back(ad::add(base, ad::matmul(ad::leaky_relu(wc, slope), theta_f)));
    }
    const auto k = static_cast<Index>(channels.size());
    std::vector<Index> node(static_cast<std::size_t>(k * n));
    for (Index i = 0; i < k * n; ++i) node[static_cast<std::size_t>(i)] = i % n;
    Var alpha = ad::segment_softmax(ad::concat_rows(scores), node, n);
    if (channel_weights_out) {
        channel_weights_out->resize(n, k);
        for (Index f = 0; f < k; ++f) {
            channel_weights_out->col(f) = alpha.value().block(f * n, 0, n, 1);
        }
    }
    Var mixed = ad::scatter_add_rows(ad::scale_rows(ad::concat_rows(projected), alpha), node, n);
    Var b1 = bind(*head.mlp_b1);
    Var b2 = bind(*head.mlp_b2);
    Var hidden = ad::leaky_relu(ad::linear(mixed, bind(*head.mlp_w1), &b1), slope);
    return ad::linear(hidden, bind(*head.mlp_w2), &b2);
}

// ---------------------------------------------------------------------------

Var supra_readout(Var supra_h, const SupraGraph& supra) {
    if (supra_h.rows() != supra.num_supra_nodes()) {
        throw std::invalid_argument("supra readout: row count differs from supra node count");
    }
    const auto n = static_cast<Index>(supra.entities.size());
    Matrix inv = Matrix::Zero(n, 1);
    for (Index e : supra.entity_of) inv(e, 0) += 1.0;
    Matrix w(supra.num_supra_nodes(), 1);
    for (Index s = 0; s < supra.num_supra_nodes(); ++s) {
        w(s, 0) = 1.0 / inv(supra.entity_of[static_cast<std::size_t>(s)], 0);
    }
    GradTape& tape = *supra_h.tape;
    Var weights = tape.constant(std::move(w));
    return ad::scatter_add_rows(ad::scale_rows(supra_h, weights), supra.entity_of, n);
}

std::optional<Index> NodeEmbeddingTable::find(const std::string& node) const {
    auto it = row.find(node);
    if (it == row.end()) return std::nullopt;
    return it->second;
}

namespace {

NodeEmbeddingTable make_table(std::vector<std::string> nodes, Index dim, ParameterStore& store,
                              const std::string& name, Rng& rng) {
    NodeEmbeddingTable t;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!t.row.emplace(nodes[i], static_cast<Index>(i)).second) {
            throw std::invalid_argument("node embedding table: duplicate node '" + nodes[i] + "'");
        }
    }
    t.values = &store.add(name, kaiming_init(static_cast<Index>(nodes.size()), dim, dim, rng));
    t.nodes = std::move(nodes);
    return t;
}

}  // namespace

PerturbationEncoder::PerturbationEncoder(EncoderConfig config, std::vector<KnowledgeGraph> graphs,
                                         ParameterStore& store, Rng& rng)
    : config_(config), graphs_(std::move(graphs)) {
    config_.validate();
    if (graphs_.empty()) throw std::invalid_argument("encoder: at least one graph is required");
    const Index d = config_.hidden_dim;
    const Index d0 = config_.input_dim;

    // Entity universe and, for the kinds that need it, one combined message graph.
    const bool needs_expander =
        config_.kind == EncoderKind::Exphormer || config_.kind == EncoderKind::ExphormerMG;
    UnionGraph merged = build_union(graphs_);
    universe_ = merged.nodes();
    for (std::size_t i = 0; i < universe_.size(); ++i) {
        universe_row_.emplace(universe_[i], static_cast<Index>(i));
    }
    const auto n = static_cast<Index>(universe_.size());

    if (needs_expander) {
        Rng exp_rng = rng.fork(0x65787061ULL);
        expander_ = generate_expander(n, config_.expander_degree, exp_rng);
    }

    switch (config_.kind) {
        case EncoderKind::GATv2: {
            table_ = make_table(universe_, d0, store, "encoder.table", rng);
            message_graphs_.push_back(MessageGraph::from_edges(n, merged.edges()));
            std::vector<GatLayer> stack;
            for (Index l = 0; l < config_.layers; ++l) {
                stack.push_back(make_gat_layer(store, "encoder.gat.l" + std::to_string(l),
                                               l == 0 ? d0 : d, config_.head_dim(), config_.heads,
                                               rng));
            }
            gat_layers_.push_back(std::move(stack));
            break;
        }
        case EncoderKind::Hybrid: {
            table_ = make_table(universe_, d0, store, "encoder.table", rng);
            for (std::size_t c = 0; c < graphs_.size(); ++c) {
                const KnowledgeGraph g = graphs_[c].reindexed(universe_);
                message_graphs_.push_back(MessageGraph::from_graph(g));
                std::vector<GatLayer> stack;
                for (Index l = 0; l < config_.layers; ++l) {
                    stack.push_back(make_gat_layer(
                        store, "encoder.hybrid.c" + std::to_string(c) + ".l" + std::to_string(l), d,
                        config_.head_dim(), config_.heads, rng));
                }
                gat_layers_.push_back(std::move(stack));
            }
            hybrid_ = make_hybrid_head(store, "encoder.hybrid.head", d, rng);
            break;
        }
        case EncoderKind::Exphormer:
        case EncoderKind::ExphormerMG: {
            table_ = make_table(universe_, d0, store, "encoder.table", rng);
            if (d0 != d) {
                input_projection_ = &store.add("encoder.input_projection", kaiming_init(d0, d, d0, rng));
            }
            std::vector<Edge> edges;
            std::vector<std::uint32_t> provenance;
            Index feature_dim = 0;
            if (config_.kind == EncoderKind::ExphormerMG) {
                UnionGraph u = build_union(graphs_, expander_);
                edges = u.edges();
                provenance = u.provenance();
                feature_dim = u.num_sources();
            } else {
                // Graph edges then expander edges; a pair present in both appears twice.
                edges = merged.edges();
                edge_type_.assign(edges.size(), 0);
                const KnowledgeGraph expander_edges = expander_->to_directed(universe_);
                for (const Edge& e : expander_edges.edges()) {
                    edges.push_back(e);
                    edge_type_.push_back(1);
                }
                feature_dim = 2;
            }
            const auto real_edges = static_cast<Index>(edges.size());
            MessageGraph pattern = MessageGraph::from_edges(n, edges);
            const Index total = pattern.num_edges();
            const Index extra = config_.edge_weight_features ? 1 : 0;
            if (config_.kind == EncoderKind::ExphormerMG) {
                edge_features_ = Matrix::Zero(total, feature_dim + extra);
                for (Index e = 0; e < real_edges; ++e) {
                    for (Index j = 0; j < feature_dim; ++j) {
                        if (provenance[static_cast<std::size_t>(e)] & (1U << j)) edge_features_(e, j) = 1.0;
                    }
                }
                if (extra) {
                    for (Index e = 0; e < total; ++e) {
                        edge_features_(e, feature_dim) = pattern.weight[static_cast<std::size_t>(e)];
                    }
                }
            } else {
                edge_type_.resize(static_cast<std::size_t>(total), 0);  // self-loops count as graph edges
                if (extra) {
                    edge_features_.resize(total, 1);
                    for (Index e = 0; e < total; ++e) {
                        edge_features_(e, 0) = pattern.weight[static_cast<std::size_t>(e)];
                    }
                }
                edge_type_embedding_ = &store.add("encoder.edge_type", Matrix::Identity(2, feature_dim));
            }
            message_graphs_.push_back(std::move(pattern));
            for (Index l = 0; l < config_.layers; ++l) {
                exphormer_layers_.push_back(make_exphormer_layer(
                    store, "encoder.exphormer.l" + std::to_string(l), d, d / config_.heads,
                    feature_dim + extra, config_.heads, rng));
            }
            break;
        }
        case EncoderKind::MultiLayer: {
            supra_ = build_supra(graphs_);
            // Entity order of the supra graph is the first-seen order across layers,
            // which is also the order build_union produces.
            if (supra_->entities != universe_) {
                throw std::logic_error("multilayer: entity order differs from union order");
            }
            table_ = make_table(supra_->supra_node_names(), d0, store, "encoder.table", rng);
            message_graphs_.push_back(
                MessageGraph::from_graph(supra_->as_graph(/*include_inter_layer=*/true)));
            std::vector<GatLayer> stack;
            for (Index l = 0; l < config_.layers; ++l) {
                stack.push_back(make_gat_layer(store, "encoder.multilayer.l" + std::to_string(l),
                                               l == 0 ? d0 : d, config_.head_dim(), config_.heads,
                                               rng));
            }
            gat_layers_.push_back(std::move(stack));
            break;
        }
    }
}

std::optional<Index> PerturbationEncoder::row_of(const std::string& gene) const {
    auto it = universe_row_.find(gene);
    if (it == universe_row_.end()) return std::nullopt;
    return it->second;
}

Index PerturbationEncoder::require_row(const std::string& gene) const {
    if (auto r = row_of(gene)) return *r;
    throw std::out_of_range("perturbation gene '" + gene + "' is absent from every graph");
}

Var PerturbationEncoder::encode(ParamBinder& bind) const {
    const double slope = config_.leaky_slope;
    Var h0 = bind(*table_.values);
    switch (config_.kind) {
        case EncoderKind::GATv2:
        case EncoderKind::MultiLayer: {
            Var h = h0;
            for (const GatLayer& layer : gat_layers_.front()) {
                h = gatv2_forward(bind, h, message_graphs_.front(), layer, config_.aggregation, slope);
            }
            return supra_ ? supra_readout(h, *supra_) : h;
        }
        case EncoderKind::Hybrid: {
            std::vector<Var> channels;
            for (std::size_t c = 0; c < gat_layers_.size(); ++c) {
                Var h = h0;
                for (const GatLayer& layer : gat_layers_[c]) {
                    h = gatv2_forward(bind, h, message_graphs_[c], layer, config_.aggregation, slope);
                }
                channels.push_back(h);
            }
            return hybrid_combine(bind, h0, channels, *hybrid_, slope);
        }
        case EncoderKind::Exphormer:
        case EncoderKind::ExphormerMG: {
            Var h = input_projection_ ? ad::matmul(h0, bind(*input_projection_)) : h0;
            Var features;
            if (config_.kind == EncoderKind::ExphormerMG) {
                features = bind.tape().constant(edge_features_);
            } else {
                Var typed = ad::gather_rows(bind(*edge_type_embedding_), edge_type_);
                if (config_.edge_weight_features) {
                    std::vector<Var> cols{typed, bind.tape().constant(edge_features_)};
                    features = ad::concat_cols(cols);
                } else {
                    features = typed;
                }
            }
            for (const ExphormerLayer& layer : exphormer_layers_) {
                h = exphormer_forward(bind, h, message_graphs_.front(), features, layer, slope);
            }
            return h;
        }
    }
    throw std::logic_error("encoder: unhandled kind");
}

Matrix PerturbationEncoder::encode_values() const {
    GradTape tape;
    ParamBinder bind(tape);
    return encode(bind).value();
}

// ---------------------------------------------------------------------------

BasalKind parse_basal_kind(const std::string& s) {
    if (s == "identity") return BasalKind::Identity;
    if (s == "mlp") return BasalKind::Mlp;
    throw std::invalid_argument("unknown basal encoder '" + s + "' (expected identity or mlp)");
}

std::string to_string(BasalKind k) { return k == BasalKind::Identity ? "identity" : "mlp"; }

Mlp Mlp::make(ParameterStore& store, const std::string& prefix, std::span<const Index> widths,
              double slope, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("mlp: need input and output widths");
    Mlp m;
    m.slope = slope;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const Index in = widths[i];
        const Index out = widths[i + 1];
        if (in < 1 || out < 1) throw std::invalid_argument("mlp: widths must be >= 1");
        const std::string p = prefix + ".l" + std::to_string(i);
        m.weights.push_back(&store.add(p + ".W", kaiming_init(in, out, in, rng)));
        m.biases.push_back(&store.add(p + ".b", Matrix::Zero(1, out)));
    }
    return m;
}

Var Mlp::forward(ParamBinder& bind, Var x) const {
    if (x.cols() != input_dim()) {
        throw std::invalid_argument("mlp: input width " + std::to_string(x.cols()) + " != " +
                                    std::to_string(input_dim()));
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        Var b = bind(*biases[i]);
        x = ad::linear(x, bind(*weights[i]), &b);
        if (i + 1 < weights.size()) x = ad::leaky_relu(x, slope);
    }
    return x;
}

BasalEncoder::BasalEncoder(BasalKind kind, Index input_dim, std::vector<Index> hidden,
                           Index output_dim, double slope, ParameterStore& store, Rng& rng)
    : kind_(kind), input_dim_(input_dim) {
    if (input_dim < 1) throw std::invalid_argument("basal encoder: input dim must be >= 1");
    if (kind == BasalKind::Mlp) {
        std::vector<Index> widths{input_dim};
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(output_dim);
        mlp_ = Mlp::make(store, "basal", widths, slope, rng);
    }
}

Var BasalEncoder::encode(ParamBinder& bind, Var x) const {
    if (x.cols() != input_dim_) {
        throw std::invalid_argument("basal encoder: input width " + std::to_string(x.cols()) +
                                    " != configured " + std::to_string(input_dim_));
    }
    if (kind_ == BasalKind::Identity) return x;
    return mlp_->forward(bind, x);
}

}  // namespace txpert
