#pragma once

#include "txpert/graphs.hpp"
#include "txpert/tape.hpp"

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace txpert {

enum class EncoderKind { GATv2, Hybrid, Exphormer, ExphormerMG, MultiLayer };
enum class HeadAggregation { Concat, Avg };

EncoderKind parse_encoder_kind(const std::string& s);
std::string to_string(EncoderKind k);
HeadAggregation parse_head_aggregation(const std::string& s);
std::string to_string(HeadAggregation a);

struct EncoderConfig {
    EncoderKind kind = EncoderKind::GATv2;
    Index layers = 4;
    Index input_dim = 64;    // width of the node embedding table
    Index hidden_dim = 64;   // width of Z
    Index heads = 4;
    HeadAggregation aggregation = HeadAggregation::Avg;
    double leaky_slope = 0.2;
    Index expander_degree = 6;
    /// Exphormer kinds: append the edge weight as an extra edge feature.
    bool edge_weight_features = false;

    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
    /// Output width of one attention head in a GATv2 layer.
    Index head_dim() const;
};

/// Binds Parameters to tape variables, once per tape.
class ParamBinder {
public:
    explicit ParamBinder(GradTape& tape) : tape_(tape) {}
    Var operator()(Parameter& p);
    GradTape& tape() { return tape_; }

private:
    GradTape& tape_;
    std::unordered_map<const Parameter*, Var> bound_;
};

/// Edge lists in message-passing form: messages flow src[e] -> dst[e]. Nodes
/// without incoming edges get a self-loop so every softmax group is non-empty.
struct MessageGraph {
    Index num_nodes = 0;
    std::vector<Index> src;
    std::vector<Index> dst;
    std::vector<double> weight;
    Index num_edges() const { return static_cast<Index>(src.size()); }

    static MessageGraph from_edges(Index num_nodes, const std::vector<Edge>& edges);
    static MessageGraph from_graph(const KnowledgeGraph& g) { return from_edges(g.num_nodes(), g.edges()); }
};

// ---------------------------------------------------------------------------
// GATv2 layer
//   a_uv = theta^T LeakyReLU([W h_u || W h_v]),  softmax over incoming edges of v,
//   h_v  = LeakyReLU(AGG_q sum_u a_uv W_q h_u).

struct GatHead {
    Parameter* weight = nullptr;     // d_in x d_head
    Parameter* attention = nullptr;  // 2 d_head x 1
};

struct GatLayer {
    std::vector<GatHead> heads;
};

GatLayer make_gat_layer(ParameterStore& store, const std::string& prefix, Index d_in, Index d_head,
                        Index heads, Rng& rng);

/// attention_out, when given, receives one (E x 1) coefficient column per head.
Var gatv2_forward(ParamBinder& bind, Var h_in, const MessageGraph& graph, const GatLayer& layer,
                  HeadAggregation aggregation, double slope,
                  std::vector<Matrix>* attention_out = nullptr);

// ---------------------------------------------------------------------------
// Exphormer layer
//   out_i = h_i + sum_j sum_{u in N(i)} softmax_u((E_u^j . K_u^j)^T Q_i^j + B_u^j) V_u^j
//   then out + FFN(out), FFN with one hidden layer of width 2d.

struct ExphormerHead {
    Parameter* query = nullptr;  // d x d_head
    Parameter* key = nullptr;    // d x d_head
    Parameter* value = nullptr;  // d x d
    Parameter* edge = nullptr;   // d_edge x d_head
    Parameter* bias = nullptr;   // d_edge x 1
};

struct ExphormerLayer {
    std::vector<ExphormerHead> heads;
    Parameter* ffn_w1 = nullptr;
    Parameter* ffn_b1 = nullptr;
    Parameter* ffn_w2 = nullptr;
    Parameter* ffn_b2 = nullptr;
};

ExphormerLayer make_exphormer_layer(ParameterStore& store, const std::string& prefix, Index d,
                                    Index d_head, Index d_edge, Index heads, Rng& rng);

/// edge_features is (E x d_edge), one row per pattern edge.
Var exphormer_forward(ParamBinder& bind, Var h_in, const MessageGraph& pattern, Var edge_features,
                      const ExphormerLayer& layer, double slope,
                      std::vector<Matrix>* attention_out = nullptr);

// ---------------------------------------------------------------------------
// Hybrid channel combination
//   s_F(v) = vartheta^T LeakyReLU([W h0_v || W hF_v]), softmax over channels,
//   h_v = sum_F s_F(v) W hF_v,  out = MLP(h_v).

struct HybridHead {
    Parameter* weight = nullptr;  // d x d
    Parameter* score = nullptr;   // 2d x 1
    Parameter* mlp_w1 = nullptr;
    Parameter* mlp_b1 = nullptr;
    Parameter* mlp_w2 = nullptr;
    Parameter* mlp_b2 = nullptr;
};

HybridHead make_hybrid_head(ParameterStore& store, const std::string& prefix, Index d, Rng& rng);

/// channel_weights_out, when given, receives an (N x K) matrix of channel weights.
Var hybrid_combine(ParamBinder& bind, Var h0, std::span<const Var> channels, const HybridHead& head,
                   double slope, Matrix* channel_weights_out = nullptr);

// ---------------------------------------------------------------------------

/// Mean of the supra-node rows belonging to each entity.
Var supra_readout(Var supra_h, const SupraGraph& supra);

/// Learnable H^0 with one Kaiming-initialized row per node.
struct NodeEmbeddingTable {
    std::vector<std::string> nodes;
    std::unordered_map<std::string, Index> row;
    Parameter* values = nullptr;

    std::optional<Index> find(const std::string& node) const;
};

/// Graph-based perturbation encoder producing Z (one row per node of its
/// universe) from a learnable embedding table and L message-passing layers.
class PerturbationEncoder {
public:
    /// Registers all parameters in `store` under "encoder.". Graphs are
    /// channels (Hybrid), sources (Exphormer-MG) or layers (MultiLayer); the
    /// single-graph kinds use the union of all given edges.
    PerturbationEncoder(EncoderConfig config, std::vector<KnowledgeGraph> graphs,
                        ParameterStore& store, Rng& rng);

    const EncoderConfig& config() const { return config_; }
    /// Node ids, in Z row order.
    const std::vector<std::string>& universe() const { return universe_; }
    std::optional<Index> row_of(const std::string& gene) const;
    /// Throws std::out_of_range naming the gene if it is absent from every graph.
    Index require_row(const std::string& gene) const;

    Var encode(ParamBinder& bind) const;
    Matrix encode_values() const;

    const NodeEmbeddingTable& table() const { return table_; }
    const std::vector<KnowledgeGraph>& graphs() const { return graphs_; }
    const std::optional<SupraGraph>& supra() const { return supra_; }
    const std::optional<ExpanderGraph>& expander() const { return expander_; }

private:
    EncoderConfig config_;
    std::vector<KnowledgeGraph> graphs_;
    std::vector<std::string> universe_;
    std::unordered_map<std::string, Index> universe_row_;
    NodeEmbeddingTable table_;

    std::vector<MessageGraph> message_graphs_;  // one per channel / one for single-graph kinds
    std::vector<std::vector<GatLayer>> gat_layers_;  // [channel][layer]
    std::optional<HybridHead> hybrid_;
    Parameter* input_projection_ = nullptr;
    std::vector<ExphormerLayer> exphormer_layers_;
    Matrix edge_features_;                  // fixed part of the Exphormer edge features
    std::vector<Index> edge_type_;          // plain Exphormer: 0 graph edge, 1 expander edge
    Parameter* edge_type_embedding_ = nullptr;
    std::optional<ExpanderGraph> expander_;
    std::optional<SupraGraph> supra_;
};

enum class BasalKind { Identity, Mlp };
BasalKind parse_basal_kind(const std::string& s);
std::string to_string(BasalKind k);

/// Stack of linear layers with LeakyReLU between them (none after the last).
struct Mlp {
    std::vector<Parameter*> weights;
    std::vector<Parameter*> biases;
    double slope = 0.01;

    static Mlp make(ParameterStore& store, const std::string& prefix, std::span<const Index> widths,
                    double slope, Rng& rng);
    Var forward(ParamBinder& bind, Var x) const;
    Index input_dim() const { return weights.front()->value.rows(); }
    Index output_dim() const { return weights.back()->value.cols(); }
};

/// s = x (identity) or s = MLP(x).
class BasalEncoder {
public:
    BasalEncoder(BasalKind kind, Index input_dim, std::vector<Index> hidden, Index output_dim,
                 double slope, ParameterStore& store, Rng& rng);

    BasalKind kind() const { return kind_; }
    Index input_dim() const { return input_dim_; }
    Index output_dim() const { return kind_ == BasalKind::Identity ? input_dim_ : mlp_->output_dim(); }
    Var encode(ParamBinder& bind, Var x) const;

private:
    BasalKind kind_;
    Index input_dim_;
    std::optional<Mlp> mlp_;
};

}  // namespace txpert
