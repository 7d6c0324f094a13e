#pragma once

#include "txpert/numerics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace txpert {

struct Edge {
    Index source;
    Index target;
    double weight;
};

/// Directed weighted gene-gene graph over a fixed node list. Immutable once
/// built: no self-loops, no duplicate (source, target) pairs, finite weights.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;
    /// Validates the invariants and throws std::invalid_argument on violation.
    KnowledgeGraph(std::string name, std::vector<std::string> nodes, std::vector<Edge> edges);

    const std::string& name() const { return name_; }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    Index num_nodes() const { return static_cast<Index>(nodes_.size()); }
    Index num_edges() const { return static_cast<Index>(edges_.size()); }

    std::optional<Index> find(const std::string& node) const;
    Index index_of(const std::string& node) const;  // throws std::out_of_range
    bool has_edge(Index source, Index target) const;
    std::vector<Index> in_degrees() const;

    /// Dense A with A(source, target) = weight.
    Matrix adjacency() const;

    KnowledgeGraph renamed(std::string name) const;
    /// Same edges expressed over `universe`, which must contain every node.
    KnowledgeGraph reindexed(const std::vector<std::string>& universe) const;

private:
    std::string name_;
    std::vector<std::string> nodes_;
    std::vector<Edge> edges_;
    std::unordered_map<std::string, Index> index_;
    std::unordered_map<std::uint64_t, std::size_t> edge_lookup_;
};

/// Undirected d-regular simple graph on nodes 0..n-1.
struct ExpanderGraph {
    Index num_nodes = 0;
    Index degree = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<Index, Index>> edges;  // each undirected edge once, first < second

    /// Both directions of every edge over `nodes` (size must equal num_nodes), weight 1.
    KnowledgeGraph to_directed(const std::vector<std::string>& nodes,
                               std::string name = "expander") const;
};

/// Edges merged across k sources; bit j of provenance[e] marks membership in source j.
/// source_weights (E x k, optional) keeps each source's own weight for an edge.
class UnionGraph {
public:
    UnionGraph(std::vector<std::string> nodes, std::vector<Edge> edges,
               std::vector<std::uint32_t> provenance, std::vector<std::string> labels,
               Matrix source_weights = {});

    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<std::uint32_t>& provenance() const { return provenance_; }
    const std::vector<std::string>& labels() const { return labels_; }
    Index num_sources() const { return static_cast<Index>(labels_.size()); }

    /// E x k multi-hot matrix.
    Matrix edge_features() const;
    /// Edges carrying bit j, as a graph over the union node list, with source j's weights.
    KnowledgeGraph filter_by_source(Index j) const;
    /// All union edges as one graph (weights from the first contributing source).
    KnowledgeGraph as_graph(std::string name = "union") const;

private:
    std::vector<std::string> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::uint32_t> provenance_;
    std::vector<std::string> labels_;
    Matrix source_weights_;
};

/// Multilayer network in supra-adjacency form. Supra-node s belongs to layer
/// layer_of[s] and represents entity entity_of[s].
struct SupraGraph {
    std::vector<std::string> entities;       // union of layer node ids
    std::vector<Index> layer_offsets;        // size layers + 1
    std::vector<Index> entity_of;
    std::vector<Index> layer_of;
    std::vector<Edge> intra_edges;           // supra-node indices
    std::vector<Edge> inter_edges;           // identity couplings, both directions
    std::vector<std::string> layer_names;

    Index num_layers() const { return static_cast<Index>(layer_names.size()); }
    Index num_supra_nodes() const { return layer_offsets.back(); }
    /// Dense A_S: diagonal blocks are the layer adjacencies, off-diagonal
    /// blocks couple copies of the same entity with weight 1.
    Matrix adjacency() const;
    /// All edges, optionally without the inter-layer couplings.
    KnowledgeGraph as_graph(bool include_inter_layer = true) const;
    std::vector<std::string> supra_node_names() const;
};

enum class RewireMode { Source, Target, Both };
RewireMode parse_rewire_mode(const std::string& s);
std::string to_string(RewireMode m);

struct EdgeListOptions {
    bool symmetrize = false;
    std::string name;  // defaults to the file stem
};

/// Reads `source<TAB>target<TAB>weight` with a header row. Duplicates keep the
/// maximum weight. Throws std::runtime_error with the offending line number.
KnowledgeGraph load_edge_list(const std::filesystem::path& path, const EdgeListOptions& options = {});
/// Writes the TSV plus `<path>.json` holding name, node count and node list.
void save_edge_list(const KnowledgeGraph& graph, const std::filesystem::path& path);
void save_union(const UnionGraph& graph, const std::filesystem::path& path);

/// Adds the reverse of every edge; existing reverse edges keep the larger weight.
KnowledgeGraph symmetrize(const KnowledgeGraph& graph);

struct EmbeddingGraphOptions {
    double top_fraction = 0.01;
    std::optional<Index> max_in;  // incoming-edge cap per target
    bool symmetrize = false;
    std::string name = "embedding";
};

/// |cosine similarity| graph keeping the strongest top_fraction of unordered
/// pairs. Each kept pair points from the lexicographically smaller gene id to
/// the larger, symmetrized if requested, then capped at max_in incoming edges
/// per target (highest weights kept).
KnowledgeGraph build_from_embeddings(const std::vector<std::string>& genes,
                                     const Matrix& embeddings,
                                     const EmbeddingGraphOptions& options = {});
/// Reads `gene<TAB>v1..vD` with a header row.
std::pair<std::vector<std::string>, Matrix> load_embeddings(const std::filesystem::path& path);

/// Exactly round(fraction * |E|) edges get a new source, target or both,
/// drawn uniformly among choices that avoid self-loops and duplicates.
KnowledgeGraph rewire(const KnowledgeGraph& graph, double fraction, RewireMode mode, Rng& rng);

/// Keeps a uniform random subset of round(keep_ratio * |E|) edges.
KnowledgeGraph downsample(const KnowledgeGraph& graph, double keep_ratio, Rng& rng);

/// Random d-regular graph by the pairing model, redrawing until simple.
ExpanderGraph generate_expander(Index n, Index degree, Rng& rng);

/// Union over `graphs` (sources 0..k-1) and the optional expander (source k).
UnionGraph build_union(const std::vector<KnowledgeGraph>& graphs,
                       const std::optional<ExpanderGraph>& expander = std::nullopt);

SupraGraph build_supra(const std::vector<KnowledgeGraph>& graphs);

/// Watts-Strogatz ring: each node links to `k/2` neighbors per side, and each
/// lattice edge is rewired to a random endpoint with probability beta.
/// Returned symmetrized (both directions present).
KnowledgeGraph small_world(const std::vector<std::string>& nodes, Index k, double beta, Rng& rng,
                           std::string name = "small_world");

/// Undirected hop distances from `source` (-1 if unreachable).
std::vector<Index> hop_distances(const KnowledgeGraph& graph, Index source);
bool is_connected(const KnowledgeGraph& graph);

}  // namespace txpert
