#include "txpert/graphs.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace txpert {
namespace {

std::uint64_t edge_key(Index s, Index t) {
    return (static_cast<std::uint64_t>(s) << 32) | static_cast<std::uint64_t>(t);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return out;
}

std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

Index round_count(double fraction, Index total) {
    return static_cast<Index>(std::llround(fraction * static_cast<double>(total)));
}

// Node list + lookup under construction.
struct NodeIndexer {
    std::vector<std::string> nodes;
    std::unordered_map<std::string, Index> index;

    Index intern(const std::string& id) {
        auto [it, inserted] = index.try_emplace(id, static_cast<Index>(nodes.size()));
        if (inserted) nodes.push_back(id);
        return it->second;
    }
};

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::string name, std::vector<std::string> nodes,
                               std::vector<Edge> edges)
    : name_(std::move(name)), nodes_(std::move(nodes)), edges_(std::move(edges)) {
    index_.reserve(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!index_.try_emplace(nodes_[i], static_cast<Index>(i)).second) {
            throw std::invalid_argument("graph '" + name_ + "': duplicate node id " + nodes_[i]);
        }
    }
    edge_lookup_.reserve(edges_.size());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const Edge& ed = edges_[e];
        if (ed.source < 0 || ed.target < 0 || ed.source >= num_nodes() || ed.target >= num_nodes()) {
            throw std::invalid_argument("graph '" + name_ + "': edge endpoint out of range");
        }
        if (ed.source == ed.target) {
            throw std::invalid_argument("graph '" + name_ + "': self-loop on " + nodes_[ed.source]);
        }
        if (!std::isfinite(ed.weight)) {
            throw std::invalid_argument("graph '" + name_ + "': non-finite edge weight");
        }
        if (!edge_lookup_.try_emplace(edge_key(ed.source, ed.target), e).second) {
            throw std::invalid_argument("graph '" + name_ + "': duplicate edge " +
                                        nodes_[ed.source] + " -> " + nodes_[ed.target]);
        }
    }
}

std::optional<Index> KnowledgeGraph::find(const std::string& node) const {
    auto it = index_.find(node);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Index KnowledgeGraph::index_of(const std::string& node) const {
    auto i = find(node);
    if (!i) throw std::out_of_range("graph '" + name_ + "' has no node " + node);
    return *i;
}

bool KnowledgeGraph::has_edge(Index source, Index target) const {
    return edge_lookup_.count(edge_key(source, target)) != 0;
}

std::vector<Index> KnowledgeGraph::in_degrees() const {
    std::vector<Index> deg(nodes_.size(), 0);
    for (const Edge& e : edges_) ++deg[static_cast<std::size_t>(e.target)];
    return deg;
}

Matrix KnowledgeGraph::adjacency() const {
    Matrix a = Matrix::Zero(num_nodes(), num_nodes());
    for (const Edge& e : edges_) a(e.source, e.target) = e.weight;
    return a;
}

KnowledgeGraph KnowledgeGraph::renamed(std::string name) const {
    return KnowledgeGraph(std::move(name), nodes_, edges_);
}

KnowledgeGraph KnowledgeGraph::reindexed(const std::vector<std::string>& universe) const {
    std::unordered_map<std::string, Index> pos;
    for (std::size_t i = 0; i < universe.size(); ++i) pos.emplace(universe[i], static_cast<Index>(i));
    std::vector<Index> map(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        auto it = pos.find(nodes_[i]);
        if (it == pos.end()) throw std::invalid_argument("reindex: universe lacks node " + nodes_[i]);
        map[i] = it->second;
    }
    std::vector<Edge> edges;
    edges.reserve(edges_.size());
    for (const Edge& e : edges_) {
        edges.push_back({map[static_cast<std::size_t>(e.source)],
                         map[static_cast<std::size_t>(e.target)], e.weight});
    }
    return KnowledgeGraph(name_, universe, std::move(edges));
}

KnowledgeGraph ExpanderGraph::to_directed(const std::vector<std::string>& nodes,
                                          std::string name) const {
    if (static_cast<Index>(nodes.size()) != num_nodes) {
        throw std::invalid_argument("expander: node list size differs from expander size");
    }
    std::vector<Edge> out;
    out.reserve(edges.size() * 2);
    for (auto [a, b] : edges) {
        out.push_back({a, b, 1.0});
        out.push_back({b, a, 1.0});
    }
    return KnowledgeGraph(std::move(name), nodes, std::move(out));
}

UnionGraph::UnionGraph(std::vector<std::string> nodes, std::vector<Edge> edges,
                       std::vector<std::uint32_t> provenance, std::vector<std::string> labels,
                       Matrix source_weights)
    : nodes_(std::move(nodes)),
      edges_(std::move(edges)),
      provenance_(std::move(provenance)),
      labels_(std::move(labels)),
      source_weights_(std::move(source_weights)) {
    if (provenance_.size() != edges_.size()) {
        throw std::invalid_argument("union graph: one provenance vector per edge required");
    }
    if (labels_.empty() || labels_.size() > 32) {
        throw std::invalid_argument("union graph: between 1 and 32 sources supported");
    }
    for (std::uint32_t bits : provenance_) {
        if (bits == 0) throw std::invalid_argument("union graph: edge without provenance");
    }
    if (source_weights_.size() != 0 &&
        (source_weights_.rows() != static_cast<Index>(edges_.size()) || source_weights_.cols() != num_sources())) {
        throw std::invalid_argument("union graph: source weights must be edges x sources");
    }
}

Matrix UnionGraph::edge_features() const {
    Matrix f = Matrix::Zero(static_cast<Index>(edges_.size()), num_sources());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        for (Index j = 0; j < num_sources(); ++j) {
            if ((provenance_[e] >> j) & 1U) f(static_cast<Index>(e), j) = 1.0;
        }
    }
    return f;
}

KnowledgeGraph UnionGraph::filter_by_source(Index j) const {
    if (j < 0 || j >= num_sources()) throw std::out_of_range("union graph: source index");
    std::vector<Edge> out;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (!((provenance_[e] >> j) & 1U)) continue;
        Edge ed = edges_[e];
        if (source_weights_.size() != 0) ed.weight = source_weights_(static_cast<Index>(e), j);
        out.push_back(ed);
    }
    return KnowledgeGraph(labels_[static_cast<std::size_t>(j)], nodes_, std::move(out));
}

KnowledgeGraph UnionGraph::as_graph(std::string name) const {
    return KnowledgeGraph(std::move(name), nodes_, edges_);
}

Matrix SupraGraph::adjacency() const {
    const Index n = num_supra_nodes();
    Matrix a = Matrix::Zero(n, n);
    for (const Edge& e : intra_edges) a(e.source, e.target) = e.weight;
    for (const Edge& e : inter_edges) a(e.source, e.target) = e.weight;
    return a;
}

std::vector<std::string> SupraGraph::supra_node_names() const {
    std::vector<std::string> names;
    names.reserve(entity_of.size());
    for (std::size_t s = 0; s < entity_of.size(); ++s) {
        names.push_back(layer_names[static_cast<std::size_t>(layer_of[s])] + "/" +
                        entities[static_cast<std::size_t>(entity_of[s])]);
    }
    return names;
}

KnowledgeGraph SupraGraph::as_graph(bool include_inter_layer) const {
    std::vector<Edge> edges = intra_edges;
    if (include_inter_layer) edges.insert(edges.end(), inter_edges.begin(), inter_edges.end());
    return KnowledgeGraph("supra", supra_node_names(), std::move(edges));
}

RewireMode parse_rewire_mode(const std::string& s) {
    if (s == "source") return RewireMode::Source;
    if (s == "target") return RewireMode::Target;
    if (s == "both") return RewireMode::Both;
    throw std::invalid_argument("unknown rewire mode '" + s + "' (expected source, target or both)");
}

std::string to_string(RewireMode m) {
    switch (m) {
        case RewireMode::Source: return "source";
        case RewireMode::Target: return "target";
        case RewireMode::Both: return "both";
    }
    return "unknown";
}

KnowledgeGraph load_edge_list(const std::filesystem::path& path, const EdgeListOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open edge list " + path.string());
    const std::string where = path.string() + ":";
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(where + "1: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_tabs(line) != std::vector<std::string>{"source", "target", "weight"}) {
        throw std::runtime_error(where + "1: header must be source<TAB>target<TAB>weight");
    }
    NodeIndexer idx;
    std::map<std::pair<Index, Index>, double> best;
    std::vector<std::pair<Index, Index>> order;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        const std::string at = where + std::to_string(lineno) + ": ";
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
            throw std::runtime_error(at + "expected 3 tab-separated fields");
        }
        const auto w = parse_double(fields[2]);
        if (!w) throw std::runtime_error(at + "unreadable weight '" + fields[2] + "'");
        if (fields[0] == fields[1]) throw std::runtime_error(at + "self-loop on " + fields[0]);
        const Index s = idx.intern(fields[0]);
        const Index t = idx.intern(fields[1]);
        auto [it, inserted] = best.try_emplace({s, t}, *w);
        if (inserted) {
            order.emplace_back(s, t);
        } else {
            it->second = std::max(it->second, *w);
        }
    }
    std::vector<Edge> edges;
    edges.reserve(order.size());
    for (auto [s, t] : order) edges.push_back({s, t, best.at({s, t})});
    std::string name = options.name.empty() ? path.stem().string() : options.name;
    KnowledgeGraph g(std::move(name), std::move(idx.nodes), std::move(edges));
    return options.symmetrize ? symmetrize(g) : g;
}

namespace {

void write_edges_tsv(const std::vector<std::string>& nodes, const std::vector<Edge>& edges,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "source\ttarget\tweight\n";
    for (const Edge& e : edges) {
        out << nodes[static_cast<std::size_t>(e.source)] << '\t'
            << nodes[static_cast<std::size_t>(e.target)] << '\t' << e.weight << '\n';
    }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

void save_edge_list(const KnowledgeGraph& graph, const std::filesystem::path& path) {
    write_edges_tsv(graph.nodes(), graph.edges(), path);
    nlohmann::json side = {{"name", graph.name()},
                           {"node_count", graph.num_nodes()},
                           {"edge_count", graph.num_edges()},
                           {"nodes", graph.nodes()}};
    write_json(side, path.string() + ".json");
}

void save_union(const UnionGraph& graph, const std::filesystem::path& path) {
    write_edges_tsv(graph.nodes(), graph.edges(), path);
    std::vector<std::string> bits;
    bits.reserve(graph.provenance().size());
    for (std::uint32_t p : graph.provenance()) {
        std::string b;
        for (Index j = 0; j < graph.num_sources(); ++j) b.push_back(((p >> j) & 1U) ? '1' : '0');
        bits.push_back(std::move(b));
    }
    nlohmann::json side = {{"name", "union"},
                           {"node_count", graph.nodes().size()},
                           {"edge_count", graph.edges().size()},
                           {"nodes", graph.nodes()},
                           {"provenance_labels", graph.labels()},
                           {"provenance", bits}};
    write_json(side, path.string() + ".json");
}

KnowledgeGraph symmetrize(const KnowledgeGraph& graph) {
    std::map<std::pair<Index, Index>, double> best;
    std::vector<std::pair<Index, Index>> order;
    auto put = [&](Index s, Index t, double w) {
        auto [it, inserted] = best.try_emplace({s, t}, w);
        if (inserted) {
            order.emplace_back(s, t);
        } else {
            it->second = std::max(it->second, w);
        }
    };
    for (const Edge& e : graph.edges()) put(e.source, e.target, e.weight);
    for (const Edge& e : graph.edges()) put(e.target, e.source, e.weight);
    std::vector<Edge> edges;
    edges.reserve(order.size());
    for (auto [s, t] : order) edges.push_back({s, t, best.at({s, t})});
    return KnowledgeGraph(graph.name(), graph.nodes(), std::move(edges));
}

KnowledgeGraph build_from_embeddings(const std::vector<std::string>& genes,
                                     const Matrix& embeddings,
                                     const EmbeddingGraphOptions& options) {
    const Index n = embeddings.rows();
    if (static_cast<Index>(genes.size()) != n) {
        throw std::invalid_argument("build_from_embeddings: one gene id per embedding row required");
    }
    if (n < 2) throw std::invalid_argument("build_from_embeddings: need at least 2 genes");
    if (options.top_fraction <= 0.0 || options.top_fraction > 1.0) {
        throw std::invalid_argument("build_from_embeddings: top_fraction must be in (0, 1]");
    }
    require_finite(embeddings, "build_from_embeddings");
    const Vector norms = embeddings.rowwise().norm();
    for (Index i = 0; i < n; ++i) {
        if (norms(i) == 0.0) {
            throw std::invalid_argument("build_from_embeddings: zero-norm embedding for gene " +
                                        genes[static_cast<std::size_t>(i)]);
        }
    }
    const Matrix unit = embeddings.array().colwise() / norms.array();
    const Matrix sim = (unit * unit.transpose()).cwiseAbs();

    struct Pair {
        Index i, j;
        double w;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) pairs.push_back({i, j, std::min(1.0, sim(i, j))});
    }
    const Index keep = std::min<Index>(round_count(options.top_fraction, static_cast<Index>(pairs.size())),
                                       static_cast<Index>(pairs.size()));
    std::partial_sort(pairs.begin(), pairs.begin() + keep, pairs.end(),
                      [](const Pair& a, const Pair& b) {
                          if (a.w != b.w) return a.w > b.w;
                          return a.i != b.i ? a.i < b.i : a.j < b.j;
                      });
    pairs.resize(static_cast<std::size_t>(keep));

    std::vector<Edge> edges;
    edges.reserve(pairs.size());
    for (const Pair& p : pairs) {
        const bool forward = genes[static_cast<std::size_t>(p.i)] < genes[static_cast<std::size_t>(p.j)];
        edges.push_back(forward ? Edge{p.i, p.j, p.w} : Edge{p.j, p.i, p.w});
    }
    KnowledgeGraph g(options.name, genes, std::move(edges));
    if (options.symmetrize) g = symmetrize(g);
    if (!options.max_in) return g;

    if (*options.max_in < 0) throw std::invalid_argument("build_from_embeddings: max_in must be >= 0");
    std::vector<std::vector<std::size_t>> incoming(static_cast<std::size_t>(n));
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        incoming[static_cast<std::size_t>(g.edges()[e].target)].push_back(e);
    }
    std::vector<bool> retained(g.edges().size(), false);
    for (auto& list : incoming) {
        std::stable_sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
            return g.edges()[a].weight > g.edges()[b].weight;
        });
        const std::size_t cap = std::min(list.size(), static_cast<std::size_t>(*options.max_in));
        for (std::size_t k = 0; k < cap; ++k) retained[list[k]] = true;
    }
    std::vector<Edge> capped;
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        if (retained[e]) capped.push_back(g.edges()[e]);
    }
    return KnowledgeGraph(g.name(), g.nodes(), std::move(capped));
}

std::pair<std::vector<std::string>, Matrix> load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embeddings " + path.string());
    const std::string where = path.string() + ":";
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(where + "1: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_tabs(line);
    if (header.size() < 2 || header[0] != "gene") {
        throw std::runtime_error(where + "1: header must be gene<TAB>v1..vD");
    }
    const std::size_t dim = header.size() - 1;
    std::vector<std::string> genes;
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        const std::string at = where + std::to_string(lineno) + ": ";
        if (fields.size() != dim + 1) throw std::runtime_error(at + "expected " + std::to_string(dim + 1) + " fields");
        genes.push_back(fields[0]);
        for (std::size_t k = 1; k < fields.size(); ++k) {
            const auto v = parse_double(fields[k]);
            if (!v) throw std::runtime_error(at + "unreadable value '" + fields[k] + "'");
            values.push_back(*v);
        }
    }
    Matrix m = Eigen::Map<const Matrix>(values.data(), static_cast<Index>(genes.size()),
                                        static_cast<Index>(dim));
    return {std::move(genes), std::move(m)};
}

KnowledgeGraph rewire(const KnowledgeGraph& graph, double fraction, RewireMode mode, Rng& rng) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("rewire: fraction must be in [0, 1]");
    }
    const Index n = graph.num_nodes();
    std::vector<Edge> edges = graph.edges();
    const auto m = static_cast<std::size_t>(round_count(fraction, graph.num_edges()));
    const auto chosen = rng.sample_without_replacement(edges.size(), m);

    std::set<std::pair<Index, Index>> present;
    for (const Edge& e : edges) present.insert({e.source, e.target});

    std::vector<Index> candidates;
    for (std::size_t pick : chosen) {
        Edge& e = edges[pick];
        std::pair<Index, Index> replacement{-1, -1};
        if (mode == RewireMode::Both) {
            // Rejection sampling over (s, t); enumeration is quadratic.
            for (int attempt = 0; attempt < 1000 && replacement.first < 0; ++attempt) {
                const auto s = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(n)));
                const auto t = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(n)));
                if (s == t || present.count({s, t}) != 0) continue;
                replacement = {s, t};
            }
        } else {
            candidates.clear();
            for (Index v = 0; v < n; ++v) {
                const Index s = mode == RewireMode::Source ? v : e.source;
                const Index t = mode == RewireMode::Source ? e.target : v;
                if (s != t && present.count({s, t}) == 0) candidates.push_back(v);
            }
            if (!candidates.empty()) {
                const Index v = candidates[rng.uniform_index(candidates.size())];
                replacement = mode == RewireMode::Source ? std::pair{v, e.target}
                                                         : std::pair{e.source, v};
            }
        }
        if (replacement.first < 0) {
            throw std::runtime_error("rewire: graph '" + graph.name() +
                                     "' too dense to place a new edge");
        }
        present.erase({e.source, e.target});
        present.insert(replacement);
        e.source = replacement.first;
        e.target = replacement.second;
    }
    return KnowledgeGraph(graph.name(), graph.nodes(), std::move(edges));
}

KnowledgeGraph downsample(const KnowledgeGraph& graph, double keep_ratio, Rng& rng) {
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
        throw std::invalid_argument("downsample: keep_ratio must be in (0, 1]");
    }
    const auto keep = static_cast<std::size_t>(round_count(keep_ratio, graph.num_edges()));
    auto picked = rng.sample_without_replacement(graph.edges().size(), keep);
    std::sort(picked.begin(), picked.end());
    std::vector<Edge> edges;
    edges.reserve(keep);
    for (std::size_t e : picked) edges.push_back(graph.edges()[e]);
    return KnowledgeGraph(graph.name(), graph.nodes(), std::move(edges));
}

ExpanderGraph generate_expander(Index n, Index degree, Rng& rng) {
    if (n < 2 || degree < 1 || degree >= n || (n * degree) % 2 != 0) {
        throw std::invalid_argument("generate_expander: infeasible (n=" + std::to_string(n) +
                                    ", degree=" + std::to_string(degree) + ")");
    }
    std::vector<Index> points(static_cast<std::size_t>(n * degree));
    for (std::size_t p = 0; p < points.size(); ++p) points[p] = static_cast<Index>(p) / degree;
    constexpr int kMaxAttempts = 1000000;
    std::set<std::pair<Index, Index>> seen;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        rng.shuffle(points);
        seen.clear();
        bool simple = true;
        for (std::size_t p = 0; p < points.size() && simple; p += 2) {
            Index a = points[p];
            Index b = points[p + 1];
            if (a == b) {
                simple = false;
                break;
            }
            if (a > b) std::swap(a, b);
            simple = seen.insert({a, b}).second;
        }
        if (simple) {
            ExpanderGraph g;
            g.num_nodes = n;
            g.degree = degree;
            g.seed = rng.seed();
            g.edges.assign(seen.begin(), seen.end());
            return g;
        }
    }
    throw std::runtime_error("generate_expander: no simple pairing found");
}

UnionGraph build_union(const std::vector<KnowledgeGraph>& graphs,
                       const std::optional<ExpanderGraph>& expander) {
    if (graphs.empty() && !expander) throw std::invalid_argument("build_union: no sources");
    NodeIndexer idx;
    for (const auto& g : graphs) {
        for (const auto& v : g.nodes()) idx.intern(v);
    }
    std::vector<KnowledgeGraph> sources;
    std::vector<std::string> labels;
    for (const auto& g : graphs) {
        sources.push_back(g.reindexed(idx.nodes));
        labels.push_back(g.name());
    }
    if (expander) {
        if (expander->num_nodes != static_cast<Index>(idx.nodes.size())) {
            throw std::invalid_argument("build_union: expander size differs from node universe");
        }
        sources.push_back(expander->to_directed(idx.nodes));
        labels.push_back("expander");
    }
    std::unordered_map<std::uint64_t, std::size_t> slot;
    std::vector<Edge> edges;
    std::vector<std::uint32_t> prov;
    std::vector<std::vector<double>> weights;
    for (std::size_t j = 0; j < sources.size(); ++j) {
        for (const Edge& e : sources[j].edges()) {
            auto [it, inserted] = slot.try_emplace(edge_key(e.source, e.target), edges.size());
            if (inserted) {
                edges.push_back(e);
                prov.push_back(0);
                weights.emplace_back(sources.size(), 0.0);
            }
            prov[it->second] |= (1U << j);
            weights[it->second][j] = e.weight;
        }
    }
    Matrix w(static_cast<Index>(edges.size()), static_cast<Index>(sources.size()));
    for (std::size_t e = 0; e < weights.size(); ++e) {
        for (std::size_t j = 0; j < sources.size(); ++j) w(static_cast<Index>(e), static_cast<Index>(j)) = weights[e][j];
    }
    return UnionGraph(std::move(idx.nodes), std::move(edges), std::move(prov), std::move(labels), std::move(w));
}

SupraGraph build_supra(const std::vector<KnowledgeGraph>& graphs) {
    if (graphs.empty()) throw std::invalid_argument("build_supra: need at least one layer");
    SupraGraph sg;
    NodeIndexer entities;
    sg.layer_offsets.push_back(0);
    // supra index of (layer, entity), -1 when the entity is absent from the layer
    std::vector<std::unordered_map<Index, Index>> copy(graphs.size());
    for (std::size_t l = 0; l < graphs.size(); ++l) {
        const KnowledgeGraph& g = graphs[l];
        const Index base = sg.layer_offsets.back();
        for (Index v = 0; v < g.num_nodes(); ++v) {
            const Index ent = entities.intern(g.nodes()[static_cast<std::size_t>(v)]);
            sg.entity_of.push_back(ent);
            sg.layer_of.push_back(static_cast<Index>(l));
            copy[l][ent] = base + v;
        }
        for (const Edge& e : g.edges()) {
            sg.intra_edges.push_back({base + e.source, base + e.target, e.weight});
        }
        sg.layer_offsets.push_back(base + g.num_nodes());
        sg.layer_names.push_back(g.name());
    }
    sg.entities = std::move(entities.nodes);
    for (std::size_t a = 0; a < graphs.size(); ++a) {
        for (std::size_t b = 0; b < graphs.size(); ++b) {
            if (a == b) continue;
            for (Index v = sg.layer_offsets[a]; v < sg.layer_offsets[a + 1]; ++v) {
                auto it = copy[b].find(sg.entity_of[static_cast<std::size_t>(v)]);
                if (it != copy[b].end()) sg.inter_edges.push_back({v, it->second, 1.0});
            }
        }
    }
    return sg;
}

KnowledgeGraph small_world(const std::vector<std::string>& nodes, Index k, double beta, Rng& rng,
                           std::string name) {
    const auto n = static_cast<Index>(nodes.size());
    if (k < 2 || k % 2 != 0 || k >= n) {
        throw std::invalid_argument("small_world: k must be even, >= 2 and < node count");
    }
    std::set<std::pair<Index, Index>> und;
    auto key = [](Index a, Index b) { return a < b ? std::pair{a, b} : std::pair{b, a}; };
    for (Index v = 0; v < n; ++v) {
        for (Index j = 1; j <= k / 2; ++j) und.insert(key(v, (v + j) % n));
    }
    for (Index j = 1; j <= k / 2; ++j) {
        for (Index v = 0; v < n; ++v) {
            if (rng.uniform() >= beta) continue;
            const auto lattice = key(v, (v + j) % n);
            if (und.count(lattice) == 0) continue;
            for (int attempt = 0; attempt < 100; ++attempt) {
                const auto w = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(n)));
                if (w == v || und.count(key(v, w)) != 0) continue;
                und.erase(lattice);
                und.insert(key(v, w));
                break;
            }
        }
    }
    std::vector<Edge> edges;
    edges.reserve(und.size() * 2);
    for (auto [a, b] : und) {
        edges.push_back({a, b, 1.0});
        edges.push_back({b, a, 1.0});
    }
    return KnowledgeGraph(std::move(name), nodes, std::move(edges));
}

std::vector<Index> hop_distances(const KnowledgeGraph& graph, Index source) {
    const auto n = static_cast<std::size_t>(graph.num_nodes());
    std::vector<std::vector<Index>> adj(n);
    for (const Edge& e : graph.edges()) {
        adj[static_cast<std::size_t>(e.source)].push_back(e.target);
        adj[static_cast<std::size_t>(e.target)].push_back(e.source);
    }
    std::vector<Index> dist(n, -1);
    std::deque<Index> queue{source};
    dist[static_cast<std::size_t>(source)] = 0;
    while (!queue.empty()) {
        const Index v = queue.front();
        queue.pop_front();
        for (Index u : adj[static_cast<std::size_t>(v)]) {
            if (dist[static_cast<std::size_t>(u)] < 0) {
                dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
                queue.push_back(u);
            }
        }
    }
    return dist;
}

bool is_connected(const KnowledgeGraph& graph) {
    if (graph.num_nodes() == 0) return true;
    const auto d = hop_distances(graph, 0);
    return std::none_of(d.begin(), d.end(), [](Index x) { return x < 0; });
}

}  // namespace txpert
