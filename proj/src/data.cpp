#include "txpert/data.hpp"

#include "txpert/log.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace txpert {
namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t at = s.find(sep, start);
        out.push_back(s.substr(start, at == std::string::npos ? std::string::npos : at - start));
        if (at == std::string::npos) break;
        start = at + 1;
    }
    return out;
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
    T v{};
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw std::runtime_error(where + "unreadable number '" + s + "'");
    return v;
}

}  // namespace

std::vector<std::string> parse_perturbation(const std::string& label) {
    if (label == kControlLabel || label.empty()) return {};
    auto genes = split_on(label, '+');
    for (const auto& g : genes) {
        if (g.empty()) throw std::invalid_argument("malformed perturbation label '" + label + "'");
    }
    std::sort(genes.begin(), genes.end());
    if (std::adjacent_find(genes.begin(), genes.end()) != genes.end()) {
        throw std::invalid_argument("perturbation label repeats a gene: '" + label + "'");
    }
    return genes;
}

std::string perturbation_label(std::vector<std::string> genes) {
    if (genes.empty()) return kControlLabel;
    std::sort(genes.begin(), genes.end());
    std::string out = genes[0];
    for (std::size_t i = 1; i < genes.size(); ++i) out += "+" + genes[i];
    return out;
}

ExpressionDataset::ExpressionDataset(std::vector<std::string> genes, std::vector<CellMeta> cells,
                                     Matrix counts, double target_library)
    : genes_(std::move(genes)),
      cells_(std::move(cells)),
      counts_(std::move(counts)),
      target_library_(target_library) {
    if (counts_.rows() != static_cast<Index>(cells_.size()) ||
        counts_.cols() != static_cast<Index>(genes_.size())) {
        throw std::invalid_argument("dataset: counts shape does not match cells x genes");
    }
    require_finite(counts_, "dataset counts");
    for (std::size_t g = 0; g < genes_.size(); ++g) {
        if (!gene_index_.emplace(genes_[g], static_cast<Index>(g)).second) {
            throw std::invalid_argument("dataset: duplicate gene id " + genes_[g]);
        }
    }
    for (auto& c : cells_) {
        if (c.cell_line.empty() || c.batch.empty()) {
            throw std::invalid_argument("dataset: cell " + c.cell_id + " lacks cell line or batch");
        }
        std::sort(c.perturbations.begin(), c.perturbations.end());
    }
    normalized_.resize(counts_.rows(), counts_.cols());
    for (Index i = 0; i < counts_.rows(); ++i) {
        try {
            normalized_.row(i) = normalize_counts(counts_.row(i), target_library_);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("cell " + cells_[static_cast<std::size_t>(i)].cell_id +
                                        ": " + e.what());
        }
    }
}

std::optional<Index> ExpressionDataset::gene_index(const std::string& gene) const {
    auto it = gene_index_.find(gene);
    if (it == gene_index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> ExpressionDataset::perturbation_labels() const {
    std::set<std::string> labels;
    for (const auto& c : cells_) {
        if (!c.is_control()) labels.insert(c.label());
    }
    return {labels.begin(), labels.end()};
}

std::vector<std::string> ExpressionDataset::cell_lines() const {
    std::set<std::string> lines;
    for (const auto& c : cells_) lines.insert(c.cell_line);
    return {lines.begin(), lines.end()};
}

std::vector<Index> ExpressionDataset::cells_with_label(const std::string& label) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        if (cells_[i].label() == label) out.push_back(static_cast<Index>(i));
    }
    return out;
}

ExpressionDataset ExpressionDataset::subset_genes(std::span<const Index> columns) const {
    std::vector<std::string> genes;
    Matrix counts(num_cells(), static_cast<Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        genes.push_back(genes_.at(static_cast<std::size_t>(columns[k])));
        counts.col(static_cast<Index>(k)) = counts_.col(columns[k]);
    }
    return ExpressionDataset(std::move(genes), cells_, std::move(counts), target_library_);
}

ExpressionDataset load_dataset(const std::filesystem::path& dir, double target_library) {
    std::string line;
    std::vector<std::string> genes;
    {
        std::ifstream in(dir / "genes.tsv");
        if (!in) throw std::runtime_error("cannot open " + (dir / "genes.tsv").string());
        while (read_line(in, line)) {
            if (!line.empty()) genes.push_back(line);
        }
    }
    std::vector<CellMeta> cells;
    {
        const auto path = dir / "cells.tsv";
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path.string());
        if (!read_line(in, line) ||
            split_on(line, '\t') !=
                std::vector<std::string>{"cell_id", "perturbation", "cell_line", "batch"}) {
            throw std::runtime_error(path.string() +
                                     ":1: header must be cell_id<TAB>perturbation<TAB>cell_line<TAB>batch");
        }
        std::size_t lineno = 1;
        while (read_line(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto f = split_on(line, '\t');
            const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
            if (f.size() != 4) throw std::runtime_error(where + "expected 4 fields");
            try {
                cells.push_back({f[0], parse_perturbation(f[1]), f[2], f[3]});
            } catch (const std::invalid_argument& e) {
                throw std::runtime_error(where + e.what());
            }
        }
    }
    Matrix counts = Matrix::Zero(static_cast<Index>(cells.size()), static_cast<Index>(genes.size()));
    {
        const auto path = dir / "counts.tsv";
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path.string());
        if (!read_line(in, line) ||
            split_on(line, '\t') != std::vector<std::string>{"cell_idx", "gene_idx", "count"}) {
            throw std::runtime_error(path.string() + ":1: header must be cell_idx<TAB>gene_idx<TAB>count");
        }
        std::size_t lineno = 1;
        while (read_line(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto f = split_on(line, '\t');
            const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
            if (f.size() != 3) throw std::runtime_error(where + "expected 3 fields");
            const auto c = parse_number<Index>(f[0], where);
            const auto g = parse_number<Index>(f[1], where);
            const auto v = parse_number<double>(f[2], where);
            if (c < 0 || c >= counts.rows() || g < 0 || g >= counts.cols()) {
                throw std::runtime_error(where + "index out of range");
            }
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::runtime_error(where + "count must be finite and >= 0");
            counts(c, g) = v;
        }
    }
    try {
        return ExpressionDataset(std::move(genes), std::move(cells), std::move(counts), target_library);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(dir.string() + ": " + e.what());
    }
}

void save_dataset(const ExpressionDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "genes.tsv");
        for (const auto& g : ds.genes()) out << g << '\n';
    }
    {
        std::ofstream out(dir / "cells.tsv");
        out << "cell_id\tperturbation\tcell_line\tbatch\n";
        for (const auto& c : ds.cells()) {
            out << c.cell_id << '\t' << c.label() << '\t' << c.cell_line << '\t' << c.batch << '\n';
        }
    }
    std::ofstream out(dir / "counts.tsv");
    out.precision(17);
    out << "cell_idx\tgene_idx\tcount\n";
    const Matrix& m = ds.counts();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index g = 0; g < m.cols(); ++g) {
            if (m(i, g) != 0.0) out << i << '\t' << g << '\t' << m(i, g) << '\n';
        }
    }
    if (!out) throw std::runtime_error("failed writing " + (dir / "counts.tsv").string());
}

Matrix load_basal_embeddings(const std::filesystem::path& path, const ExpressionDataset& ds) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!read_line(in, line)) throw std::runtime_error(path.string() + ":1: missing header");
    const auto header = split_on(line, '\t');
    if (header.size() < 2 || header[0] != "cell_id") {
        throw std::runtime_error(path.string() + ":1: header must be cell_id<TAB>v1..vD");
    }
    const auto dim = static_cast<Index>(header.size() - 1);
    std::map<std::string, Index> row_of;
    for (std::size_t i = 0; i < ds.cells().size(); ++i) row_of.emplace(ds.cells()[i].cell_id, static_cast<Index>(i));
    Matrix out(ds.num_cells(), dim);
    std::vector<bool> seen(static_cast<std::size_t>(ds.num_cells()), false);
    std::size_t lineno = 1;
    while (read_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_on(line, '\t');
        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        if (static_cast<Index>(f.size()) != dim + 1) throw std::runtime_error(where + "wrong field count");
        auto it = row_of.find(f[0]);
        if (it == row_of.end()) throw std::runtime_error(where + "unknown cell " + f[0]);
        for (Index k = 0; k < dim; ++k) {
            out(it->second, k) = parse_number<double>(f[static_cast<std::size_t>(k + 1)], where);
        }
        seen[static_cast<std::size_t>(it->second)] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) throw std::runtime_error(path.string() + ": no embedding for cell " + ds.cells()[i].cell_id);
    }
    return out;
}

ControlIndex::ControlIndex(const ExpressionDataset& ds) {
    std::vector<Index> all;
    for (std::size_t i = 0; i < ds.cells().size(); ++i) {
        if (ds.cells()[i].is_control()) all.push_back(static_cast<Index>(i));
    }
    build(ds, all);
}

ControlIndex::ControlIndex(const ExpressionDataset& ds, std::span<const Index> visible) {
    build(ds, visible);
}

void ControlIndex::build(const ExpressionDataset& ds, std::span<const Index> visible) {
    for (Index i : visible) {
        const CellMeta& c = ds.cells().at(static_cast<std::size_t>(i));
        if (!c.is_control()) throw std::invalid_argument("ControlIndex: cell " + c.cell_id + " is not a control");
        groups_[Context{c.cell_line, c.batch}].members.push_back(i);
        lines_[c.cell_line].members.push_back(i);
    }
    auto finish = [&](Group& g) {
        g.mean = RowVector::Zero(ds.num_genes());
        for (Index i : g.members) g.mean += ds.normalized().row(i);
        g.mean /= static_cast<double>(g.members.size());
    };
    for (auto& [_, g] : groups_) finish(g);
    for (auto& [_, g] : lines_) finish(g);
}

const RowVector& ControlIndex::mean(const Context& ctx) const {
    auto it = groups_.find(ctx);
    if (it == groups_.end()) {
        throw std::out_of_range("no control cells for cell line '" + ctx.cell_line + "', batch '" +
                                ctx.batch + "'");
    }
    return it->second.mean;
}

const std::vector<Index>& ControlIndex::members(const Context& ctx) const {
    auto it = groups_.find(ctx);
    if (it == groups_.end()) {
        throw std::out_of_range("no control cells for cell line '" + ctx.cell_line + "', batch '" +
                                ctx.batch + "'");
    }
    return it->second.members;
}

const RowVector& ControlIndex::line_mean(const std::string& line) const {
    auto it = lines_.find(line);
    if (it == lines_.end()) throw std::out_of_range("no control cells for cell line '" + line + "'");
    return it->second.mean;
}

const std::vector<Index>& ControlIndex::line_members(const std::string& line) const {
    auto it = lines_.find(line);
    if (it == lines_.end()) throw std::out_of_range("no control cells for cell line '" + line + "'");
    return it->second.members;
}

std::vector<Context> ControlIndex::contexts() const {
    std::vector<Context> out;
    for (const auto& [ctx, _] : groups_) out.push_back(ctx);
    return out;
}

RowVector delta(const RowVector& profile, const Context& ctx, const ControlIndex& controls) {
    const RowVector& m = controls.mean(ctx);
    if (m.size() != profile.size()) throw std::invalid_argument("delta: profile length mismatch");
    return profile - m;
}

BasalMode parse_basal_mode(const std::string& s) {
    if (s == "sample") return BasalMode::Sample;
    if (s == "average") return BasalMode::Average;
    throw std::invalid_argument("unknown basal mode '" + s + "' (expected sample or average)");
}

std::string to_string(BasalMode m) { return m == BasalMode::Sample ? "sample" : "average"; }

BasalMatch match_control(const CellMeta& cell, const ExpressionDataset& ds,
                         const ControlIndex& controls, BasalMode mode, Rng& rng) {
    const Context ctx{cell.cell_line, cell.batch};
    if (controls.has(ctx)) {
        if (mode == BasalMode::Average) return {controls.mean(ctx), false};
        const auto& m = controls.members(ctx);
        return {ds.normalized().row(m[rng.uniform_index(m.size())]), false};
    }
    if (!controls.has_line(cell.cell_line)) {
        throw std::out_of_range("no control cells in cell line '" + cell.cell_line + "'");
    }
    log::warn("no controls for ({}, {}); using the cell-line control pool", cell.cell_line, cell.batch);
    if (mode == BasalMode::Average) return {controls.line_mean(cell.cell_line), true};
    const auto& m = controls.line_members(cell.cell_line);
    return {ds.normalized().row(m[rng.uniform_index(m.size())]), true};
}

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "unknown";
}

std::optional<Split> SplitSpec::split_of(const CellMeta& cell) const {
    if (cell.is_control()) return std::nullopt;
    if (held_out_line && cell.cell_line == *held_out_line) return Split::Test;
    auto it = assignment.find(cell.label());
    if (it == assignment.end()) return std::nullopt;
    if (held_out_line && it->second == Split::Test) return std::nullopt;
    return it->second;
}

std::vector<std::string> SplitSpec::labels_in(Split s) const {
    std::vector<std::string> out;
    for (const auto& [label, sp] : assignment) {
        if (sp == s) out.push_back(label);
    }
    return out;
}

std::vector<Index> SplitSpec::cells_in(const ExpressionDataset& ds, Split s) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < ds.cells().size(); ++i) {
        if (split_of(ds.cells()[i]) == s) out.push_back(static_cast<Index>(i));
    }
    return out;
}

std::vector<Index> SplitSpec::controls(const ExpressionDataset& ds) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < ds.cells().size(); ++i) {
        if (ds.cells()[i].is_control()) out.push_back(static_cast<Index>(i));
    }
    return out;
}

std::vector<Index> allocate_counts(Index total, std::span<const double> ratios) {
    const double sum = std::accumulate(ratios.begin(), ratios.end(), 0.0);
    if (!(sum > 0.0)) throw std::invalid_argument("allocate_counts: ratios must sum to > 0");
    std::vector<Index> counts(ratios.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    Index assigned = 0;
    for (std::size_t k = 0; k < ratios.size(); ++k) {
        const double exact = static_cast<double>(total) * ratios[k] / sum;
        counts[k] = static_cast<Index>(std::floor(exact));
        assigned += counts[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    // Largest remainders first; earlier split wins ties.
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++counts[remainders[r].second];
    return counts;
}

SplitSpec split_by_perturbation(const ExpressionDataset& ds, Rng& rng, std::array<double, 3> ratios) {
    auto labels = ds.perturbation_labels();
    if (labels.size() < 3) {
        throw std::invalid_argument("split_by_perturbation: need at least 3 perturbations, found " +
                                    std::to_string(labels.size()));
    }
    rng.shuffle(labels);
    const auto counts = allocate_counts(static_cast<Index>(labels.size()), ratios);
    SplitSpec spec;
    spec.seed = rng.seed();
    std::size_t at = 0;
    const Split order[3] = {Split::Train, Split::Val, Split::Test};
    for (std::size_t k = 0; k < 3; ++k) {
        for (Index c = 0; c < counts[k]; ++c) spec.assignment[labels[at++]] = order[k];
    }
    validate_split(ds, spec);
    return spec;
}

SplitSpec split_cross_cell_line(const ExpressionDataset& ds, const std::string& held_out_line,
                                Rng& rng) {
    const auto lines = ds.cell_lines();
    if (std::find(lines.begin(), lines.end(), held_out_line) == lines.end()) {
        throw std::invalid_argument("unknown cell line '" + held_out_line + "'");
    }
    // Train/val drawn over every label in the dataset so the other lines'
    // assignment does not depend on which line is held out.
    auto labels = ds.perturbation_labels();
    if (labels.size() < 2) throw std::invalid_argument("split_cross_cell_line: need at least 2 perturbations");
    rng.shuffle(labels);
    const std::array<double, 2> ratios{kDefaultSplitRatios[0], kDefaultSplitRatios[1]};
    const auto counts = allocate_counts(static_cast<Index>(labels.size()), ratios);
    SplitSpec spec;
    spec.seed = rng.seed();
    spec.held_out_line = held_out_line;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        spec.assignment[labels[i]] = static_cast<Index>(i) < counts[0] ? Split::Train : Split::Val;
    }
    validate_split(ds, spec);
    return spec;
}

void validate_split(const ExpressionDataset& ds, const SplitSpec& split) {
    std::set<std::string> control_lines;
    for (const auto& c : ds.cells()) {
        if (c.is_control()) control_lines.insert(c.cell_line);
    }
    for (const auto& c : ds.cells()) {
        if (split.split_of(c) && control_lines.count(c.cell_line) == 0) {
            throw std::invalid_argument("split: perturbed cell " + c.cell_id + " in " +
                                        to_string(*split.split_of(c)) + " has no control in cell line '" +
                                        c.cell_line + "'");
        }
    }
}

void save_split(const SplitSpec& split, const std::filesystem::path& path) {
    nlohmann::json j;
    j["seed"] = split.seed;
    j["held_out_line"] = split.held_out_line ? nlohmann::json(*split.held_out_line) : nlohmann::json(nullptr);
    nlohmann::json a = nlohmann::json::object();
    for (const auto& [label, s] : split.assignment) a[label] = to_string(s);
    j["assignment"] = a;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

SplitSpec load_split(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open split " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    SplitSpec spec;
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("held_out_line") && !j["held_out_line"].is_null()) {
        spec.held_out_line = j["held_out_line"].get<std::string>();
    }
    for (const auto& [label, s] : j.at("assignment").items()) {
        const auto name = s.get<std::string>();
        if (name == "train") {
            spec.assignment[label] = Split::Train;
        } else if (name == "val") {
            spec.assignment[label] = Split::Val;
        } else if (name == "test") {
            spec.assignment[label] = Split::Test;
        } else {
            throw std::runtime_error(path.string() + ": unknown split '" + name + "'");
        }
    }
    return spec;
}

std::vector<Index> select_variable_genes(const ExpressionDataset& ds, std::span<const Index> cells,
                                         Index k) {
    if (cells.empty()) throw std::invalid_argument("select_variable_genes: no cells");
    Matrix sub(static_cast<Index>(cells.size()), ds.num_genes());
    for (std::size_t i = 0; i < cells.size(); ++i) sub.row(static_cast<Index>(i)) = ds.normalized().row(cells[i]);
    const RowVector mu = sub.colwise().mean();
    const RowVector var = (sub.rowwise() - mu).colwise().squaredNorm();
    std::vector<Index> order(static_cast<std::size_t>(ds.num_genes()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return var(a) > var(b); });
    order.resize(static_cast<std::size_t>(std::min(k, ds.num_genes())));
    std::sort(order.begin(), order.end());
    return order;
}

SyntheticData synth_generate(const SyntheticSpec& spec) {
    if (spec.num_cell_lines < 1 || spec.batches_per_line < 1 || spec.replicates < 1 ||
        spec.controls_per_context < 1 || spec.latent_dim < 1 || spec.noise_std < 0.0) {
        throw std::invalid_argument("synth: counts must be >= 1 and noise_std >= 0");
    }
    Rng root(spec.seed);
    std::vector<std::string> genes;
    KnowledgeGraph graph;
    if (spec.graph) {
        graph = *spec.graph;
        if (graph.num_nodes() != spec.num_genes) {
            throw std::invalid_argument("synth: generating graph has " + std::to_string(graph.num_nodes()) +
                                        " nodes but num_genes is " + std::to_string(spec.num_genes));
        }
        genes = graph.nodes();
    } else {
        const int width = static_cast<int>(std::to_string(spec.num_genes - 1).size());
        for (Index g = 0; g < spec.num_genes; ++g) {
            std::string id = std::to_string(g);
            genes.push_back("G" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id);
        }
        Rng graph_rng = root.fork(1);
        graph = small_world(genes, spec.small_world_k, spec.small_world_beta, graph_rng, "synthetic");
    }
    const Index n = spec.num_genes;
    if (spec.num_perturbations < 1 || spec.num_perturbations > n) {
        throw std::invalid_argument("synth: num_perturbations must be in [1, num_genes]");
    }

    Rng pick_rng = root.fork(2);
    auto picked = pick_rng.sample_without_replacement(static_cast<std::size_t>(n),
                                                      static_cast<std::size_t>(spec.num_perturbations));
    std::sort(picked.begin(), picked.end());

    SyntheticTruth truth;
    truth.graph = graph;
    Rng factor_rng = root.fork(3);
    truth.factors.resize(n, spec.latent_dim);
    for (Index i = 0; i < truth.factors.size(); ++i) truth.factors.data()[i] = factor_rng.normal();
    truth.loadings.resize(spec.latent_dim, n);
    const double load_std = spec.effect_scale / std::sqrt(static_cast<double>(spec.latent_dim));
    for (Index i = 0; i < truth.loadings.size(); ++i) truth.loadings.data()[i] = load_std * factor_rng.normal();

    for (std::size_t p : picked) {
        const std::string& gene = genes[p];
        truth.perturbed_genes.push_back(gene);
        const auto dist = hop_distances(graph, static_cast<Index>(p));
        RowVector mix = RowVector::Zero(spec.latent_dim);
        for (Index q = 0; q < n; ++q) {
            const Index d = dist[static_cast<std::size_t>(q)];
            if (d >= 0 && d <= 2) mix += spec.hop_weights[static_cast<std::size_t>(d)] * truth.factors.row(q);
        }
        truth.linear_effect[gene] = mix * truth.loadings;
    }

    // Base log-profile per line with expm1 summing to the target library.
    Rng base_rng = root.fork(4);
    std::vector<std::string> lines;
    std::map<Context, RowVector> log_mean;
    std::vector<Context> contexts;
    for (Index c = 0; c < spec.num_cell_lines; ++c) {
        RowVector w(n);
        for (Index g = 0; g < n; ++g) w(g) = std::exp(0.5 * base_rng.normal());
        const RowVector base = (w.array() * (kTargetLibrarySize / w.sum())).log1p().matrix();
        const std::string line = "line" + std::to_string(c);
        for (Index b = 0; b < spec.batches_per_line; ++b) {
            RowVector offset(n);
            for (Index g = 0; g < n; ++g) offset(g) = spec.batch_std * base_rng.normal();
            const Context ctx{line, line + "_b" + std::to_string(b)};
            contexts.push_back(ctx);
            log_mean[ctx] = base + offset;
        }
    }
    auto to_counts = [](const RowVector& log_profile) {
        return RowVector(log_profile.cwiseMax(0.0).array().expm1().matrix());
    };
    for (const auto& ctx : contexts) {
        truth.control_profile[ctx] = normalize_counts(to_counts(log_mean[ctx]));
        for (const auto& gene : truth.perturbed_genes) {
            truth.delta[{gene, ctx}] =
                normalize_counts(to_counts(log_mean[ctx] + truth.linear_effect[gene])) -
                truth.control_profile[ctx];
        }
    }

    Rng noise_rng = root.fork(5);
    const Index per_context = spec.controls_per_context + spec.num_perturbations * spec.replicates;
    const Index total = per_context * static_cast<Index>(contexts.size());
    Matrix counts(total, n);
    std::vector<CellMeta> cells;
    cells.reserve(static_cast<std::size_t>(total));
    const int id_width = static_cast<int>(std::to_string(total).size());
    auto emit = [&](const Context& ctx, const std::vector<std::string>& perts, const RowVector& mean) {
        RowVector x = mean;
        for (Index g = 0; g < n; ++g) x(g) += spec.noise_std * noise_rng.normal();
        const auto row = static_cast<Index>(cells.size());
        counts.row(row) = to_counts(x);
        if (counts.row(row).sum() <= 0.0) counts(row, 0) = 1.0;
        std::string id = std::to_string(row);
        cells.push_back({"cell" + std::string(static_cast<std::size_t>(id_width) - id.size(), '0') + id,
                         perts, ctx.cell_line, ctx.batch});
    };
    for (const auto& ctx : contexts) {
        for (Index r = 0; r < spec.controls_per_context; ++r) emit(ctx, {}, log_mean[ctx]);
        for (const auto& gene : truth.perturbed_genes) {
            const RowVector shifted = log_mean[ctx] + truth.linear_effect[gene];
            for (Index r = 0; r < spec.replicates; ++r) emit(ctx, {gene}, shifted);
        }
    }
    ExpressionDataset ds(genes, std::move(cells), std::move(counts));
    return {std::move(ds), std::move(truth)};
}

}  // namespace txpert
