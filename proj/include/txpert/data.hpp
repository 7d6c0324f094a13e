#pragma once

#include "txpert/graphs.hpp"
#include "txpert/numerics.hpp"

#include <filesystem>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace txpert {

inline constexpr double kTargetLibrarySize = 4000.0;
inline constexpr const char* kControlLabel = "control";

/// log(1 + target * raw / ||raw||_1). Throws on an all-zero or negative profile.
template <typename Derived>
RowVector normalize_counts(const Eigen::MatrixBase<Derived>& raw,
                           double target_library = kTargetLibrarySize) {
    if ((raw.array() < 0.0).any()) throw std::invalid_argument("normalize: negative count");
    const double total = raw.sum();
    if (!(total > 0.0)) throw std::invalid_argument("normalize: cell has zero total count");
    return (raw.array() * (target_library / total)).log1p().matrix();
}

/// Genes of a perturbation label: "A+B" -> {A, B}; "control" -> {}.
std::vector<std::string> parse_perturbation(const std::string& label);
/// Canonical label: components sorted and '+'-joined, "control" when empty.
std::string perturbation_label(std::vector<std::string> genes);

struct CellMeta {
    std::string cell_id;
    std::vector<std::string> perturbations;  // sorted; empty for controls
    std::string cell_line;
    std::string batch;

    bool is_control() const { return perturbations.empty(); }
    std::string label() const { return perturbation_label(perturbations); }
};

struct Context {
    std::string cell_line;
    std::string batch;
    auto operator<=>(const Context&) const = default;
};

/// Cells x genes raw counts with metadata; the normalized view is computed
/// once at construction. Immutable.
class ExpressionDataset {
public:
    ExpressionDataset(std::vector<std::string> genes, std::vector<CellMeta> cells, Matrix counts,
                      double target_library = kTargetLibrarySize);

    const std::vector<std::string>& genes() const { return genes_; }
    const std::vector<CellMeta>& cells() const { return cells_; }
    const Matrix& counts() const { return counts_; }
    const Matrix& normalized() const { return normalized_; }
    Index num_cells() const { return counts_.rows(); }
    Index num_genes() const { return counts_.cols(); }
    double target_library() const { return target_library_; }

    std::optional<Index> gene_index(const std::string& gene) const;
    /// Distinct perturbation labels of non-control cells, sorted.
    std::vector<std::string> perturbation_labels() const;
    std::vector<std::string> cell_lines() const;
    std::vector<Index> cells_with_label(const std::string& label) const;

    /// Keeps the given gene columns in order.
    ExpressionDataset subset_genes(std::span<const Index> columns) const;

private:
    std::vector<std::string> genes_;
    std::vector<CellMeta> cells_;
    Matrix counts_;
    Matrix normalized_;
    double target_library_;
    std::map<std::string, Index> gene_index_;
};

/// Directory layout: genes.tsv, cells.tsv, counts.tsv (sparse triplets).
ExpressionDataset load_dataset(const std::filesystem::path& dir,
                               double target_library = kTargetLibrarySize);
void save_dataset(const ExpressionDataset& ds, const std::filesystem::path& dir);
/// `cell_id<TAB>v1..vD`; rows returned in the dataset's cell order.
Matrix load_basal_embeddings(const std::filesystem::path& path, const ExpressionDataset& ds);

/// Per (cell_line, batch) control membership and mean normalized profile.
class ControlIndex {
public:
    explicit ControlIndex(const ExpressionDataset& ds);
    /// Restricts membership to `visible` controls.
    ControlIndex(const ExpressionDataset& ds, std::span<const Index> visible);

    bool has(const Context& ctx) const { return groups_.count(ctx) != 0; }
    const RowVector& mean(const Context& ctx) const;      // throws std::out_of_range
    const std::vector<Index>& members(const Context& ctx) const;
    bool has_line(const std::string& line) const { return lines_.count(line) != 0; }
    const RowVector& line_mean(const std::string& line) const;
    const std::vector<Index>& line_members(const std::string& line) const;
    std::vector<Context> contexts() const;

private:
    struct Group {
        std::vector<Index> members;
        RowVector mean;
    };
    std::map<Context, Group> groups_;
    std::map<std::string, Group> lines_;

    void build(const ExpressionDataset& ds, std::span<const Index> visible);
};

/// profile - mean control of (cell_line, batch).
RowVector delta(const RowVector& profile, const Context& ctx, const ControlIndex& controls);

enum class BasalMode { Sample, Average };
BasalMode parse_basal_mode(const std::string& s);
std::string to_string(BasalMode m);

struct BasalMatch {
    RowVector profile;
    bool fell_back_to_line = false;
};

/// Basal profile for a perturbed cell: a random control of the same
/// (cell_line, batch) or their mean; falls back to the cell-line pool with a
/// warning when the batch has no controls.
BasalMatch match_control(const CellMeta& cell, const ExpressionDataset& ds,
                         const ControlIndex& controls, BasalMode mode, Rng& rng);

enum class Split { Train, Val, Test };
std::string to_string(Split s);

/// Perturbation labels assigned to splits. Controls are visible to every split.
/// With a held-out line, all of that line's perturbed cells are test cells.
struct SplitSpec {
    std::map<std::string, Split> assignment;
    std::optional<std::string> held_out_line;
    std::uint64_t seed = 0;

    /// Split of a perturbed cell; std::nullopt for controls or unassigned labels.
    std::optional<Split> split_of(const CellMeta& cell) const;
    std::vector<std::string> labels_in(Split s) const;
    std::vector<Index> cells_in(const ExpressionDataset& ds, Split s) const;
    std::vector<Index> controls(const ExpressionDataset& ds) const;
};

inline constexpr std::array<double, 3> kDefaultSplitRatios{0.5625, 0.1875, 0.25};

/// Largest-remainder allocation of `total` items to `ratios`.
std::vector<Index> allocate_counts(Index total, std::span<const double> ratios);

SplitSpec split_by_perturbation(const ExpressionDataset& ds, Rng& rng,
                                std::array<double, 3> ratios = kDefaultSplitRatios);
SplitSpec split_cross_cell_line(const ExpressionDataset& ds, const std::string& held_out_line,
                                Rng& rng);
/// Fails loudly when a split has perturbed cells whose cell line has no control.
void validate_split(const ExpressionDataset& ds, const SplitSpec& split);

void save_split(const SplitSpec& split, const std::filesystem::path& path);
SplitSpec load_split(const std::filesystem::path& path);

/// Top-k genes by variance of the normalized profile over `cells`.
std::vector<Index> select_variable_genes(const ExpressionDataset& ds, std::span<const Index> cells,
                                         Index k);

struct SyntheticSpec {
    Index num_genes = 200;
    Index num_perturbations = 60;
    Index num_cell_lines = 2;
    Index batches_per_line = 3;
    Index replicates = 30;                 // perturbed cells per (perturbation, line, batch)
    Index controls_per_context = 60;       // control cells per (line, batch)
    Index latent_dim = 8;
    double noise_std = 0.3;
    double effect_scale = 0.35;            // loading scale from latent factors to genes
    std::array<double, 3> hop_weights{1.0, 0.5, 0.25};  // self, 1-hop, 2-hop
    double batch_std = 0.1;
    Index small_world_k = 4;
    double small_world_beta = 0.1;
    std::uint64_t seed = 0;
    /// Generating graph; a seeded small-world graph over the genes when absent.
    std::optional<KnowledgeGraph> graph;
};

struct SyntheticTruth {
    KnowledgeGraph graph;
    std::vector<std::string> perturbed_genes;
    Matrix factors;    // genes x latent_dim
    Matrix loadings;   // latent_dim x genes
    /// Per perturbation, the hop-weighted factor mixture mapped to genes.
    std::map<std::string, RowVector> linear_effect;
    /// Noise-free normalized control profile per context.
    std::map<Context, RowVector> control_profile;
    /// Noise-free normalized delta per (perturbation, context).
    std::map<std::pair<std::string, Context>, RowVector> delta;
};

struct SyntheticData {
    ExpressionDataset dataset;
    SyntheticTruth truth;
};

SyntheticData synth_generate(const SyntheticSpec& spec);

}  // namespace txpert
