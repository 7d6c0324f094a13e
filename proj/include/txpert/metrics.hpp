#pragma once

#include "txpert/data.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace txpert {

/// Pearson correlation of two equal-length vectors; std::nullopt when either
/// has zero variance.
template <typename A, typename B>
std::optional<double> pearson(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("pearson: length mismatch (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    if (a.size() < 2) return std::nullopt;
    const auto n = static_cast<double>(a.size());
    const auto ac = (a.array() - a.sum() / n).eval();
    const auto bc = (b.array() - b.sum() / n).eval();
    const double saa = ac.square().sum();
    const double sbb = bc.square().sum();
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return (ac * bc).sum() / std::sqrt(saa * sbb);
}

/// Cosine similarity; std::nullopt when either vector is zero.
template <typename A, typename B>
std::optional<double> cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) return std::nullopt;
    return a.cwiseProduct(b).sum() / (na * nb);
}

enum class Similarity { Pearson, Cosine };
Similarity parse_similarity(const std::string& s);
std::string to_string(Similarity s);

enum class RetrievalMode { Full, Fast };
RetrievalMode parse_retrieval_mode(const std::string& s);

inline constexpr std::size_t kFastRetrievalReferences = 100;

/// Per-query rank scores. Row p of `predictions` is scored against row p of
/// `references` relative to every other reference row. A reference whose
/// similarity is undefined never outranks the true match. Queries whose own
/// similarity is undefined get NaN. Fast mode draws one reference set of 100
/// rows from `rng`, adds the query when absent, and falls back to full mode
/// with a warning when there are no more than 100 rows.
std::vector<double> retrieval(const Matrix& predictions, const Matrix& references, RetrievalMode mode,
                              Rng& rng, Similarity similarity = Similarity::Pearson);

/// Replicate deltas of one (perturbation, cell line, batch) condition.
struct ReplicateGroup {
    std::string perturbation;
    Context context;
    Matrix deltas;  // cells x genes
};

struct ReproducibilityResult {
    double pearson_delta = std::numeric_limits<double>::quiet_NaN();
    double retrieval = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, double> per_perturbation;  // Pearson, averaged over groups and seeds
    Index skipped_groups = 0;
};

/// Split-half agreement. For each seed s a generator Rng(seed).fork(s) walks
/// the groups in order and shuffles each group's rows; the first ceil(k/2)
/// rows form half A. Pearson of the half means is averaged per perturbation,
/// then over perturbations, then over seeds. Retrieval compares per-
/// perturbation half-A means (as predictions) with half-B means (as
/// references). Groups with fewer than two cells are skipped with a warning.
ReproducibilityResult split_half_reproducibility(std::span<const ReplicateGroup> groups,
                                                 Index n_seeds, std::uint64_t seed);

/// Prediction target: a perturbation set in a context.
struct ConditionRequest {
    std::vector<std::string> perturbations;
    Context context;
};

/// Maps requests to predicted deltas (one row per request).
using DeltaPredictor = std::function<Matrix(std::span<const ConditionRequest>)>;

/// Training-set mean deltas combined additively.
class GeneralBaseline {
public:
    /// `train_cells` are perturbed cells; deltas use `controls`.
    GeneralBaseline(const ExpressionDataset& ds, std::span<const Index> train_cells,
                    const ControlIndex& controls);

    RowVector predict_delta(const std::vector<std::string>& perturbations) const;
    /// x_bar(c, b) + predicted delta.
    RowVector predict_profile(const ConditionRequest& request, const ControlIndex& controls) const;
    DeltaPredictor predictor() const;

    const RowVector& global_delta() const { return global_; }
    bool seen(const std::string& label) const { return label_mean_.count(label) != 0; }

private:
    std::map<std::string, RowVector> label_mean_;
    RowVector global_;
};

/// Ridge regression from one-hot (cell line, batch) indicators to deltas. A
/// stand-in for a model that only sees batch information.
class BatchRidgeBaseline {
public:
    BatchRidgeBaseline(const ExpressionDataset& ds, std::span<const Index> train_cells,
                       const ControlIndex& controls, double lambda = 1.0);
    RowVector predict_delta(const Context& context) const;
    DeltaPredictor predictor() const;

private:
    std::vector<std::string> lines_;
    std::vector<Context> contexts_;
    Matrix coef_;  // (1 + lines + contexts) x genes
    RowVector intercept_;
};

struct PerturbationRecord {
    std::string perturbation;
    Index n_cells = 0;
    std::optional<double> pearson_delta;
    double retrieval = std::numeric_limits<double>::quiet_NaN();
    double fast_retrieval = std::numeric_limits<double>::quiet_NaN();
    bool excluded = false;  // zero-variance delta
};

struct MetricAggregates {
    double pearson_delta = std::numeric_limits<double>::quiet_NaN();
    double retrieval = std::numeric_limits<double>::quiet_NaN();
    double fast_retrieval = std::numeric_limits<double>::quiet_NaN();
    Index n_perturbations = 0;
    Index n_excluded = 0;
};

struct MetricReport {
    static constexpr int kSchemaVersion = 1;
    std::string model;
    std::string split;
    std::vector<PerturbationRecord> records;
    MetricAggregates aggregates;
    MetricAggregates general_baseline;
    std::optional<MetricAggregates> batch_baseline;
    ReproducibilityResult reproducibility;
    std::uint64_t seed = 0;
    Index reproducibility_seeds = 0;
};

/// Observed and predicted replicate-averaged deltas per perturbation.
struct PerturbationDeltas {
    std::vector<std::string> labels;
    std::vector<Index> n_cells;
    Matrix observed;   // perturbations x genes
    Matrix predicted;  // perturbations x genes
};

/// Groups `cells` by label, requests one prediction per (label, context) and
/// averages both observed and predicted deltas over the cells.
PerturbationDeltas perturbation_deltas(const ExpressionDataset& ds, std::span<const Index> cells,
                                       const ControlIndex& controls, const DeltaPredictor& predictor);

/// Replicate groups of `cells` keyed by (label, context), in sorted order.
std::vector<ReplicateGroup> replicate_groups(const ExpressionDataset& ds, std::span<const Index> cells,
                                             const ControlIndex& controls);

struct ScoredDeltas {
    std::vector<PerturbationRecord> records;
    MetricAggregates aggregates;
};

/// Pearson delta and both retrieval variants on precomputed deltas.
ScoredDeltas score_deltas(const PerturbationDeltas& deltas, std::uint64_t seed,
                          Similarity similarity = Similarity::Pearson);

/// Mean Pearson delta over the perturbations of `cells` (NaN if none defined).
double mean_pearson_delta(const ExpressionDataset& ds, std::span<const Index> cells,
                          const ControlIndex& controls, const DeltaPredictor& predictor);

struct EvaluateOptions {
    std::uint64_t seed = 0;
    Index reproducibility_seeds = 5;
    Similarity similarity = Similarity::Pearson;
    bool batch_baseline = true;
    std::string model_name = "model";
};

/// Full report on the test split: model metrics, the general-baseline
/// reference and split-half reproducibility.
MetricReport evaluate(const DeltaPredictor& predictor, const ExpressionDataset& ds,
                      const SplitSpec& split, const EvaluateOptions& options);

/// Recomputes aggregates from records (mean of per-perturbation values, skipping undefined ones).
MetricAggregates aggregate(std::span<const PerturbationRecord> records);

}  // namespace txpert
