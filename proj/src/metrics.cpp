#include "txpert/metrics.hpp"

#include "txpert/log.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace txpert {

Similarity parse_similarity(const std::string& s) {
    if (s == "pearson") return Similarity::Pearson;
    if (s == "cosine") return Similarity::Cosine;
    throw std::invalid_argument("unknown similarity '" + s + "' (expected pearson or cosine)");
}

std::string to_string(Similarity s) { return s == Similarity::Pearson ? "pearson" : "cosine"; }

RetrievalMode parse_retrieval_mode(const std::string& s) {
    if (s == "full") return RetrievalMode::Full;
    if (s == "fast") return RetrievalMode::Fast;
    throw std::invalid_argument("unknown retrieval mode '" + s + "' (expected full or fast)");
}

namespace {

std::optional<double> similarity_of(const RowVector& a, const RowVector& b, Similarity s) {
    return s == Similarity::Pearson ? pearson(a, b) : cosine(a, b);
}

double rank_against(const Matrix& predictions, const Matrix& references, Index p,
                    std::span<const Index> pool, Similarity sim) {
    const RowVector pred = predictions.row(p);
    const auto own = similarity_of(pred, references.row(p), sim);
    if (!own) return std::numeric_limits<double>::quiet_NaN();
    Index wins = 0;
    Index total = 0;
    for (Index q : pool) {
        if (q == p) continue;
        ++total;
        const auto other = similarity_of(pred, references.row(q), sim);
        if (!other || *own >= *other) ++wins;
    }
    return static_cast<double>(wins) / static_cast<double>(total);
}

double mean_defined(const std::vector<double>& v) {
    double sum = 0.0;
    Index n = 0;
    for (double x : v) {
        if (std::isfinite(x)) {
            sum += x;
            ++n;
        }
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

}  // namespace

std::vector<double> retrieval(const Matrix& predictions, const Matrix& references, RetrievalMode mode,
                              Rng& rng, Similarity similarity) {
    if (predictions.rows() != references.rows() || predictions.cols() != references.cols()) {
        throw std::invalid_argument("retrieval: predictions and references differ in shape");
    }
    const Index n = predictions.rows();
    if (n < 2) throw std::invalid_argument("retrieval: need at least 2 perturbations");
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    std::vector<double> out(static_cast<std::size_t>(n));

    if (mode == RetrievalMode::Fast && static_cast<std::size_t>(n) <= kFastRetrievalReferences) {
        log::debug("fast retrieval needs more than {} perturbations, got {}; using full retrieval",
                  kFastRetrievalReferences, n);
        mode = RetrievalMode::Full;
    }
    if (mode == RetrievalMode::Full) {
        for (Index p = 0; p < n; ++p) {
            out[static_cast<std::size_t>(p)] = rank_against(predictions, references, p, all, similarity);
        }
        return out;
    }
    std::vector<Index> refs;
    for (std::size_t i : rng.sample_without_replacement(static_cast<std::size_t>(n), kFastRetrievalReferences)) {
        refs.push_back(static_cast<Index>(i));
    }
    std::sort(refs.begin(), refs.end());
    for (Index p = 0; p < n; ++p) {
        std::vector<Index> pool = refs;
        if (!std::binary_search(refs.begin(), refs.end(), p)) pool.push_back(p);
        out[static_cast<std::size_t>(p)] = rank_against(predictions, references, p, pool, similarity);
    }
    return out;
}

ReproducibilityResult split_half_reproducibility(std::span<const ReplicateGroup> groups,
                                                 Index n_seeds, std::uint64_t seed) {
    if (n_seeds < 1) throw std::invalid_argument("reproducibility: need at least one seed");
    ReproducibilityResult result;
    std::vector<std::string> labels;
    std::map<std::string, Index> label_row;
    for (const auto& g : groups) {
        if (g.deltas.rows() < 2) continue;
        if (label_row.emplace(g.perturbation, static_cast<Index>(labels.size())).second) {
            labels.push_back(g.perturbation);
        }
    }
    for (const auto& g : groups) {
        if (g.deltas.rows() < 2) {
            ++result.skipped_groups;
            log::debug("split-half: skipping {} in ({}, {}) with {} cell(s)", g.perturbation,
                      g.context.cell_line, g.context.batch, g.deltas.rows());
        }
    }
    if (labels.empty()) return result;
    const Index genes = groups.front().deltas.cols();

    std::map<std::string, double> pearson_sum;
    std::vector<double> seed_pearson;
    std::vector<double> seed_retrieval;
    const Rng root(seed);
    for (Index s = 0; s < n_seeds; ++s) {
        Rng rng = root.fork(static_cast<std::uint64_t>(s));
        std::map<std::string, std::pair<double, Index>> per_label;  // sum, count of defined groups
        Matrix half_a = Matrix::Zero(static_cast<Index>(labels.size()), genes);
        Matrix half_b = Matrix::Zero(static_cast<Index>(labels.size()), genes);
        std::vector<Index> cells_a(labels.size(), 0);
        std::vector<Index> cells_b(labels.size(), 0);
        for (const auto& g : groups) {
            const Index k = g.deltas.rows();
            if (k < 2) continue;
            std::vector<Index> order(static_cast<std::size_t>(k));
            std::iota(order.begin(), order.end(), Index{0});
            rng.shuffle(order);
            const Index ka = (k + 1) / 2;
            RowVector a = RowVector::Zero(genes);
            RowVector b = RowVector::Zero(genes);
            for (Index i = 0; i < k; ++i) {
                (i < ka ? a : b) += g.deltas.row(order[static_cast<std::size_t>(i)]);
            }
            const Index row = label_row.at(g.perturbation);
            half_a.row(row) += a;
            half_b.row(row) += b;
            cells_a[static_cast<std::size_t>(row)] += ka;
            cells_b[static_cast<std::size_t>(row)] += k - ka;
            a /= static_cast<double>(ka);
            b /= static_cast<double>(k - ka);
            if (auto r = pearson(a, b)) {
                auto& acc = per_label[g.perturbation];
                acc.first += *r;
                acc.second += 1;
            }
        }
        std::vector<double> label_means;
        for (const auto& [label, acc] : per_label) {
            const double m = acc.first / static_cast<double>(acc.second);
            label_means.push_back(m);
            pearson_sum[label] += m / static_cast<double>(n_seeds);
        }
        seed_pearson.push_back(mean_defined(label_means));
        if (labels.size() >= 2) {
            for (std::size_t r = 0; r < labels.size(); ++r) {
                half_a.row(static_cast<Index>(r)) /= static_cast<double>(cells_a[r]);
                half_b.row(static_cast<Index>(r)) /= static_cast<double>(cells_b[r]);
            }
            Rng unused(0);
            seed_retrieval.push_back(
                mean_defined(retrieval(half_a, half_b, RetrievalMode::Full, unused)));
        }
    }
    result.pearson_delta = mean_defined(seed_pearson);
    if (!seed_retrieval.empty()) result.retrieval = mean_defined(seed_retrieval);
    result.per_perturbation = std::move(pearson_sum);
    return result;
}

// ---------------------------------------------------------------------------

GeneralBaseline::GeneralBaseline(const ExpressionDataset& ds, std::span<const Index> train_cells,
                                 const ControlIndex& controls) {
    std::map<std::string, std::pair<RowVector, Index>> sums;
    global_ = RowVector::Zero(ds.num_genes());
    Index total = 0;
    for (Index i : train_cells) {
        const CellMeta& c = ds.cells().at(static_cast<std::size_t>(i));
        if (c.is_control()) continue;
        const RowVector d = delta(ds.normalized().row(i), Context{c.cell_line, c.batch}, controls);
        auto [it, inserted] = sums.try_emplace(c.label(), RowVector::Zero(ds.num_genes()), 0);
        it->second.first += d;
        it->second.second += 1;
        global_ += d;
        ++total;
    }
    if (total == 0) throw std::invalid_argument("general baseline: no perturbed training cells");
    global_ /= static_cast<double>(total);
    for (auto& [label, acc] : sums) label_mean_.emplace(label, acc.first / static_cast<double>(acc.second));
}

RowVector GeneralBaseline::predict_delta(const std::vector<std::string>& perturbations) const {
    auto exact = label_mean_.find(perturbation_label(perturbations));
    if (exact != label_mean_.end()) return exact->second;
    if (perturbations.empty()) return RowVector::Zero(global_.size());
    RowVector out = RowVector::Zero(global_.size());
    for (const auto& g : perturbations) {
        auto it = label_mean_.find(g);
        out += it != label_mean_.end() ? it->second : global_;
    }
    return out;
}

RowVector GeneralBaseline::predict_profile(const ConditionRequest& request,
                                           const ControlIndex& controls) const {
    return controls.mean(request.context) + predict_delta(request.perturbations);
}

DeltaPredictor GeneralBaseline::predictor() const {
    return [this](std::span<const ConditionRequest> requests) {
        Matrix out(static_cast<Index>(requests.size()), global_.size());
        for (std::size_t r = 0; r < requests.size(); ++r) {
            out.row(static_cast<Index>(r)) = predict_delta(requests[r].perturbations);
        }
        return out;
    };
}

BatchRidgeBaseline::BatchRidgeBaseline(const ExpressionDataset& ds, std::span<const Index> train_cells,
                                       const ControlIndex& controls, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("batch baseline: lambda must be > 0");
    std::map<Context, std::pair<RowVector, Index>> sums;
    for (Index i : train_cells) {
        const CellMeta& c = ds.cells().at(static_cast<std::size_t>(i));
        if (c.is_control()) continue;
        const Context ctx{c.cell_line, c.batch};
        auto [it, inserted] = sums.try_emplace(ctx, RowVector::Zero(ds.num_genes()), 0);
        it->second.first += delta(ds.normalized().row(i), ctx, controls);
        it->second.second += 1;
    }
    if (sums.empty()) throw std::invalid_argument("batch baseline: no perturbed training cells");
    std::set<std::string> lines;
    for (const auto& [ctx, _] : sums) {
        lines.insert(ctx.cell_line);
        contexts_.push_back(ctx);
    }
    lines_.assign(lines.begin(), lines.end());
    const auto p = static_cast<Index>(1 + lines_.size() + contexts_.size());
    Matrix xtx = Matrix::Zero(p, p);
    Matrix xty = Matrix::Zero(p, ds.num_genes());
    for (std::size_t k = 0; k < contexts_.size(); ++k) {
        const auto& [sum, n] = sums.at(contexts_[k]);
        Vector x = Vector::Zero(p);
        x(0) = 1.0;
        const auto line = std::lower_bound(lines_.begin(), lines_.end(), contexts_[k].cell_line) - lines_.begin();
        x(1 + line) = 1.0;
        x(static_cast<Index>(1 + lines_.size() + k)) = 1.0;
        xtx += static_cast<double>(n) * x * x.transpose();
        xty += x * sum;
    }
    xtx.diagonal().tail(p - 1).array() += lambda;
    coef_ = xtx.ldlt().solve(xty);
    intercept_ = coef_.row(0);
}

RowVector BatchRidgeBaseline::predict_delta(const Context& context) const {
    RowVector out = intercept_;
    auto line = std::lower_bound(lines_.begin(), lines_.end(), context.cell_line);
    if (line != lines_.end() && *line == context.cell_line) out += coef_.row(1 + (line - lines_.begin()));
    auto ctx = std::find(contexts_.begin(), contexts_.end(), context);
    if (ctx != contexts_.end()) {
        out += coef_.row(static_cast<Index>(1 + lines_.size()) + (ctx - contexts_.begin()));
    }
    return out;
}

DeltaPredictor BatchRidgeBaseline::predictor() const {
    return [this](std::span<const ConditionRequest> requests) {
        Matrix out(static_cast<Index>(requests.size()), intercept_.size());
        for (std::size_t r = 0; r < requests.size(); ++r) {
            out.row(static_cast<Index>(r)) = predict_delta(requests[r].context);
        }
        return out;
    };
}

// ---------------------------------------------------------------------------

PerturbationDeltas perturbation_deltas(const ExpressionDataset& ds, std::span<const Index> cells,
                                       const ControlIndex& controls, const DeltaPredictor& predictor) {
    std::map<std::string, std::map<Context, std::vector<Index>>> grouped;
    for (Index i : cells) {
        const CellMeta& c = ds.cells().at(static_cast<std::size_t>(i));
        if (c.is_control()) continue;
        grouped[c.label()][Context{c.cell_line, c.batch}].push_back(i);
    }
    PerturbationDeltas out;
    const auto n = static_cast<Index>(grouped.size());
    out.observed = Matrix::Zero(n, ds.num_genes());
    out.predicted = Matrix::Zero(n, ds.num_genes());
    std::vector<ConditionRequest> requests;
    std::vector<std::pair<Index, double>> request_weight;  // row, weight
    Index row = 0;
    for (const auto& [label, contexts] : grouped) {
        Index total = 0;
        for (const auto& [ctx, members] : contexts) total += static_cast<Index>(members.size());
        for (const auto& [ctx, members] : contexts) {
            const RowVector& xbar = controls.mean(ctx);
            for (Index i : members) out.observed.row(row) += ds.normalized().row(i) - xbar;
            requests.push_back({parse_perturbation(label), ctx});
            request_weight.emplace_back(row, static_cast<double>(members.size()) / static_cast<double>(total));
        }
        out.observed.row(row) /= static_cast<double>(total);
        out.labels.push_back(label);
        out.n_cells.push_back(total);
        ++row;
    }
    if (requests.empty()) return out;
    const Matrix pred = predictor(requests);
    if (pred.rows() != static_cast<Index>(requests.size()) || pred.cols() != ds.num_genes()) {
        throw std::runtime_error("predictor returned " + std::to_string(pred.rows()) + "x" +
                                 std::to_string(pred.cols()) + " for " + std::to_string(requests.size()) +
                                 " requests over " + std::to_string(ds.num_genes()) + " genes");
    }
    for (std::size_t r = 0; r < requests.size(); ++r) {
        out.predicted.row(request_weight[r].first) += request_weight[r].second * pred.row(static_cast<Index>(r));
    }
    return out;
}

std::vector<ReplicateGroup> replicate_groups(const ExpressionDataset& ds, std::span<const Index> cells,
                                             const ControlIndex& controls) {
    std::map<std::pair<std::string, Context>, std::vector<Index>> grouped;
    for (Index i : cells) {
        const CellMeta& c = ds.cells().at(static_cast<std::size_t>(i));
        if (c.is_control()) continue;
        grouped[{c.label(), Context{c.cell_line, c.batch}}].push_back(i);
    }
    std::vector<ReplicateGroup> out;
    for (const auto& [key, members] : grouped) {
        ReplicateGroup g{key.first, key.second, Matrix(static_cast<Index>(members.size()), ds.num_genes())};
        const RowVector& xbar = controls.mean(key.second);
        for (std::size_t r = 0; r < members.size(); ++r) {
            g.deltas.row(static_cast<Index>(r)) = ds.normalized().row(members[r]) - xbar;
        }
        out.push_back(std::move(g));
    }
    return out;
}

MetricAggregates aggregate(std::span<const PerturbationRecord> records) {
    MetricAggregates a;
    std::vector<double> p;
    std::vector<double> r;
    std::vector<double> f;
    for (const auto& rec : records) {
        if (rec.excluded || !rec.pearson_delta) {
            ++a.n_excluded;
            continue;
        }
        ++a.n_perturbations;
        p.push_back(*rec.pearson_delta);
        r.push_back(rec.retrieval);
        f.push_back(rec.fast_retrieval);
    }
    a.pearson_delta = mean_defined(p);
    a.retrieval = mean_defined(r);
    a.fast_retrieval = mean_defined(f);
    return a;
}

ScoredDeltas score_deltas(const PerturbationDeltas& deltas, std::uint64_t seed, Similarity similarity) {
    ScoredDeltas out;
    const auto n = static_cast<Index>(deltas.labels.size());
    std::vector<double> full(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> fast = full;
    if (n >= 2) {
        Rng rng(seed);
        full = retrieval(deltas.predicted, deltas.observed, RetrievalMode::Full, rng, similarity);
        fast = retrieval(deltas.predicted, deltas.observed, RetrievalMode::Fast, rng, similarity);
    }
    for (Index p = 0; p < n; ++p) {
        PerturbationRecord rec;
        rec.perturbation = deltas.labels[static_cast<std::size_t>(p)];
        rec.n_cells = deltas.n_cells[static_cast<std::size_t>(p)];
        rec.pearson_delta = pearson(deltas.predicted.row(p), deltas.observed.row(p));
        rec.excluded = !rec.pearson_delta.has_value();
        if (rec.excluded) log::warn("zero-variance delta for {}; excluded from aggregates", rec.perturbation);
        rec.retrieval = full[static_cast<std::size_t>(p)];
        rec.fast_retrieval = fast[static_cast<std::size_t>(p)];
        out.records.push_back(std::move(rec));
    }
    out.aggregates = aggregate(out.records);
    return out;
}

double mean_pearson_delta(const ExpressionDataset& ds, std::span<const Index> cells,
                          const ControlIndex& controls, const DeltaPredictor& predictor) {
    const PerturbationDeltas d = perturbation_deltas(ds, cells, controls, predictor);
    std::vector<double> values;
    for (Index p = 0; p < static_cast<Index>(d.labels.size()); ++p) {
        if (auto r = pearson(d.predicted.row(p), d.observed.row(p))) values.push_back(*r);
    }
    return mean_defined(values);
}

MetricReport evaluate(const DeltaPredictor& predictor, const ExpressionDataset& ds,
                      const SplitSpec& split, const EvaluateOptions& options) {
    const std::vector<Index> test = split.cells_in(ds, Split::Test);
    if (test.empty()) throw std::invalid_argument("evaluate: the test split has no perturbed cells");
    const std::vector<Index> train = split.cells_in(ds, Split::Train);
    const ControlIndex controls(ds);

    MetricReport report;
    report.model = options.model_name;
    report.split = split.held_out_line ? "cross-cell-line:" + *split.held_out_line : "perturbation";
    report.seed = options.seed;
    report.reproducibility_seeds = options.reproducibility_seeds;

    ScoredDeltas model = score_deltas(perturbation_deltas(ds, test, controls, predictor), options.seed,
                                      options.similarity);
    report.records = std::move(model.records);
    report.aggregates = model.aggregates;

    const GeneralBaseline baseline(ds, train, controls);
    report.general_baseline =
        score_deltas(perturbation_deltas(ds, test, controls, baseline.predictor()), options.seed,
                     options.similarity)
            .aggregates;
    if (options.batch_baseline) {
        const BatchRidgeBaseline ridge(ds, train, controls);
        report.batch_baseline =
            score_deltas(perturbation_deltas(ds, test, controls, ridge.predictor()), options.seed,
                         options.similarity)
                .aggregates;
    }
    const auto groups = replicate_groups(ds, test, controls);
    report.reproducibility = split_half_reproducibility(groups, options.reproducibility_seeds, options.seed);
    return report;
}

}  // namespace txpert
