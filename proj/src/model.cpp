#include "txpert/model.hpp"

#include "txpert/log.hpp"

#include "json.hpp"

#include <fstream>
#include <iomanip>

namespace txpert {

using nlohmann::json;

ShiftMode parse_shift_mode(const std::string& s) {
    if (s == "latent_shift") return ShiftMode::LatentShift;
    if (s == "delta_on_raw") return ShiftMode::DeltaOnRaw;
    throw std::invalid_argument("unknown model mode '" + s + "' (expected latent_shift or delta_on_raw)");
}

std::string to_string(ShiftMode m) { return m == ShiftMode::LatentShift ? "latent_shift" : "delta_on_raw"; }

void ModelConfig::validate(Index num_genes) const {
    encoder.validate();
    if (num_genes < 1) throw std::invalid_argument("model: no genes");
    if (decoder_hidden_layers < 0 || decoder_width_multiplier < 1) {
        throw std::invalid_argument("model: invalid decoder shape");
    }
    if (mode == ShiftMode::DeltaOnRaw && basal != BasalKind::Identity) {
        throw std::invalid_argument("model: delta_on_raw requires the identity basal encoder");
    }
    if (mode == ShiftMode::LatentShift && basal == BasalKind::Identity &&
        num_genes != encoder.hidden_dim) {
        throw std::invalid_argument("model: latent_shift with identity basal needs hidden dim == " +
                                    std::to_string(num_genes) + " genes");
    }
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train: max epochs must be >= 1");
    if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
}

TxPertModel::TxPertModel(ModelConfig config, std::vector<std::string> genes,
                         std::vector<KnowledgeGraph> graphs)
    : config_(std::move(config)), genes_(std::move(genes)) {
    config_.validate(num_genes());
    for (std::size_t g = 0; g < genes_.size(); ++g) gene_column_.emplace(genes_[g], static_cast<Index>(g));
    const Rng root(config_.init_seed);
    Rng enc_rng = root.fork(1);
    Rng basal_rng = root.fork(2);
    Rng dec_rng = root.fork(3);
    encoder_ = std::make_unique<PerturbationEncoder>(config_.encoder, std::move(graphs), store_, enc_rng);
    const Index d = config_.encoder.hidden_dim;
    basal_ = std::make_unique<BasalEncoder>(config_.basal, num_genes(), config_.basal_hidden, d,
                                            config_.mlp_slope, store_, basal_rng);
    std::vector<Index> widths{d};
    for (Index l = 0; l < config_.decoder_hidden_layers; ++l) {
        widths.push_back(config_.decoder_width_multiplier * d);
    }
    widths.push_back(num_genes());
    decoder_ = Mlp::make(store_, "decoder", widths, config_.mlp_slope, dec_rng);
}

void TxPertModel::check_known(const std::vector<std::string>& perturbations) const {
    for (const auto& g : perturbations) {
        encoder_->require_row(g);
        if (!trained_genes_.empty() && trained_genes_.count(g) == 0) {
            log::debug("gene '{}' was not seen in training; predicting from its graph neighbourhood", g);
        }
    }
}

TxPertModel::Output TxPertModel::forward(ParamBinder& bind, const Matrix& basal,
                                         std::span<const std::vector<std::string>> perturbations) const {
    if (basal.rows() != static_cast<Index>(perturbations.size())) {
        throw std::invalid_argument("forward: " + std::to_string(basal.rows()) + " basal rows for " +
                                    std::to_string(perturbations.size()) + " perturbation sets");
    }
    if (basal.cols() != num_genes()) {
        throw std::invalid_argument("forward: basal width " + std::to_string(basal.cols()) +
                                    " != " + std::to_string(num_genes()) + " genes");
    }
    GradTape& tape = bind.tape();
    const Index batch = basal.rows();
    const Index d = config_.encoder.hidden_dim;
    std::vector<Index> rows;
    std::vector<Index> owner;
    for (std::size_t i = 0; i < perturbations.size(); ++i) {
        check_known(perturbations[i]);
        for (const auto& g : perturbations[i]) {
            rows.push_back(encoder_->require_row(g));
            owner.push_back(static_cast<Index>(i));
        }
    }
    Var z = encoder_->encode(bind);
    Var shift = rows.empty() ? tape.constant(Matrix::Zero(batch, d))
                             : ad::scatter_add_rows(ad::gather_rows(z, rows), owner, batch);
    Var x = tape.constant(basal);
    if (config_.mode == ShiftMode::LatentShift) {
        Var latent = ad::add(basal_->encode(bind, x), shift);
        return {latent, decoder_.forward(bind, latent)};
    }
    return {shift, ad::add(x, decoder_.forward(bind, shift))};
}

Matrix TxPertModel::predict_profiles(const Matrix& basal,
                                     std::span<const std::vector<std::string>> perturbations) const {
    GradTape tape;
    ParamBinder bind(tape);
    Matrix out = forward(bind, basal, perturbations).prediction.value();
    if (config_.clamp_target) {
        for (std::size_t i = 0; i < perturbations.size(); ++i) {
            for (const auto& g : perturbations[i]) {
                auto it = gene_column_.find(g);
                if (it != gene_column_.end()) out(static_cast<Index>(i), it->second) = *config_.clamp_target;
            }
        }
    }
    return out;
}

Matrix TxPertModel::predict_deltas(const ControlIndex& controls,
                                   std::span<const ConditionRequest> requests) const {
    Matrix basal(static_cast<Index>(requests.size()), num_genes());
    std::vector<std::vector<std::string>> perts;
    for (std::size_t r = 0; r < requests.size(); ++r) {
        basal.row(static_cast<Index>(r)) = controls.mean(requests[r].context);
        perts.push_back(requests[r].perturbations);
    }
    return predict_profiles(basal, perts) - basal;
}

DeltaPredictor TxPertModel::predictor(const ControlIndex& controls) const {
    return [this, &controls](std::span<const ConditionRequest> requests) {
        return predict_deltas(controls, requests);
    };
}

std::vector<Matrix> TxPertModel::snapshot() const {
    std::vector<Matrix> out;
    for (const Parameter* p : store_.all()) out.push_back(p->value);
    return out;
}

void TxPertModel::restore(const std::vector<Matrix>& values) {
    auto params = store_.all();
    if (values.size() != params.size()) throw std::invalid_argument("restore: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

// ---------------------------------------------------------------------------

namespace {

struct TrainItem {
    Index cell = -1;  // representative cell (metadata and basal matching)
    std::vector<std::string> perturbations;
    RowVector target;
};

std::vector<TrainItem> training_items(const ExpressionDataset& ds, std::span<const Index> cells,
                                      bool mean_target) {
    std::vector<TrainItem> items;
    if (!mean_target) {
        for (Index i : cells) {
            const CellMeta& c = ds.cells()[static_cast<std::size_t>(i)];
            items.push_back({i, c.perturbations, ds.normalized().row(i)});
        }
        return items;
    }
    std::map<std::pair<std::string, Context>, std::vector<Index>> groups;
    for (Index i : cells) {
        const CellMeta& c = ds.cells()[static_cast<std::size_t>(i)];
        groups[{c.label(), Context{c.cell_line, c.batch}}].push_back(i);
    }
    for (const auto& [key, members] : groups) {
        RowVector mean = RowVector::Zero(ds.num_genes());
        for (Index i : members) mean += ds.normalized().row(i);
        mean /= static_cast<double>(members.size());
        items.push_back({members.front(), ds.cells()[static_cast<std::size_t>(members.front())].perturbations,
                         std::move(mean)});
    }
    return items;
}

}  // namespace

TrainResult train(TxPertModel& model, const ExpressionDataset& ds, const SplitSpec& split,
                  const TrainConfig& config) {
    config.validate();
    if (ds.genes() != model.genes()) throw std::invalid_argument("train: dataset genes differ from model genes");
    validate_split(ds, split);
    const std::vector<Index> train_cells = split.cells_in(ds, Split::Train);
    const std::vector<Index> val_cells = split.cells_in(ds, Split::Val);
    if (train_cells.empty()) throw std::invalid_argument("train: the training split has no perturbed cells");
    const ControlIndex controls(ds, split.controls(ds));

    std::set<std::string> seen;
    for (Index i : train_cells) {
        for (const auto& g : ds.cells()[static_cast<std::size_t>(i)].perturbations) seen.insert(g);
    }
    for (const auto& g : seen) model.encoder().require_row(g);
    model.set_trained_genes(seen);

    std::vector<TrainItem> items = training_items(ds, train_cells, config.mean_target);
    Optimizer optimizer(config.optimizer);
    std::vector<Parameter*> params = model.parameters().all();
    model.parameters().zero_grad();
    Rng rng(config.seed);

    TrainResult result;
    std::vector<Matrix> best = model.snapshot();
    Index since_best = 0;
    bool have_best = false;
    const auto n_items = static_cast<Index>(items.size());
    for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(items);
        double loss_sum = 0.0;
        for (Index start = 0; start < n_items; start += config.batch_size) {
            const Index b = std::min(config.batch_size, n_items - start);
            Matrix basal(b, ds.num_genes());
            Matrix target(b, ds.num_genes());
            std::vector<std::vector<std::string>> perts;
            for (Index r = 0; r < b; ++r) {
                const TrainItem& item = items[static_cast<std::size_t>(start + r)];
                const CellMeta& cell = ds.cells()[static_cast<std::size_t>(item.cell)];
                basal.row(r) = match_control(cell, ds, controls, config.basal_mode, rng).profile;
                target.row(r) = item.target;
                perts.push_back(item.perturbations);
            }
            GradTape tape;
            ParamBinder bind(tape);
            double loss_value = 0.0;
            try {
                Var pred = model.forward(bind, basal, perts).prediction;
                Var loss = ad::mse(pred, target);
                loss_value = loss.value()(0, 0);
                tape.backward(loss);
                optimizer.step(params);
            } catch (const std::exception& e) {
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                         ", item " + std::to_string(start) + ": " + e.what());
            }
            loss_sum += loss_value * static_cast<double>(b);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_mse = loss_sum / static_cast<double>(n_items);
        if (!val_cells.empty()) {
            rec.val_pearson_delta = mean_pearson_delta(ds, val_cells, controls, model.predictor(controls));
        }
        result.history.push_back(rec);
        log::info("epoch {}: train mse {:.6f}, val pearson delta {:.4f}", epoch, rec.train_mse,
                  rec.val_pearson_delta);

        const bool improved = val_cells.empty() || !have_best ||
                              (std::isfinite(rec.val_pearson_delta) &&
                               !(rec.val_pearson_delta <= result.best_val_pearson_delta));
        if (improved) {
            have_best = true;
            best = model.snapshot();
            result.best_epoch = epoch;
            result.best_val_pearson_delta = rec.val_pearson_delta;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            log::info("early stop after epoch {}; best epoch {}", epoch, result.best_epoch);
            break;
        }
    }
    model.restore(best);
    return result;
}

void save_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,train_mse,val_pearson_delta\n" << std::setprecision(17);
    for (const auto& r : history) {
        out << r.epoch << ',' << r.train_mse << ',';
        if (std::isfinite(r.val_pearson_delta)) out << r.val_pearson_delta;
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointFormat = "txpert-checkpoint";
constexpr int kCheckpointVersion = 1;

json encoder_to_json(const EncoderConfig& c) {
    return {{"kind", to_string(c.kind)},
            {"layers", c.layers},
            {"input_dim", c.input_dim},
            {"hidden_dim", c.hidden_dim},
            {"heads", c.heads},
            {"aggregation", to_string(c.aggregation)},
            {"leaky_slope", c.leaky_slope},
            {"expander_degree", c.expander_degree},
            {"edge_weight_features", c.edge_weight_features}};
}

EncoderConfig encoder_from_json(const json& j) {
    EncoderConfig c;
    c.kind = parse_encoder_kind(j.at("kind").get<std::string>());
    c.layers = j.at("layers").get<Index>();
    c.input_dim = j.at("input_dim").get<Index>();
    c.hidden_dim = j.at("hidden_dim").get<Index>();
    c.heads = j.at("heads").get<Index>();
    c.aggregation = parse_head_aggregation(j.at("aggregation").get<std::string>());
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.expander_degree = j.at("expander_degree").get<Index>();
    c.edge_weight_features = j.at("edge_weight_features").get<bool>();
    return c;
}

}  // namespace

void save_checkpoint(const TxPertModel& model, const std::filesystem::path& path) {
    const ModelConfig& c = model.config();
    json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["model"] = {{"mode", to_string(c.mode)},
                  {"basal", to_string(c.basal)},
                  {"basal_hidden", c.basal_hidden},
                  {"decoder_hidden_layers", c.decoder_hidden_layers},
                  {"decoder_width_multiplier", c.decoder_width_multiplier},
                  {"mlp_slope", c.mlp_slope},
                  {"clamp_target", c.clamp_target ? json(*c.clamp_target) : json(nullptr)},
                  {"init_seed", c.init_seed}};
    j["encoder"] = encoder_to_json(c.encoder);
    j["genes"] = model.genes();
    j["trained_genes"] = model.trained_genes();
    json graphs = json::array();
    for (const auto& g : model.encoder().graphs()) {
        json edges = json::array();
        for (const Edge& e : g.edges()) edges.push_back({e.source, e.target, e.weight});
        graphs.push_back({{"name", g.name()}, {"nodes", g.nodes()}, {"edges", std::move(edges)}});
    }
    j["graphs"] = std::move(graphs);
    json params = json::array();
    for (const Parameter* p : model.parameters().all()) {
        std::vector<double> values(p->value.data(), p->value.data() + p->value.size());
        params.push_back({{"name", p->name},
                          {"rows", p->value.rows()},
                          {"cols", p->value.cols()},
                          {"values", std::move(values)}});
    }
    j["parameters"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
}

std::unique_ptr<TxPertModel> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    if (j.value("format", "") != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion) {
        throw std::runtime_error("checkpoint " + path.string() + " has an unsupported format");
    }
    ModelConfig c;
    const json& m = j.at("model");
    c.mode = parse_shift_mode(m.at("mode").get<std::string>());
    c.basal = parse_basal_kind(m.at("basal").get<std::string>());
    c.basal_hidden = m.at("basal_hidden").get<std::vector<Index>>();
    c.decoder_hidden_layers = m.at("decoder_hidden_layers").get<Index>();
    c.decoder_width_multiplier = m.at("decoder_width_multiplier").get<Index>();
    c.mlp_slope = m.at("mlp_slope").get<double>();
    if (!m.at("clamp_target").is_null()) c.clamp_target = m.at("clamp_target").get<double>();
    c.init_seed = m.at("init_seed").get<std::uint64_t>();
    c.encoder = encoder_from_json(j.at("encoder"));

    std::vector<KnowledgeGraph> graphs;
    for (const json& g : j.at("graphs")) {
        std::vector<Edge> edges;
        for (const json& e : g.at("edges")) {
            edges.push_back({e.at(0).get<Index>(), e.at(1).get<Index>(), e.at(2).get<double>()});
        }
        graphs.emplace_back(g.at("name").get<std::string>(), g.at("nodes").get<std::vector<std::string>>(),
                            std::move(edges));
    }
    auto model = std::make_unique<TxPertModel>(c, j.at("genes").get<std::vector<std::string>>(),
                                               std::move(graphs));
    model->set_trained_genes(j.at("trained_genes").get<std::set<std::string>>());
    const json& params = j.at("parameters");
    if (params.size() != model->parameters().size()) {
        throw std::runtime_error("checkpoint parameter count " + std::to_string(params.size()) +
                                 " does not match the model (" +
                                 std::to_string(model->parameters().size()) + ")");
    }
    for (const json& p : params) {
        const auto name = p.at("name").get<std::string>();
        if (!model->parameters().contains(name)) {
            throw std::runtime_error("checkpoint parameter '" + name + "' is unknown to the model");
        }
        Parameter& target = model->parameters().get(name);
        const auto rows = p.at("rows").get<Index>();
        const auto cols = p.at("cols").get<Index>();
        const auto values = p.at("values").get<std::vector<double>>();
        if (rows != target.value.rows() || cols != target.value.cols() ||
            static_cast<Index>(values.size()) != rows * cols) {
            throw std::runtime_error("checkpoint parameter '" + name + "' has the wrong shape");
        }
        target.value = Eigen::Map<const Matrix>(values.data(), rows, cols);
    }
    return model;
}

}  // namespace txpert
