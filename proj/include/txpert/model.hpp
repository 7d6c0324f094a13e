#pragma once

#include "txpert/data.hpp"
#include "txpert/encoders.hpp"
#include "txpert/metrics.hpp"
#include "txpert/optim.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace txpert {

enum class ShiftMode { LatentShift, DeltaOnRaw };
ShiftMode parse_shift_mode(const std::string& s);
std::string to_string(ShiftMode m);

struct ModelConfig {
    ShiftMode mode = ShiftMode::LatentShift;
    BasalKind basal = BasalKind::Mlp;
    std::vector<Index> basal_hidden{128};
    /// Decoder: hidden layers of width multiplier * d, then n outputs.
    Index decoder_hidden_layers = 2;
    Index decoder_width_multiplier = 4;
    double mlp_slope = 0.01;
    EncoderConfig encoder;
    /// When set, the predicted expression of each perturbed gene is replaced
    /// by this value after decoding.
    std::optional<double> clamp_target;
    /// Seeds parameter initialization and the expander graph.
    std::uint64_t init_seed = 0;

    void validate(Index num_genes) const;
};

struct TrainConfig {
    Index batch_size = 64;
    Index max_epochs = 30;
    Index patience = 5;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;
    BasalMode basal_mode = BasalMode::Average;
    /// Train on (perturbation, cell line, batch) mean profiles instead of single cells.
    bool mean_target = false;

    void validate() const;
};

struct EpochRecord {
    Index epoch = 0;
    double train_mse = 0.0;
    double val_pearson_delta = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    std::vector<EpochRecord> history;
    Index best_epoch = 0;
    double best_val_pearson_delta = std::numeric_limits<double>::quiet_NaN();
};

/// Basal encoder, graph perturbation encoder and decoder combined by a shift
/// in latent space (or, in delta_on_raw mode, a decoded delta added to x).
class TxPertModel {
public:
    TxPertModel(ModelConfig config, std::vector<std::string> genes, std::vector<KnowledgeGraph> graphs);

    TxPertModel(const TxPertModel&) = delete;
    TxPertModel& operator=(const TxPertModel&) = delete;

    const ModelConfig& config() const { return config_; }
    const std::vector<std::string>& genes() const { return genes_; }
    Index num_genes() const { return static_cast<Index>(genes_.size()); }
    ParameterStore& parameters() { return store_; }
    const ParameterStore& parameters() const { return store_; }
    const PerturbationEncoder& encoder() const { return *encoder_; }
    const BasalEncoder& basal_encoder() const { return *basal_; }
    const Mlp& decoder() const { return decoder_; }

    struct Output {
        Var latent;      // decoder input
        Var prediction;  // y_hat
    };

    /// One row per (basal row, perturbation set) pair. Every gene must be a
    /// node of some graph.
    Output forward(ParamBinder& bind, const Matrix& basal,
                   std::span<const std::vector<std::string>> perturbations) const;

    /// Predicted profiles, with the optional target clamp applied.
    Matrix predict_profiles(const Matrix& basal,
                            std::span<const std::vector<std::string>> perturbations) const;
    /// y_hat - x_bar(c, b) using the averaged control of each request as basal input.
    Matrix predict_deltas(const ControlIndex& controls, std::span<const ConditionRequest> requests) const;
    DeltaPredictor predictor(const ControlIndex& controls) const;

    /// Genes seen as perturbations during training; informs prediction logs.
    const std::set<std::string>& trained_genes() const { return trained_genes_; }
    void set_trained_genes(std::set<std::string> genes) { trained_genes_ = std::move(genes); }

    std::vector<Matrix> snapshot() const;
    void restore(const std::vector<Matrix>& values);

private:
    ModelConfig config_;
    std::vector<std::string> genes_;
    std::map<std::string, Index> gene_column_;
    ParameterStore store_;
    std::unique_ptr<PerturbationEncoder> encoder_;
    std::unique_ptr<BasalEncoder> basal_;
    Mlp decoder_;
    std::set<std::string> trained_genes_;

    void check_known(const std::vector<std::string>& perturbations) const;
};

/// The training loop: sample a batch of perturbed cells, pair each with a
/// batch-matched control, recompute Z, decode, take the MSE and update.
/// Validation Pearson delta is computed every epoch; the best epoch's
/// parameters are restored before returning.
TrainResult train(TxPertModel& model, const ExpressionDataset& ds, const SplitSpec& split,
                  const TrainConfig& config);

/// Header `epoch,train_mse,val_pearson_delta`.
void save_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

/// JSON checkpoint holding the configuration, genes, graphs and every
/// parameter (name, shape, row-major values). Doubles round-trip exactly.
void save_checkpoint(const TxPertModel& model, const std::filesystem::path& path);
std::unique_ptr<TxPertModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace txpert
