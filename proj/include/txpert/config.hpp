#pragma once

#include "txpert/data.hpp"
#include "txpert/metrics.hpp"
#include "txpert/model.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace txpert {

/// Invalid or incomplete configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GraphSource {
    std::string name;
    std::filesystem::path path;
    bool symmetrize = false;
};

struct SplitConfig {
    std::optional<std::string> held_out_line;
    std::array<double, 3> ratios = kDefaultSplitRatios;
};

struct AblationSpec {
    std::vector<double> rewire_fractions{0.0, 0.25, 0.5, 0.75, 1.0};
    RewireMode rewire_mode = RewireMode::Both;
    std::vector<double> downsample_ratios;
    std::vector<std::vector<std::string>> graph_subsets;
};

struct EvalConfig {
    Index reproducibility_seeds = 5;
    Similarity similarity = Similarity::Pearson;
    bool batch_baseline = true;
};

/// Everything a CLI run needs. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path dataset;
    std::filesystem::path output;
    double target_library = kTargetLibrarySize;
    std::vector<GraphSource> graphs;
    ModelConfig model;
    TrainConfig train;
    SplitConfig split;
    AblationSpec ablation;
    EvalConfig eval;
    SyntheticSpec synth;  // `graph` is never read from or written to the file
};

/// INI-style text: `[section]` headers, `key = value` lines, `#` comments.
/// `[run] seed` is mandatory. Throws ConfigError naming the offending key.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const RunConfig& config);

std::vector<double> parse_double_list(const std::string& s);
std::vector<std::string> split_list(const std::string& s, char sep = ',');

}  // namespace txpert
