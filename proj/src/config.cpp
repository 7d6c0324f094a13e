#include "txpert/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

namespace txpert {

namespace pt = boost::property_tree;

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("'" + item + "' is not a number");
        }
    }
    return out;
}

namespace {

// Reads typed values from one section, remembering which keys were used so
// that unknown keys can be reported.
class Section {
public:
    Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    std::optional<std::string> raw(const std::string& key) {
        used_.insert(key);
        if (tree_ == nullptr) return std::nullopt;
        auto it = tree_->find(key);
        if (it == tree_->not_found()) return std::nullopt;
        return it->second.data();
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        auto v = raw(key);
        if (!v) return;
        try {
            out = convert<T>(*v);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("[" + name_ + "] " + key + ": cannot parse '" + *v + "'");
        }
    }

    void check_unknown() const {
        if (tree_ == nullptr) return;
        for (const auto& [key, _] : *tree_) {
            if (used_.count(key) == 0) throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
        }
    }

    const std::string& name() const { return name_; }

private:
    template <typename T>
    static T convert(const std::string& s) {
        if constexpr (std::is_same_v<T, std::string>) {
            return s;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (s == "true" || s == "1" || s == "yes") return true;
            if (s == "false" || s == "0" || s == "no") return false;
            throw std::invalid_argument(s);
        } else if constexpr (std::is_same_v<T, double>) {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
            std::size_t used = 0;
            const auto v = std::stoull(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } else {
            static_assert(std::is_same_v<T, Index>);
            std::size_t used = 0;
            const auto v = std::stoll(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return static_cast<Index>(v);
        }
    }

    const pt::ptree* tree_;
    std::string name_;
    std::set<std::string> used_;
};

const pt::ptree* child(const pt::ptree& root, const std::string& name) {
    auto it = root.find(name);
    return it == root.not_found() ? nullptr : &it->second;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.empty() || path.is_absolute() || base.empty()) return path;
    return base / path;
}

template <typename F>
auto wrap(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::vector<std::string> s;
    for (double x : v) s.push_back(fmt_double(x));
    return join(s);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig c;
    std::set<std::string> known{"run", "model", "encoder", "train", "split", "ablation", "eval", "synth"};

    Section run(child(root, "run"), "run");
    if (!run.raw("seed")) throw ConfigError("[run] seed is required");
    run.read("seed", c.seed);
    if (auto v = run.raw("dataset")) c.dataset = resolve(base_dir, *v);
    if (auto v = run.raw("output")) c.output = resolve(base_dir, *v);
    run.read("target_library", c.target_library);
    if (!(c.target_library > 0.0)) throw ConfigError("[run] target_library must be > 0");
    run.check_unknown();

    for (const auto& [name, tree] : root) {
        if (name.rfind("graph.", 0) != 0) {
            if (known.count(name) == 0) throw ConfigError("unknown section [" + name + "]");
            continue;
        }
        Section g(&tree, name);
        GraphSource src;
        src.name = name.substr(6);
        if (src.name.empty()) throw ConfigError("graph section needs a name: [graph.NAME]");
        auto path = g.raw("path");
        if (!path) throw ConfigError("[" + name + "] path is required");
        src.path = resolve(base_dir, *path);
        g.read("symmetrize", src.symmetrize);
        g.check_unknown();
        c.graphs.push_back(std::move(src));
    }

    Section enc(child(root, "encoder"), "encoder");
    EncoderConfig& e = c.model.encoder;
    if (auto v = enc.raw("kind")) e.kind = wrap("[encoder] kind", [&] { return parse_encoder_kind(*v); });
    enc.read("layers", e.layers);
    enc.read("input_dim", e.input_dim);
    enc.read("hidden_dim", e.hidden_dim);
    enc.read("heads", e.heads);
    if (auto v = enc.raw("aggregation")) {
        e.aggregation = wrap("[encoder] aggregation", [&] { return parse_head_aggregation(*v); });
    }
    enc.read("leaky_slope", e.leaky_slope);
    enc.read("expander_degree", e.expander_degree);
    enc.read("edge_weight_features", e.edge_weight_features);
    enc.check_unknown();
    wrap("[encoder]", [&] { e.validate(); return 0; });

    Section model(child(root, "model"), "model");
    ModelConfig& m = c.model;
    if (auto v = model.raw("mode")) m.mode = wrap("[model] mode", [&] { return parse_shift_mode(*v); });
    if (auto v = model.raw("basal")) m.basal = wrap("[model] basal", [&] { return parse_basal_kind(*v); });
    if (auto v = model.raw("basal_hidden")) {
        m.basal_hidden.clear();
        for (double w : parse_double_list(*v)) {
            if (w < 1 || w != static_cast<double>(static_cast<Index>(w))) {
                throw ConfigError("[model] basal_hidden entries must be positive integers");
            }
            m.basal_hidden.push_back(static_cast<Index>(w));
        }
    }
    model.read("decoder_hidden_layers", m.decoder_hidden_layers);
    model.read("decoder_width_multiplier", m.decoder_width_multiplier);
    model.read("mlp_slope", m.mlp_slope);
    if (auto v = model.raw("clamp_target")) {
        if (*v != "none") m.clamp_target = wrap("[model] clamp_target", [&] { return std::stod(*v); });
    }
    model.check_unknown();

    Section tr(child(root, "train"), "train");
    TrainConfig& t = c.train;
    tr.read("batch_size", t.batch_size);
    tr.read("max_epochs", t.max_epochs);
    tr.read("patience", t.patience);
    tr.read("learning_rate", t.optimizer.learning_rate);
    if (auto v = tr.raw("optimizer")) {
        if (*v == "adam") t.optimizer.kind = OptimizerKind::Adam;
        else if (*v == "sgd") t.optimizer.kind = OptimizerKind::Sgd;
        else throw ConfigError("[train] optimizer must be adam or sgd");
    }
    if (auto v = tr.raw("basal_mode")) t.basal_mode = wrap("[train] basal_mode", [&] { return parse_basal_mode(*v); });
    tr.read("mean_target", t.mean_target);
    tr.check_unknown();
    wrap("[train]", [&] { t.validate(); return 0; });

    Section sp(child(root, "split"), "split");
    if (auto v = sp.raw("held_out_line")) {
        if (!v->empty()) c.split.held_out_line = *v;
    }
    if (auto v = sp.raw("ratios")) {
        const auto r = parse_double_list(*v);
        if (r.size() != 3) throw ConfigError("[split] ratios needs three values (train, val, test)");
        c.split.ratios = {r[0], r[1], r[2]};
    }
    sp.check_unknown();

    Section ab(child(root, "ablation"), "ablation");
    if (auto v = ab.raw("rewire")) c.ablation.rewire_fractions = parse_double_list(*v);
    if (auto v = ab.raw("rewire_mode")) {
        c.ablation.rewire_mode = wrap("[ablation] rewire_mode", [&] { return parse_rewire_mode(*v); });
    }
    if (auto v = ab.raw("downsample")) c.ablation.downsample_ratios = parse_double_list(*v);
    if (auto v = ab.raw("graph_subsets")) {
        for (const auto& subset : split_list(*v, ';')) c.ablation.graph_subsets.push_back(split_list(subset, ','));
    }
    ab.check_unknown();
    for (double f : c.ablation.rewire_fractions) {
        if (f < 0.0 || f > 1.0) throw ConfigError("[ablation] rewire fractions must lie in [0, 1]");
    }
    for (double r : c.ablation.downsample_ratios) {
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("[ablation] downsample ratios must lie in (0, 1]");
    }

    Section ev(child(root, "eval"), "eval");
    ev.read("reproducibility_seeds", c.eval.reproducibility_seeds);
    if (auto v = ev.raw("similarity")) c.eval.similarity = wrap("[eval] similarity", [&] { return parse_similarity(*v); });
    ev.read("batch_baseline", c.eval.batch_baseline);
    ev.check_unknown();
    if (c.eval.reproducibility_seeds < 1) throw ConfigError("[eval] reproducibility_seeds must be >= 1");

    Section sy(child(root, "synth"), "synth");
    SyntheticSpec& s = c.synth;
    sy.read("num_genes", s.num_genes);
    sy.read("num_perturbations", s.num_perturbations);
    sy.read("num_cell_lines", s.num_cell_lines);
    sy.read("batches_per_line", s.batches_per_line);
    sy.read("replicates", s.replicates);
    sy.read("controls_per_context", s.controls_per_context);
    sy.read("latent_dim", s.latent_dim);
    sy.read("noise_std", s.noise_std);
    sy.read("effect_scale", s.effect_scale);
    if (auto v = sy.raw("hop_weights")) {
        const auto w = parse_double_list(*v);
        if (w.size() != 3) throw ConfigError("[synth] hop_weights needs three values");
        s.hop_weights = {w[0], w[1], w[2]};
    }
    sy.read("batch_std", s.batch_std);
    sy.read("small_world_k", s.small_world_k);
    sy.read("small_world_beta", s.small_world_beta);
    sy.check_unknown();
    s.seed = c.seed;
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::string to_config_text(const RunConfig& c) {
    std::string out;
    auto line = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    out += "[run]\n";
    line("seed", std::to_string(c.seed));
    if (!c.dataset.empty()) line("dataset", c.dataset.string());
    if (!c.output.empty()) line("output", c.output.string());
    line("target_library", fmt_double(c.target_library));
    for (const auto& g : c.graphs) {
        out += "\n[graph." + g.name + "]\n";
        line("path", g.path.string());
        line("symmetrize", g.symmetrize ? "true" : "false");
    }
    const EncoderConfig& e = c.model.encoder;
    out += "\n[encoder]\n";
    line("kind", to_string(e.kind));
    line("layers", std::to_string(e.layers));
    line("input_dim", std::to_string(e.input_dim));
    line("hidden_dim", std::to_string(e.hidden_dim));
    line("heads", std::to_string(e.heads));
    line("aggregation", to_string(e.aggregation));
    line("leaky_slope", fmt_double(e.leaky_slope));
    line("expander_degree", std::to_string(e.expander_degree));
    line("edge_weight_features", e.edge_weight_features ? "true" : "false");
    const ModelConfig& m = c.model;
    out += "\n[model]\n";
    line("mode", to_string(m.mode));
    line("basal", to_string(m.basal));
    std::vector<std::string> hidden;
    for (Index w : m.basal_hidden) hidden.push_back(std::to_string(w));
    line("basal_hidden", join(hidden));
    line("decoder_hidden_layers", std::to_string(m.decoder_hidden_layers));
    line("decoder_width_multiplier", std::to_string(m.decoder_width_multiplier));
    line("mlp_slope", fmt_double(m.mlp_slope));
    line("clamp_target", m.clamp_target ? fmt_double(*m.clamp_target) : "none");
    const TrainConfig& t = c.train;
    out += "\n[train]\n";
    line("batch_size", std::to_string(t.batch_size));
    line("max_epochs", std::to_string(t.max_epochs));
    line("patience", std::to_string(t.patience));
    line("learning_rate", fmt_double(t.optimizer.learning_rate));
    line("optimizer", t.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd");
    line("basal_mode", to_string(t.basal_mode));
    line("mean_target", t.mean_target ? "true" : "false");
    out += "\n[split]\n";
    if (c.split.held_out_line) line("held_out_line", *c.split.held_out_line);
    line("ratios", join_doubles({c.split.ratios[0], c.split.ratios[1], c.split.ratios[2]}));
    out += "\n[ablation]\n";
    line("rewire", join_doubles(c.ablation.rewire_fractions));
    line("rewire_mode", to_string(c.ablation.rewire_mode));
    if (!c.ablation.downsample_ratios.empty()) line("downsample", join_doubles(c.ablation.downsample_ratios));
    if (!c.ablation.graph_subsets.empty()) {
        std::vector<std::string> subsets;
        for (const auto& s : c.ablation.graph_subsets) subsets.push_back(join(s));
        line("graph_subsets", join(subsets, ";"));
    }
    out += "\n[eval]\n";
    line("reproducibility_seeds", std::to_string(c.eval.reproducibility_seeds));
    line("similarity", to_string(c.eval.similarity));
    line("batch_baseline", c.eval.batch_baseline ? "true" : "false");
    const SyntheticSpec& s = c.synth;
    out += "\n[synth]\n";
    line("num_genes", std::to_string(s.num_genes));
    line("num_perturbations", std::to_string(s.num_perturbations));
    line("num_cell_lines", std::to_string(s.num_cell_lines));
    line("batches_per_line", std::to_string(s.batches_per_line));
    line("replicates", std::to_string(s.replicates));
    line("controls_per_context", std::to_string(s.controls_per_context));
    line("latent_dim", std::to_string(s.latent_dim));
    line("noise_std", fmt_double(s.noise_std));
    line("effect_scale", fmt_double(s.effect_scale));
    line("hop_weights", join_doubles({s.hop_weights[0], s.hop_weights[1], s.hop_weights[2]}));
    line("batch_std", fmt_double(s.batch_std));
    line("small_world_k", std::to_string(s.small_world_k));
    line("small_world_beta", fmt_double(s.small_world_beta));
    return out;
}

}  // namespace txpert
