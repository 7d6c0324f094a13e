#include "txpert/cli.hpp"

#include "txpert/log.hpp"
#include "txpert/report.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <fmt/format.h>
#include <fstream>
#include <iostream>

namespace txpert {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Streams forked from the run seed.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kRewireStream = 2;
constexpr std::uint64_t kDownsampleStream = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string dataset;
    std::string split;
    std::string checkpoint;
    std::string rewire;
    std::string downsample;
    std::string held_out_line;
    std::string encoder;
    std::string graphs;
    // build-graph
    std::string edges;
    std::string embeddings;
    double top_fraction = 0.01;
    std::optional<Index> max_in;
    bool symmetrize = false;
    std::string name;
    // report
    std::vector<std::string> reports;
};

struct Command {
    const Options& opt;
    const std::vector<std::string>& args;
    RunConfig config;
    fs::path out;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
};

std::string to_hex(const unsigned char* data, unsigned int n) {
    std::string s;
    for (unsigned int i = 0; i < n; ++i) s += fmt::format("{:02x}", data[i]);
    return s;
}

RunConfig make_config(const Options& o) {
    RunConfig c;
    if (!o.config.empty()) {
        if (!fs::exists(o.config)) throw ConfigError("config file '" + o.config + "' does not exist");
        c = load_config(o.config);
    } else if (!o.seed) {
        throw ConfigError("a seed is required: pass --seed or --config with [run] seed");
    }
    if (o.seed) {
        c.seed = *o.seed;
        c.synth.seed = *o.seed;
    }
    if (!o.held_out_line.empty()) c.split.held_out_line = o.held_out_line;
    if (!o.encoder.empty()) {
        try {
            c.model.encoder.kind = parse_encoder_kind(o.encoder);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("--encoder: ") + e.what());
        }
        c.model.encoder.validate();
    }
    c.model.init_seed = c.seed;
    c.train.seed = c.seed;
    return c;
}

std::optional<double> single_value(const std::string& flag, const std::string& text) {
    if (text.empty()) return std::nullopt;
    const auto v = parse_double_list(text);
    if (v.size() != 1) throw ConfigError(flag + " takes one value for this command");
    return v[0];
}

fs::path dataset_dir(const Command& ctx) {
    fs::path p = !ctx.opt.dataset.empty() ? fs::path(ctx.opt.dataset)
                 : !ctx.config.dataset.empty() ? ctx.config.dataset
                                               : ctx.out / "dataset";
    if (!fs::is_directory(p)) {
        throw DataError("dataset directory '" + p.string() +
                        "' not found; run `txpert synth` or set [run] dataset / --dataset");
    }
    return p;
}

ExpressionDataset load_data(Command& ctx) {
    const fs::path dir = dataset_dir(ctx);
    ctx.inputs.push_back(dir);
    try {
        return load_dataset(dir, ctx.config.target_library);
    } catch (const std::exception& e) {
        throw DataError("dataset '" + dir.string() + "': " + e.what());
    }
}

std::vector<KnowledgeGraph> load_graphs(Command& ctx) {
    std::vector<GraphSource> sources = ctx.config.graphs;
    if (sources.empty()) {
        const fs::path dir = dataset_dir(ctx).parent_path() / "graphs";
        if (fs::is_directory(dir)) {
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.path().extension() == ".tsv") {
                    sources.push_back({entry.path().stem().string(), entry.path(), false});
                }
            }
            std::sort(sources.begin(), sources.end(),
                      [](const GraphSource& a, const GraphSource& b) { return a.name < b.name; });
        }
    }
    if (sources.empty()) {
        throw DataError("no graphs: add [graph.NAME] sections to the config or place edge lists in " +
                        (dataset_dir(ctx).parent_path() / "graphs").string());
    }
    if (!ctx.opt.graphs.empty()) {
        std::vector<GraphSource> chosen;
        for (const auto& name : split_list(ctx.opt.graphs)) {
            auto it = std::find_if(sources.begin(), sources.end(), [&](const auto& s) { return s.name == name; });
            if (it == sources.end()) throw ConfigError("--graphs: unknown graph '" + name + "'");
            chosen.push_back(*it);
        }
        sources = std::move(chosen);
    }
    std::vector<KnowledgeGraph> graphs;
    for (const auto& s : sources) {
        if (!fs::exists(s.path)) throw DataError("graph '" + s.name + "': file " + s.path.string() + " not found");
        ctx.inputs.push_back(s.path);
        try {
            graphs.push_back(load_edge_list(s.path, {s.symmetrize, s.name}));
        } catch (const std::exception& e) {
            throw DataError("graph '" + s.name + "': " + e.what());
        }
    }
    return graphs;
}

std::vector<KnowledgeGraph> perturb_graphs(std::vector<KnowledgeGraph> graphs, const RunConfig& c,
                                           std::optional<double> rewire_fraction,
                                           std::optional<double> keep_ratio) {
    const Rng root(c.seed);
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        if (keep_ratio && *keep_ratio < 1.0) {
            Rng rng = root.fork(kDownsampleStream).fork(i);
            graphs[i] = downsample(graphs[i], *keep_ratio, rng);
        }
        if (rewire_fraction && *rewire_fraction > 0.0) {
            Rng rng = root.fork(kRewireStream).fork(i);
            graphs[i] = rewire(graphs[i], *rewire_fraction, c.ablation.rewire_mode, rng);
        }
    }
    return graphs;
}

SplitSpec make_split(const ExpressionDataset& ds, const RunConfig& c) {
    Rng rng = Rng(c.seed).fork(kSplitStream);
    SplitSpec split = c.split.held_out_line ? split_cross_cell_line(ds, *c.split.held_out_line, rng)
                                            : split_by_perturbation(ds, rng, c.split.ratios);
    validate_split(ds, split);
    return split;
}

fs::path split_path(const Command& ctx) {
    return ctx.opt.split.empty() ? ctx.out / "split.json" : fs::path(ctx.opt.split);
}

SplitSpec read_split(Command& ctx, const ExpressionDataset& ds) {
    const fs::path p = split_path(ctx);
    if (!fs::exists(p)) throw DataError("split file '" + p.string() + "' not found; run `txpert split` first");
    ctx.inputs.push_back(p);
    try {
        SplitSpec s = load_split(p);
        validate_split(ds, s);
        return s;
    } catch (const std::exception& e) {
        throw DataError("split '" + p.string() + "': " + e.what());
    }
}

EvaluateOptions eval_options(const RunConfig& c, std::string model_name) {
    EvaluateOptions o;
    o.seed = c.seed;
    o.reproducibility_seeds = c.eval.reproducibility_seeds;
    o.similarity = c.eval.similarity;
    o.batch_baseline = c.eval.batch_baseline;
    o.model_name = std::move(model_name);
    return o;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
}

void expand(const fs::path& p, std::vector<fs::path>& files) {
    if (fs::is_directory(p)) {
        std::vector<fs::path> inner;
        for (const auto& e : fs::recursive_directory_iterator(p)) {
            if (e.is_regular_file()) inner.push_back(e.path());
        }
        std::sort(inner.begin(), inner.end());
        files.insert(files.end(), inner.begin(), inner.end());
    } else if (fs::is_regular_file(p)) {
        files.push_back(p);
    }
}

json hashed(const std::vector<fs::path>& paths) {
    std::vector<fs::path> files;
    for (const auto& p : paths) expand(p, files);
    json out = json::array();
    for (const auto& f : files) out.push_back({{"path", f.string()}, {"sha256", sha256_file(f)}});
    return out;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const Command& ctx, const std::string& command) {
    json m;
    m["command"] = command;
    m["arguments"] = ctx.args;
    m["seed"] = ctx.config.seed;
    m["config"] = to_config_text(ctx.config);
    m["inputs"] = hashed(ctx.inputs);
    m["outputs"] = hashed(ctx.outputs);
    m["versions"] = {{"txpert", kVersion},
                     {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                                   NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH)},
                     {"spdlog", fmt::format("{}.{}.{}", SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH)},
                     {"compiler", __VERSION__}};
    m["timestamp"] = utc_timestamp();
    write_text(ctx.out / ("manifest-" + command + ".json"), m.dump(2) + "\n");
}

void save_metrics(Command& ctx, const MetricReport& report, const fs::path& dir, const std::string& stem) {
    save_report(report, dir / (stem + ".json"));
    save_report_csv(report, dir / (stem + ".csv"));
    ctx.outputs.push_back(dir / (stem + ".json"));
    ctx.outputs.push_back(dir / (stem + ".csv"));
}

// ---- commands

void cmd_build_graph(Command& ctx) {
    const Options& o = ctx.opt;
    if (o.edges.empty() == o.embeddings.empty()) {
        throw ConfigError("build-graph needs exactly one of --edges or --embeddings");
    }
    KnowledgeGraph g;
    const fs::path in = o.edges.empty() ? fs::path(o.embeddings) : fs::path(o.edges);
    if (!fs::exists(in)) throw DataError("input file '" + in.string() + "' not found");
    ctx.inputs.push_back(in);
    const std::string name = o.name.empty() ? in.stem().string() : o.name;
    try {
        if (!o.edges.empty()) {
            g = load_edge_list(in, {o.symmetrize, name});
        } else {
            const auto [genes, emb] = load_embeddings(in);
            EmbeddingGraphOptions eo;
            eo.top_fraction = o.top_fraction;
            eo.max_in = o.max_in;
            eo.symmetrize = o.symmetrize;
            eo.name = name;
            g = build_from_embeddings(genes, emb, eo);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const std::exception& e) {
        throw DataError(in.string() + ": " + e.what());
    }
    const auto rewire_fraction = single_value("--rewire", o.rewire);
    const auto keep = single_value("--downsample", o.downsample);
    if ((rewire_fraction || keep) && !o.seed && o.config.empty()) {
        throw ConfigError("--rewire/--downsample need --seed or --config");
    }
    g = perturb_graphs({g}, ctx.config, rewire_fraction, keep).front();
    const fs::path path = ctx.out / (name + ".tsv");
    save_edge_list(g, path);
    ctx.outputs.push_back(path);
    log::info("graph '{}': {} nodes, {} edges -> {}", name, g.num_nodes(), g.num_edges(), path.string());
}

void cmd_synth(Command& ctx) {
    const SyntheticData data = synth_generate(ctx.config.synth);
    const fs::path dir = ctx.out / "dataset";
    fs::create_directories(dir);
    fs::create_directories(ctx.out / "graphs");
    save_dataset(data.dataset, dir);
    const fs::path graph = ctx.out / "graphs" / "synthetic.tsv";
    save_edge_list(data.truth.graph.renamed("synthetic"), graph);
    ctx.outputs.push_back(dir);
    ctx.outputs.push_back(graph);
    log::info("synthetic dataset: {} cells x {} genes", data.dataset.num_cells(), data.dataset.num_genes());
}

void cmd_split(Command& ctx) {
    const ExpressionDataset ds = load_data(ctx);
    const SplitSpec split = make_split(ds, ctx.config);
    const fs::path p = split_path(ctx);
    save_split(split, p);
    ctx.outputs.push_back(p);
}

struct Trained {
    std::unique_ptr<TxPertModel> model;
    TrainResult result;
};

Trained fit(const RunConfig& c, const ExpressionDataset& ds, const SplitSpec& split,
            std::vector<KnowledgeGraph> graphs) {
    Trained t;
    try {
        t.model = std::make_unique<TxPertModel>(c.model, ds.genes(), std::move(graphs));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    t.result = train(*t.model, ds, split, c.train);
    return t;
}

void save_trained(Command& ctx, const Trained& t, const fs::path& dir) {
    save_checkpoint(*t.model, dir / "model.json");
    save_history_csv(t.result.history, dir / "history.csv");
    ctx.outputs.push_back(dir / "model.json");
    ctx.outputs.push_back(dir / "history.csv");
}

void cmd_train(Command& ctx) {
    const ExpressionDataset ds = load_data(ctx);
    const SplitSpec split = read_split(ctx, ds);
    auto graphs = perturb_graphs(load_graphs(ctx), ctx.config, single_value("--rewire", ctx.opt.rewire),
                                 single_value("--downsample", ctx.opt.downsample));
    const Trained t = fit(ctx.config, ds, split, std::move(graphs));
    save_trained(ctx, t, ctx.out);
    write_text(ctx.out / "config.ini", to_config_text(ctx.config));
    ctx.outputs.push_back(ctx.out / "config.ini");
    log::info("best epoch {} (val pearson delta {:.4f})", t.result.best_epoch, t.result.best_val_pearson_delta);
}

void cmd_eval(Command& ctx) {
    const ExpressionDataset ds = load_data(ctx);
    const SplitSpec split = read_split(ctx, ds);
    const fs::path ckpt = ctx.opt.checkpoint.empty() ? ctx.out / "model.json" : fs::path(ctx.opt.checkpoint);
    if (!fs::exists(ckpt)) throw DataError("checkpoint '" + ckpt.string() + "' not found; run `txpert train` first");
    ctx.inputs.push_back(ckpt);
    std::unique_ptr<TxPertModel> model;
    try {
        model = load_checkpoint(ckpt);
    } catch (const std::exception& e) {
        throw DataError("checkpoint '" + ckpt.string() + "': " + e.what());
    }
    if (model->genes() != ds.genes()) throw DataError("checkpoint genes differ from the dataset genes");
    const ControlIndex controls(ds);
    const MetricReport report =
        evaluate(model->predictor(controls), ds, split, eval_options(ctx.config, to_string(model->config().encoder.kind)));
    save_metrics(ctx, report, ctx.out, "metrics");
    log::info("test pearson delta {:.4f}, general baseline {:.4f}", report.aggregates.pearson_delta,
              report.general_baseline.pearson_delta);
}

void cmd_baseline(Command& ctx) {
    const ExpressionDataset ds = load_data(ctx);
    const SplitSpec split = read_split(ctx, ds);
    const ControlIndex controls(ds);
    const GeneralBaseline baseline(ds, split.cells_in(ds, Split::Train), controls);
    const MetricReport report = evaluate(baseline.predictor(), ds, split, eval_options(ctx.config, "general-baseline"));
    save_metrics(ctx, report, ctx.out, "baseline");
}

std::string point_value(double v) { return fmt::format("{}", v); }

void write_summary(Command& ctx, const std::vector<SummaryRow>& rows) {
    save_summary_csv(rows, ctx.out / "summary.csv");
    json j;
    j["schema_version"] = MetricReport::kSchemaVersion;
    j["rows"] = json::array();
    for (const auto& r : rows) j["rows"].push_back({{"name", r.name}, {"report", report_to_json(r.report)}});
    write_text(ctx.out / "summary.json", j.dump(2) + "\n");
    ctx.outputs.push_back(ctx.out / "summary.csv");
    ctx.outputs.push_back(ctx.out / "summary.json");
}

void cmd_ablate(Command& ctx) {
    const RunConfig& c = ctx.config;
    const ExpressionDataset ds = load_data(ctx);
    SplitSpec split;
    if (fs::exists(split_path(ctx))) {
        split = read_split(ctx, ds);
    } else {
        split = make_split(ds, c);
        save_split(split, split_path(ctx));
        ctx.outputs.push_back(split_path(ctx));
    }
    const auto base = load_graphs(ctx);

    struct Point {
        std::string name;
        std::optional<double> rewire;
        std::optional<double> keep;
        std::vector<std::string> subset;
    };
    std::vector<Point> points;
    const bool rewire_flag = !ctx.opt.rewire.empty();
    const bool downsample_flag = !ctx.opt.downsample.empty();
    const auto fractions = rewire_flag ? parse_double_list(ctx.opt.rewire) : c.ablation.rewire_fractions;
    const auto ratios = downsample_flag ? parse_double_list(ctx.opt.downsample) : c.ablation.downsample_ratios;
    if (rewire_flag || !downsample_flag) {
        for (double f : fractions) {
            if (f < 0.0 || f > 1.0) throw ConfigError("--rewire fractions must lie in [0, 1]");
            points.push_back({"rewire-" + point_value(f), f, std::nullopt, {}});
        }
    }
    if (downsample_flag || !rewire_flag) {
        for (double r : ratios) {
            if (!(r > 0.0 && r <= 1.0)) throw ConfigError("--downsample ratios must lie in (0, 1]");
            points.push_back({"downsample-" + point_value(r), std::nullopt, r, {}});
        }
    }
    if (!rewire_flag && !downsample_flag) {
        for (const auto& subset : c.ablation.graph_subsets) {
            std::string name = "graphs";
            for (const auto& g : subset) name += "-" + g;
            points.push_back({name, std::nullopt, std::nullopt, subset});
        }
    }
    if (points.empty()) throw ConfigError("ablate: nothing to sweep");

    const ControlIndex controls(ds);
    std::vector<SummaryRow> rows;
    for (const auto& p : points) {
        std::vector<KnowledgeGraph> graphs;
        if (p.subset.empty()) {
            graphs = base;
        } else {
            for (const auto& name : p.subset) {
                auto it = std::find_if(base.begin(), base.end(), [&](const auto& g) { return g.name() == name; });
                if (it == base.end()) throw ConfigError("[ablation] graph_subsets: unknown graph '" + name + "'");
                graphs.push_back(*it);
            }
        }
        graphs = perturb_graphs(std::move(graphs), c, p.rewire, p.keep);
        log::info("ablation point {}", p.name);
        const fs::path dir = ctx.out / p.name;
        fs::create_directories(dir);
        const Trained t = fit(c, ds, split, std::move(graphs));
        save_trained(ctx, t, dir);
        const MetricReport report =
            evaluate(t.model->predictor(controls), ds, split, eval_options(c, to_string(c.model.encoder.kind)));
        save_metrics(ctx, report, dir, "metrics");
        rows.push_back({p.name, report});
    }
    write_summary(ctx, rows);
}

void cmd_report(Command& ctx) {
    std::vector<SummaryRow> rows;
    for (const auto& r : ctx.opt.reports) {
        const fs::path p(r);
        if (!fs::exists(p)) throw DataError("report '" + r + "' not found");
        ctx.inputs.push_back(p);
        MetricReport report;
        try {
            report = load_report(p);
        } catch (const std::exception& e) {
            throw DataError(e.what());
        }
        std::string name = p.stem().string();
        if ((name == "metrics" || name == "baseline") && p.has_parent_path() && !p.parent_path().filename().empty()) {
            name = p.parent_path().filename().string() + "/" + name;
        }
        rows.push_back({name, std::move(report)});
    }
    write_summary(ctx, rows);
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config, "INI run configuration");
    sub->add_option("--seed", o.seed, "run seed (overrides [run] seed)");
    sub->add_option("--out", o.out, "output directory")->required();
}

void add_data(CLI::App* sub, Options& o) {
    sub->add_option("--dataset", o.dataset, "dataset directory (default: OUT/dataset)");
    sub->add_option("--split", o.split, "split file (default: OUT/split.json)");
}

}  // namespace

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> md(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!md || EVP_DigestInit_ex(md.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(md.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_DigestFinal_ex(md.get(), digest, &n);
    return to_hex(digest, n);
}

int run_cli(const std::vector<std::string>& args) {
    log::init_from_env();
    Options o;
    CLI::App app{"Graph-informed perturbation-effect prediction", "txpert"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    auto* build = app.add_subcommand("build-graph", "edge list or embedding kNN graph -> OUT/NAME.tsv");
    add_common(build, o);
    build->add_option("--edges", o.edges, "source/target/weight TSV");
    build->add_option("--embeddings", o.embeddings, "gene/v1..vD TSV");
    build->add_option("--top-fraction", o.top_fraction, "fraction of gene pairs kept")->check(CLI::Range(0.0, 1.0));
    build->add_option("--max-in", o.max_in, "incoming-edge cap per gene");
    build->add_flag("--symmetrize", o.symmetrize, "add reverse edges");
    build->add_option("--name", o.name, "graph name (default: input stem)");
    build->add_option("--rewire", o.rewire, "rewire fraction");
    build->add_option("--downsample", o.downsample, "edge keep ratio");

    auto* synth = app.add_subcommand("synth", "synthetic dataset -> OUT/dataset, OUT/graphs");
    add_common(synth, o);

    auto* split = app.add_subcommand("split", "train/val/test split -> OUT/split.json");
    add_common(split, o);
    add_data(split, o);
    split->add_option("--held-out-line", o.held_out_line, "cross-cell-line split");

    auto* trn = app.add_subcommand("train", "train a model -> OUT/model.json, OUT/history.csv");
    add_common(trn, o);
    add_data(trn, o);
    trn->add_option("--encoder", o.encoder, "gatv2, hybrid, exphormer, exphormer-mg, multilayer");
    trn->add_option("--graphs", o.graphs, "comma-separated graph names");
    trn->add_option("--rewire", o.rewire, "rewire fraction applied to every graph");
    trn->add_option("--downsample", o.downsample, "edge keep ratio applied to every graph");

    auto* ev = app.add_subcommand("eval", "test-split metrics -> OUT/metrics.json, OUT/metrics.csv");
    add_common(ev, o);
    add_data(ev, o);
    ev->add_option("--checkpoint", o.checkpoint, "model checkpoint (default: OUT/model.json)");

    auto* base = app.add_subcommand("baseline", "general baseline metrics -> OUT/baseline.json");
    add_common(base, o);
    add_data(base, o);

    auto* abl = app.add_subcommand("ablate", "retrain per sweep point -> OUT/<point>/, OUT/summary.csv");
    add_common(abl, o);
    add_data(abl, o);
    abl->add_option("--encoder", o.encoder, "encoder kind");
    abl->add_option("--graphs", o.graphs, "comma-separated graph names");
    abl->add_option("--rewire", o.rewire, "comma-separated rewire fractions");
    abl->add_option("--downsample", o.downsample, "comma-separated keep ratios");

    auto* rep = app.add_subcommand("report", "merge metric reports -> OUT/summary.csv, OUT/summary.json");
    add_common(rep, o);
    rep->add_option("reports", o.reports, "metric report JSON files")->required();

    std::vector<std::string> argv_storage{"txpert"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    CLI::App* cmd = app.get_subcommands().front();
    try {
        Command ctx{o, args, {}, fs::path(o.out), {}, {}};
        // build-graph without sampling and report are seed-free.
        if ((cmd == build || cmd == rep) && o.config.empty() && !o.seed) {
            ctx.config = RunConfig{};
        } else {
            ctx.config = make_config(o);
        }
        fs::create_directories(ctx.out);
        if (!o.config.empty()) ctx.inputs.push_back(o.config);
        const std::string name = cmd->get_name();
        if (cmd == build) cmd_build_graph(ctx);
        else if (cmd == synth) cmd_synth(ctx);
        else if (cmd == split) cmd_split(ctx);
        else if (cmd == trn) cmd_train(ctx);
        else if (cmd == ev) cmd_eval(ctx);
        else if (cmd == base) cmd_baseline(ctx);
        else if (cmd == abl) cmd_ablate(ctx);
        else cmd_report(ctx);
        write_manifest(ctx, name);
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "txpert " << cmd->get_name() << ": configuration error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "txpert " << cmd->get_name() << ": data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "txpert " << cmd->get_name() << ": error: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace txpert
