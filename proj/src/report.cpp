#include "txpert/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace txpert {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json aggregates_to_json(const MetricAggregates& a) {
    return {{"pearson_delta", number(a.pearson_delta)},
            {"retrieval", number(a.retrieval)},
            {"fast_retrieval", number(a.fast_retrieval)},
            {"n_perturbations", a.n_perturbations},
            {"n_excluded", a.n_excluded}};
}

MetricAggregates aggregates_from_json(const json& j) {
    MetricAggregates a;
    a.pearson_delta = number_from(j.at("pearson_delta"));
    a.retrieval = number_from(j.at("retrieval"));
    a.fast_retrieval = number_from(j.at("fast_retrieval"));
    a.n_perturbations = j.at("n_perturbations").get<Index>();
    a.n_excluded = j.at("n_excluded").get<Index>();
    return a;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error("metric report: " + what);
}

void require_number_or_null(const json& obj, const char* key, const std::string& where) {
    require(obj.contains(key), where + " lacks '" + key + "'");
    require(obj.at(key).is_number() || obj.at(key).is_null(), where + "." + key + " must be a number or null");
}

void require_aggregates(const json& j, const std::string& where) {
    require(j.is_object(), where + " must be an object");
    for (const char* k : {"pearson_delta", "retrieval", "fast_retrieval"}) require_number_or_null(j, k, where);
    for (const char* k : {"n_perturbations", "n_excluded"}) {
        require(j.contains(k) && j.at(k).is_number_integer(), where + "." + k + " must be an integer");
    }
}

bool same(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
}

std::string csv_number(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

}  // namespace

json report_to_json(const MetricReport& r) {
    json j;
    j["schema_version"] = MetricReport::kSchemaVersion;
    j["model"] = r.model;
    j["split"] = r.split;
    j["seed"] = r.seed;
    j["reproducibility_seeds"] = r.reproducibility_seeds;
    j["aggregates"] = aggregates_to_json(r.aggregates);
    j["general_baseline"] = aggregates_to_json(r.general_baseline);
    if (r.batch_baseline) {
        json b = aggregates_to_json(*r.batch_baseline);
        b["label"] = "batch-informed ridge (non-canonical)";
        j["batch_baseline"] = std::move(b);
    } else {
        j["batch_baseline"] = nullptr;
    }
    json per = json::object();
    for (const auto& [label, v] : r.reproducibility.per_perturbation) per[label] = number(v);
    j["reproducibility"] = {{"pearson_delta", number(r.reproducibility.pearson_delta)},
                            {"retrieval", number(r.reproducibility.retrieval)},
                            {"skipped_groups", r.reproducibility.skipped_groups},
                            {"per_perturbation", std::move(per)}};
    json records = json::array();
    for (const auto& rec : r.records) {
        records.push_back({{"perturbation", rec.perturbation},
                           {"n_cells", rec.n_cells},
                           {"pearson_delta", rec.pearson_delta ? number(*rec.pearson_delta) : json(nullptr)},
                           {"retrieval", number(rec.retrieval)},
                           {"fast_retrieval", number(rec.fast_retrieval)},
                           {"excluded", rec.excluded}});
    }
    j["records"] = std::move(records);
    return j;
}

void validate_report_json(const json& j) {
    require(j.is_object(), "top level must be an object");
    require(j.contains("schema_version") && j.at("schema_version").is_number_integer(),
            "schema_version missing");
    require(j.at("schema_version").get<int>() == MetricReport::kSchemaVersion,
            "unsupported schema_version " + j.at("schema_version").dump());
    for (const char* k : {"model", "split"}) {
        require(j.contains(k) && j.at(k).is_string(), std::string(k) + " must be a string");
    }
    require(j.contains("seed") && j.at("seed").is_number_unsigned(), "seed must be an unsigned integer");
    require(j.contains("reproducibility_seeds") && j.at("reproducibility_seeds").is_number_integer(),
            "reproducibility_seeds must be an integer");
    require(j.contains("aggregates"), "aggregates missing");
    require_aggregates(j.at("aggregates"), "aggregates");
    require(j.contains("general_baseline"), "general_baseline missing");
    require_aggregates(j.at("general_baseline"), "general_baseline");
    require(j.contains("batch_baseline"), "batch_baseline missing");
    if (!j.at("batch_baseline").is_null()) require_aggregates(j.at("batch_baseline"), "batch_baseline");
    require(j.contains("reproducibility") && j.at("reproducibility").is_object(), "reproducibility missing");
    const json& rep = j.at("reproducibility");
    require_number_or_null(rep, "pearson_delta", "reproducibility");
    require_number_or_null(rep, "retrieval", "reproducibility");
    require(rep.contains("per_perturbation") && rep.at("per_perturbation").is_object(),
            "reproducibility.per_perturbation must be an object");
    require(j.contains("records") && j.at("records").is_array(), "records must be an array");
    for (const json& rec : j.at("records")) {
        require(rec.is_object(), "record must be an object");
        require(rec.contains("perturbation") && rec.at("perturbation").is_string(), "record lacks perturbation");
        require(rec.contains("n_cells") && rec.at("n_cells").is_number_integer(), "record lacks n_cells");
        for (const char* k : {"pearson_delta", "retrieval", "fast_retrieval"}) require_number_or_null(rec, k, "record");
        require(rec.contains("excluded") && rec.at("excluded").is_boolean(), "record lacks excluded");
    }
    const MetricReport r = report_from_json(j);
    const MetricAggregates again = aggregate(r.records);
    require(same(again.pearson_delta, r.aggregates.pearson_delta) && same(again.retrieval, r.aggregates.retrieval) &&
                same(again.fast_retrieval, r.aggregates.fast_retrieval) &&
                again.n_perturbations == r.aggregates.n_perturbations &&
                again.n_excluded == r.aggregates.n_excluded,
            "aggregates do not match the per-perturbation records");
}

MetricReport report_from_json(const json& j) {
    MetricReport r;
    r.model = j.at("model").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.reproducibility_seeds = j.at("reproducibility_seeds").get<Index>();
    r.aggregates = aggregates_from_json(j.at("aggregates"));
    r.general_baseline = aggregates_from_json(j.at("general_baseline"));
    if (!j.at("batch_baseline").is_null()) r.batch_baseline = aggregates_from_json(j.at("batch_baseline"));
    const json& rep = j.at("reproducibility");
    r.reproducibility.pearson_delta = number_from(rep.at("pearson_delta"));
    r.reproducibility.retrieval = number_from(rep.at("retrieval"));
    r.reproducibility.skipped_groups = rep.value("skipped_groups", Index{0});
    for (const auto& [label, v] : rep.at("per_perturbation").items()) {
        r.reproducibility.per_perturbation[label] = number_from(v);
    }
    for (const json& rec : j.at("records")) {
        PerturbationRecord p;
        p.perturbation = rec.at("perturbation").get<std::string>();
        p.n_cells = rec.at("n_cells").get<Index>();
        if (!rec.at("pearson_delta").is_null()) p.pearson_delta = rec.at("pearson_delta").get<double>();
        p.retrieval = number_from(rec.at("retrieval"));
        p.fast_retrieval = number_from(rec.at("fast_retrieval"));
        p.excluded = rec.at("excluded").get<bool>();
        r.records.push_back(std::move(p));
    }
    return r;
}

void save_report(const MetricReport& report, const std::filesystem::path& json_path) {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot write " + json_path.string());
    out << report_to_json(report).dump(2) << '\n';
}

MetricReport load_report(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error("cannot read " + json_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(json_path.string() + ": invalid JSON: " + e.what());
    }
    try {
        validate_report_json(j);
    } catch (const std::exception& e) {
        throw std::runtime_error(json_path.string() + ": " + e.what());
    }
    return report_from_json(j);
}

void save_report_csv(const MetricReport& report, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write " + csv_path.string());
    out << "perturbation,n_cells,pearson_delta,retrieval,fast_retrieval,excluded\n";
    for (const auto& r : report.records) {
        out << r.perturbation << ',' << r.n_cells << ','
            << (r.pearson_delta ? csv_number(*r.pearson_delta) : "") << ',' << csv_number(r.retrieval) << ','
            << csv_number(r.fast_retrieval) << ',' << (r.excluded ? "true" : "false") << '\n';
    }
}

void save_summary_csv(std::span<const SummaryRow> rows, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write " + csv_path.string());
    out << "name,model,split,n_perturbations,pearson_delta,retrieval,fast_retrieval,"
           "baseline_pearson_delta,baseline_retrieval,reproducibility_pearson_delta,"
           "reproducibility_retrieval\n";
    for (const auto& row : rows) {
        const MetricReport& r = row.report;
        out << row.name << ',' << r.model << ',' << r.split << ',' << r.aggregates.n_perturbations << ','
            << csv_number(r.aggregates.pearson_delta) << ',' << csv_number(r.aggregates.retrieval) << ','
            << csv_number(r.aggregates.fast_retrieval) << ',' << csv_number(r.general_baseline.pearson_delta)
            << ',' << csv_number(r.general_baseline.retrieval) << ','
            << csv_number(r.reproducibility.pearson_delta) << ',' << csv_number(r.reproducibility.retrieval)
            << '\n';
    }
}

}  // namespace txpert
