#include "capens/report_io.hpp"

#include "capens/error.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace capens {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
}

Category category_from(const std::string& s) {
    if (s == "either") return Category::Either;
    if (s == "both") return Category::Both;
    if (s == "none") return Category::None;
    if (s == "unlabeled") return Category::Unlabeled;
    throw Error(ErrorCode::SchemaViolation, "unknown category '" + s + "' in report");
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string num(double v) { return fmt::format("{}", v); }

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string strategy_label(const json& s) {
    std::string label = s.value("kind", "unknown");
    if (s.contains("k")) label += fmt::format("(k={})", s["k"].get<std::size_t>());
    return label;
}

}  // namespace

std::string format_pct(double value) { return fmt::format("{:.2f}", value); }

json report_to_json(const EvaluationReport& r) {
    json cats = json::object();
    for (const auto& [cat, stats] : r.per_category) {
        cats[std::string(to_string(cat))] = {{"count", stats.count},
                                             {"errors", stats.errors},
                                             {"accuracy", opt(stats.accuracy)},
                                             {"mean_winning_similarity",
                                              opt(stats.mean_winning_similarity)}};
    }
    json instances = json::array();
    for (const auto& rec : r.per_instance) {
        json ji{{"id", rec.score.instance_id},
                {"compound_noun", rec.compound_noun},
                {"category", std::string(to_string(rec.category))},
                {"s_pos", rec.score.s_pos},
                {"s_neg1", rec.score.s_neg1},
                {"s_neg2", rec.score.s_neg2},
                {"win", rec.score.win}};
        if (!rec.prompts.empty()) ji["prompts"] = rec.prompts;
        instances.push_back(std::move(ji));
    }
    json meta{{"seed", r.meta.seed}, {"k", r.meta.k}};
    if (r.meta.started_at) meta["started_at"] = *r.meta.started_at;
    if (r.meta.finished_at) meta["finished_at"] = *r.meta.finished_at;

    json j{{"benchmark", {{"name", r.benchmark_name}, {"version", r.benchmark_version}}},
           {"strategy", r.strategy},
           {"provider", r.provider_id},
           {"model", r.model_id},
           {"accuracy", r.accuracy},
           {"per_category", std::move(cats)},
           {"mean_winning_similarity", opt(r.mean_winning_similarity)},
           {"per_instance", std::move(instances)},
           {"failed_instances", r.failed_instances},
           {"run", std::move(meta)}};
    if (r.all_negatives_recall) j["all_negatives_recall_at_1"] = *r.all_negatives_recall;
    return j;
}

EvaluationReport report_from_json(const json& j) {
    EvaluationReport r;
    try {
        r.benchmark_name = j.at("benchmark").at("name").get<std::string>();
        r.benchmark_version = j.at("benchmark").at("version").get<std::string>();
        r.strategy = j.at("strategy");
        r.provider_id = j.at("provider").get<std::string>();
        r.model_id = j.at("model").get<std::string>();
        r.accuracy = j.at("accuracy").get<double>();
        for (const auto& [name, stats] : j.at("per_category").items()) {
            r.per_category[category_from(name)] = {stats.at("count").get<std::size_t>(),
                                                   stats.at("errors").get<std::size_t>(),
                                                   opt_double(stats, "accuracy"),
                                                   opt_double(stats, "mean_winning_similarity")};
        }
        r.mean_winning_similarity = opt_double(j, "mean_winning_similarity");
        for (const auto& ji : j.at("per_instance")) {
            InstanceRecord rec;
            rec.score = {ji.at("id").get<std::string>(), ji.at("s_pos").get<double>(),
                         ji.at("s_neg1").get<double>(), ji.at("s_neg2").get<double>(),
                         ji.at("win").get<int>()};
            rec.compound_noun = ji.at("compound_noun").get<std::string>();
            rec.category = category_from(ji.at("category").get<std::string>());
            if (ji.contains("prompts")) rec.prompts = ji["prompts"].get<std::vector<std::string>>();
            r.per_instance.push_back(std::move(rec));
        }
        r.failed_instances = j.value("failed_instances", std::vector<std::string>{});
        r.all_negatives_recall = opt_double(j, "all_negatives_recall_at_1");
        const auto& run = j.at("run");
        r.meta.seed = run.at("seed").get<std::uint64_t>();
        r.meta.k = run.at("k").get<std::size_t>();
        if (run.contains("started_at")) r.meta.started_at = run["started_at"].get<std::string>();
        if (run.contains("finished_at")) r.meta.finished_at = run["finished_at"].get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("not an evaluation report: ") + e.what());
    }
    return r;
}

std::string dump_report(const EvaluationReport& report) {
    return report_to_json(report).dump(2) + "\n";
}

std::string instances_csv(const EvaluationReport& report) {
    std::string out = "id,cn,category,s_pos,s_neg1,s_neg2,win\n";
    for (const auto& rec : report.per_instance) {
        out += fmt::format("{},{},{},{},{},{},{}\n", csv_field(rec.score.instance_id),
                           csv_field(rec.compound_noun), to_string(rec.category),
                           num(rec.score.s_pos), num(rec.score.s_neg1), num(rec.score.s_neg2),
                           rec.score.win);
    }
    return out;
}

std::string categories_csv(const CategoryTable& table) {
    std::string out = "category,count,errors,accuracy,mean_winning_similarity\n";
    auto row = [&out](std::string_view name, const CategoryStats& s) {
        out += fmt::format("{},{},{},{},{}\n", name, s.count, s.errors, opt_num(s.accuracy),
                           opt_num(s.mean_winning_similarity));
    };
    for (const auto& r : table.rows) row(to_string(r.category), r.stats);
    row("total", table.total);
    return out;
}

std::string sweep_csv(const SweepReport& sweep) {
    std::string out = "k,accuracy\n";
    for (const auto& row : sweep.rows) out += fmt::format("{},{}\n", row.k, format_pct(row.accuracy));
    return out;
}

json sweep_to_json(const SweepReport& sweep) {
    json rows = json::array();
    for (const auto& row : sweep.rows) rows.push_back({{"k", row.k}, {"accuracy", row.accuracy}});
    return json{{"benchmark", {{"name", sweep.benchmark_name}, {"version", sweep.benchmark_version}}},
                {"provider", sweep.provider_id},
                {"model", sweep.model_id},
                {"captioner", sweep.captioner},
                {"rows", std::move(rows)}};
}

json classification_to_json(const ClassificationReport& report) {
    json preds = json::array();
    for (const auto& p : report.predictions) {
        preds.push_back({{"image", p.image_id},
                         {"predicted", report.classes[p.predicted]},
                         {"tie", p.tie},
                         {"scores", p.scores}});
    }
    return json{{"classes", report.classes},
                {"predictions", std::move(preds)},
                {"top1_accuracy", opt(report.top1_accuracy)}};
}

std::vector<ComparisonRow> compare_reports(const std::vector<EvaluationReport>& reports) {
    std::vector<ComparisonRow> rows;
    if (reports.empty()) return rows;
    for (const auto& r : reports) {
        const auto& first = reports.front();
        if (r.benchmark_name != first.benchmark_name ||
            r.benchmark_version != first.benchmark_version) {
            throw Error(ErrorCode::SchemaViolation,
                        "reports come from different benchmark versions: " + first.benchmark_name +
                            "@" + first.benchmark_version + " and " + r.benchmark_name + "@" +
                            r.benchmark_version);
        }
        rows.push_back({strategy_label(r.strategy), r.model_id, r.accuracy,
                        r.mean_winning_similarity});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        return a.accuracy > b.accuracy;
    });
    return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "strategy,model,accuracy,mean_winning_similarity\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{}\n", csv_field(r.strategy), csv_field(r.model),
                           format_pct(r.accuracy), opt_num(r.mean_winning_similarity));
    }
    return out;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows) {
    std::size_t ws = 8;  // "Strategy"
    std::size_t wm = 5;  // "Model"
    for (const auto& r : rows) {
        ws = std::max(ws, r.strategy.size());
        wm = std::max(wm, r.model.size());
    }
    std::string out = fmt::format("{:<{}}  {:<{}}  {:>8}  {:>8}\n", "Strategy", ws, "Model", wm,
                                  "Acc.", "Win sim.");
    out += std::string(ws + wm + 24, '-') + "\n";
    for (const auto& r : rows) {
        const std::string sim =
            r.mean_winning_similarity ? fmt::format("{:.4f}", *r.mean_winning_similarity) : "-";
        out += fmt::format("{:<{}}  {:<{}}  {:>8}  {:>8}\n", r.strategy, ws, r.model, wm,
                           format_pct(r.accuracy), sim);
    }
    return out;
}

}  // namespace capens
