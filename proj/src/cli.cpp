#include "capens/cli.hpp"

#include "capens/cache.hpp"
#include "capens/captions.hpp"
#include "capens/config.hpp"
#include "capens/digest.hpp"
#include "capens/embedding.hpp"
#include "capens/evaluation.hpp"
#include "capens/manifest.hpp"
#include "capens/report_io.hpp"
#include "parallel.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>

namespace capens {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::MissingEmbedding:
    case ErrorCode::MalformedCompletion:
    case ErrorCode::TooFewCaptions:
    case ErrorCode::InsufficientCaptions:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ZeroVector:
    case ErrorCode::NonFinite:
    case ErrorCode::NonFiniteScore:
        return kExitProvider;
    default:
        return kExitInvalidData;
    }
}

namespace {

/// Raised for command-line and configuration mistakes.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flag values; anything set here wins over the config file.
struct Overrides {
    std::optional<std::string> config;
    std::vector<std::string> sets;
    std::optional<std::string> manifest;
    std::optional<std::string> strategy;
    std::optional<std::size_t> k;
    std::optional<std::string> prompts_file;
    std::optional<std::string> provider;
    std::optional<std::string> captioner;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> cache_dir;
    std::optional<std::string> out;
    std::optional<std::size_t> jobs;
    std::optional<std::size_t> retries;
    bool fail_soft = false;
    bool all_negatives = false;
    bool timestamps = false;
    std::optional<std::size_t> k_min;
    std::optional<std::size_t> k_max;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "Flat 'dotted.key = value' config file");
    sub->add_option("--set", o.sets, "Override a config key: key=value")->allow_extra_args(false);
    sub->add_option("--manifest", o.manifest, "Benchmark manifest (JSON)");
    sub->add_option("--strategy", o.strategy, "base|reversed|ensemble|file");
    sub->add_option("--k", o.k, "Caption count for the ensemble strategy");
    sub->add_option("--prompts-file", o.prompts_file, "Prompt lines for the file strategy");
    sub->add_option("--provider", o.provider, "Embedding provider, e.g. synthetic-hash:dim=64,seed=1");
    sub->add_option("--captioner", o.captioner, "Captioner, e.g. http:endpoint=URL,model=NAME");
    sub->add_option("--seed", o.seed, "Run seed");
    sub->add_option("--cache-dir", o.cache_dir, "Cache directory");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--jobs", o.jobs, "Worker threads");
    sub->add_option("--retries", o.retries, "Retry budget for malformed caption replies");
    sub->add_flag("--fail-soft", o.fail_soft, "Skip failing instances instead of aborting");
    sub->add_flag("--timestamps", o.timestamps, "Record wall-clock times in report.json");
}

RunConfig resolve(const Overrides& o) {
    RunConfig cfg;
    try {
        if (o.config) cfg = load_run_config(*o.config);
        for (const auto& kv : o.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (o.manifest) cfg.manifest = *o.manifest;
    if (o.strategy) cfg.strategy = *o.strategy;
    if (o.k) cfg.k = *o.k;
    if (o.prompts_file) cfg.prompts_file = *o.prompts_file;
    if (o.provider) cfg.provider = *o.provider;
    if (o.captioner) cfg.captioner = *o.captioner;
    if (o.seed) cfg.seed = *o.seed;
    if (o.cache_dir) cfg.cache_dir = *o.cache_dir;
    if (o.out) cfg.out = *o.out;
    if (o.jobs) cfg.jobs = *o.jobs;
    if (o.retries) cfg.retries = *o.retries;
    if (o.fail_soft) cfg.fail_soft = true;
    if (o.all_negatives) cfg.all_negatives = true;
    if (o.timestamps) cfg.timestamps = true;
    if (o.k_min) cfg.k_min = *o.k_min;
    if (o.k_max) cfg.k_max = *o.k_max;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw UsageError(what);
}

template <typename T, typename Fn>
T usage_on_error(Fn fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InvalidArgument) throw;
        throw UsageError(e.what());
    }
}

/// Objects shared by the commands that evaluate.
struct Session {
    BenchmarkManifest manifest;
    std::unique_ptr<Cache> cache;
    std::unique_ptr<EmbeddingProvider> provider;
    std::unique_ptr<Captioner> captioner;
    std::unique_ptr<CaptionLibrary> captions;

    RunOptions options;
};

CaptionLibraryOptions caption_options(const RunConfig& cfg) {
    CaptionLibraryOptions opts;
    if (!cfg.instruction_file.empty()) opts.instruction_template = read_file(cfg.instruction_file);
    opts.temperature = cfg.temperature;
    opts.top_p = cfg.top_p;
    opts.retries = cfg.retries;
    return opts;
}

Session open_session(const RunConfig& cfg, bool need_provider) {
    require(!cfg.manifest.empty(), "--manifest is required");
    Session s;
    s.manifest = load_manifest(cfg.manifest);
    s.cache = std::make_unique<Cache>(cfg.cache_dir);
    if (need_provider) {
        require(!cfg.provider.empty(), "--provider is required");
        const auto spec = usage_on_error<EmbeddingProviderSpec>(
            [&] { return EmbeddingProviderSpec::parse(cfg.provider); });
        s.provider = make_provider(spec, s.cache.get());
    }
    if (!cfg.captioner.empty()) {
        s.captioner = usage_on_error<std::unique_ptr<Captioner>>(
            [&] { return make_captioner(cfg.captioner); });
    }
    s.captions = std::make_unique<CaptionLibrary>(s.captioner.get(), s.cache.get(),
                                                  caption_options(cfg));
    s.options.jobs = cfg.jobs;
    s.options.fail_soft = cfg.fail_soft;
    s.options.seed = cfg.seed;
    s.options.timestamps = cfg.timestamps;
    return s;
}

PromptStrategy strategy_of(const RunConfig& cfg) {
    return usage_on_error<PromptStrategy>(
        [&] { return PromptStrategy::parse(cfg.strategy, cfg.k, cfg.prompts_file); });
}

void write_output(const RunConfig& cfg, const std::string& name, std::string_view contents) {
    write_file_atomic((fs::path(cfg.out) / name).string(), contents);
}

int cmd_captions(const RunConfig& cfg, std::ostream& out) {
    require(!cfg.captioner.empty(), "--captioner is required");
    require(cfg.k >= 1 && cfg.k <= kMaxCaptions, "--k must be in 1..16");
    auto s = open_session(cfg, false);

    std::vector<CompoundNoun> nouns;
    std::set<std::string> seen;
    for (const auto& inst : s.manifest.instances) {
        if (seen.insert(inst.compound_noun.lowered()).second) nouns.push_back(inst.compound_noun);
    }
    std::atomic<std::size_t> generated{0};
    std::atomic<std::size_t> cached{0};
    std::atomic<std::size_t> flagged{0};
    auto report = [&] {
        out << generated << " generated, " << cached << " cached, " << flagged << " flagged\n";
    };
    try {
        detail::parallel_for(nouns.size(), cfg.jobs, [&](std::size_t i) {
            if (s.captions->cached(nouns[i], cfg.k)) {
                ++cached;
                return;
            }
            const auto set = s.captions->captions_for(nouns[i], cfg.k);
            ++generated;
            flagged += set.flagged();
        });
    } catch (...) {
        report();
        throw;
    }
    report();
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    auto s = open_session(cfg, true);
    const auto strategy = strategy_of(cfg);
    auto report = run_benchmark(s.manifest, strategy, *s.provider, s.captions.get(), s.options);
    if (cfg.all_negatives) {
        report.all_negatives_recall = all_negatives_retrieval(s.manifest, strategy, *s.provider,
                                                              s.captions.get(), s.options);
    }
    write_output(cfg, "report.json", dump_report(report));
    write_output(cfg, "instances.csv", instances_csv(report));
    write_output(cfg, "categories.csv", categories_csv(category_breakdown(report)));

    for (const auto& row : category_breakdown(report).rows) {
        if (row.stats.count == 0) continue;
        out << to_string(row.category) << ": " << row.stats.count << " instances, "
            << row.stats.errors << " errors\n";
    }
    if (!report.failed_instances.empty()) {
        err << "warning: " << report.failed_instances.size() << " instance(s) failed:";
        for (const auto& id : report.failed_instances) err << ' ' << id;
        err << '\n';
        out << "failed=" << report.failed_instances.size() << '\n';
    }
    if (report.all_negatives_recall) {
        out << "all_negatives_recall@1=" << format_pct(*report.all_negatives_recall) << '\n';
    }
    out << "accuracy=" << format_pct(report.accuracy) << '\n';
    return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
    if (cfg.k_min > cfg.k_max) {
        throw UsageError("--k-min (" + std::to_string(cfg.k_min) + ") exceeds --k-max (" +
                         std::to_string(cfg.k_max) + ")");
    }
    require(cfg.k_min >= 1 && cfg.k_max <= kMaxCaptions, "sweep range must lie in 1..16");
    auto s = open_session(cfg, true);
    const auto sweep = sweep_caption_count(s.manifest, cfg.k_min, cfg.k_max, *s.provider,
                                           *s.captions, s.options);
    write_output(cfg, "sweep.csv", sweep_csv(sweep));
    write_output(cfg, "sweep.json", sweep_to_json(sweep).dump(2) + "\n");
    for (const auto& row : sweep.rows) {
        out << "k=" << row.k << " accuracy=" << format_pct(row.accuracy) << '\n';
    }
    return kExitOk;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::string>& paths, std::ostream& out) {
    require(!paths.empty(), "report needs at least one report.json path");
    std::vector<EvaluationReport> reports;
    for (const auto& p : paths) {
        std::string raw;
        try {
            raw = read_file(p);
        } catch (const Error&) {
            throw Error(ErrorCode::IoError, "cannot read report " + p);
        }
        const json j = json::parse(raw, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::MalformedJson, "report " + p + " is not JSON");
        reports.push_back(report_from_json(j));
    }
    const auto rows = compare_reports(reports);
    write_output(cfg, "compare.csv", comparison_csv(rows));
    out << comparison_table(rows);
    return kExitOk;
}

int cmd_validate(const RunConfig& cfg, bool official, std::ostream& out) {
    require(!cfg.manifest.empty(), "--manifest is required");
    const auto m = load_manifest(cfg.manifest);
    const auto violations =
        validate_manifest(m, official ? ManifestProfile::Official : ManifestProfile::Generic);
    for (const auto& v : violations) {
        out << (v.instance_id.empty() ? std::string("<manifest>") : v.instance_id) << ": "
            << v.rule << ": " << v.detail << '\n';
    }
    out << m.instances.size() << " instances, " << m.all_images().size() << " images, "
        << violations.size() << " violation(s)\n";
    return violations.empty() ? kExitOk : kExitInvalidData;
}

int cmd_random_baseline(const RunConfig& cfg, std::size_t trials, std::size_t dim,
                        std::ostream& out) {
    require(!cfg.manifest.empty(), "--manifest is required");
    require(trials >= 1, "--trials must be >= 1");
    const auto m = load_manifest(cfg.manifest);
    const auto r = random_baseline(m, trials, cfg.seed, dim, cfg.jobs);
    out << "random_baseline mean=" << format_pct(r.mean) << " se=" << format_pct(r.standard_error)
        << " trials=" << trials << '\n';
    return kExitOk;
}

int cmd_classify(const RunConfig& cfg, const std::string& classes_path, std::ostream& out) {
    require(!classes_path.empty(), "--classes is required");
    require(!cfg.provider.empty(), "--provider is required");
    const json doc = json::parse(read_file(classes_path), nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::MalformedJson, classes_path + " is not JSON");

    std::vector<CompoundNoun> classes;
    std::vector<LabeledImage> images;
    try {
        for (const auto& c : doc.at("classes")) classes.emplace_back(c.get<std::string>());
        for (const auto& ji : doc.at("images")) {
            LabeledImage li;
            li.image.id = ji.at("id").get<std::string>();
            li.image.uri = ji.at("uri").get<std::string>();
            if (ji.contains("sha256") && !ji["sha256"].is_null()) {
                li.image.content_hash = ji["sha256"].get<std::string>();
            }
            if (ji.contains("label") && !ji["label"].is_null()) li.label = ji["label"].get<std::string>();
            images.push_back(std::move(li));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("bad classification input: ") + e.what());
    }

    Cache cache(cfg.cache_dir);
    const auto spec = usage_on_error<EmbeddingProviderSpec>(
        [&] { return EmbeddingProviderSpec::parse(cfg.provider); });
    auto provider = make_provider(spec, &cache);
    std::unique_ptr<Captioner> captioner;
    if (!cfg.captioner.empty()) captioner = make_captioner(cfg.captioner);
    CaptionLibrary captions(captioner.get(), &cache, caption_options(cfg));
    RunOptions options;
    options.jobs = cfg.jobs;

    const auto report = classify_zero_shot(classes, images, strategy_of(cfg), *provider, &captions,
                                           options);
    write_output(cfg, "classification.json", classification_to_json(report).dump(2) + "\n");
    std::size_t ties = 0;
    for (const auto& p : report.predictions) ties += p.tie ? 1 : 0;
    out << report.predictions.size() << " images, " << ties << " tie(s)\n";
    if (report.top1_accuracy) out << "top1=" << format_pct(*report.top1_accuracy) << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Zero-shot compound-noun retrieval with caption ensembles", "capens"};
    app.require_subcommand(1);

    Overrides o;
    bool official = false;
    std::size_t trials = 25;
    std::size_t dim = 64;
    std::string classes_path;
    std::vector<std::string> report_paths;

    auto* captions = app.add_subcommand("captions", "Generate and cache caption sets");
    add_common(captions, o);

    auto* eval = app.add_subcommand("eval", "Evaluate a manifest and write report files");
    add_common(eval, o);
    eval->add_flag("--all-negatives", o.all_negatives, "Also rank against every benchmark image");

    auto* sweep = app.add_subcommand("sweep", "Accuracy as a function of caption count");
    add_common(sweep, o);
    sweep->add_option("--k-min", o.k_min, "Smallest caption count");
    sweep->add_option("--k-max", o.k_max, "Largest caption count");

    auto* report = app.add_subcommand("report", "Merge report.json files into a comparison table");
    add_common(report, o);
    report->add_option("reports", report_paths, "report.json files");

    auto* validate = app.add_subcommand("validate", "Check a manifest's invariants");
    add_common(validate, o);
    validate->add_flag("--official", official, "Also check the official 400/1200/199-106-95 profile");

    auto* random = app.add_subcommand("random-baseline", "Chance-level accuracy estimate");
    add_common(random, o);
    random->add_option("--trials", trials, "Number of re-seeded runs");
    random->add_option("--dim", dim, "Synthetic embedding dimension");

    auto* classify = app.add_subcommand("classify", "Zero-shot classification over class names");
    add_common(classify, o);
    classify->add_option("--classes", classes_path, "JSON with classes and images");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        const RunConfig cfg = resolve(o);
        if (*captions) return cmd_captions(cfg, out);
        if (*eval) return cmd_eval(cfg, out, err);
        if (*sweep) return cmd_sweep(cfg, out);
        if (*report) return cmd_report(cfg, report_paths, out);
        if (*validate) return cmd_validate(cfg, official, out);
        if (*random) return cmd_random_baseline(cfg, trials, dim, out);
        if (*classify) return cmd_classify(cfg, classes_path, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitUsage;
}

}  // namespace capens
