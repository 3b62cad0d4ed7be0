#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rulemt/corpus.hpp"
#include "rulemt/errors.hpp"
#include "rulemt/llm.hpp"
#include "rulemt/mock_backend.hpp"
#include "rulemt/retrieval.hpp"
#include "rulemt/rulecraft.hpp"
#include "rulemt/runner.hpp"
#include "rulemt/translator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rulemt;

namespace {

struct Global {
    std::string config_path;
    std::string backend;
    std::uint64_t seed = 0;
    std::string cache;
    std::string out;
    std::string bundle;
    std::string run_id;
    std::string direction;
    std::string model_id;
    std::string instances_csv;
    int concurrency = 0;

    json cfg = json::object();  // parsed --config document

    // effective values after merging config and flags
    std::string e_backend = "mock:perfect_translator";
    fs::path e_cache = "cache";
    fs::path e_out = "out";
    fs::path e_bundle;
    std::string e_run_id;
    engine::Direction e_direction = engine::Direction::lo_to_hi;
    std::string e_model_id = "default";
    std::vector<std::string> e_instances;
    int e_concurrency = 8;
    std::uint64_t e_seed = 0;
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// CLI flag wins over config key wins over the built-in default.
void merge(Global& g, const CLI::App& app) {
    if (!g.config_path.empty()) {
        std::ifstream in(g.config_path);
        if (!in) throw ConfigError("cannot open config file " + g.config_path);
        try {
            g.cfg = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config file: ") + e.what());
        }
        if (!g.cfg.is_object()) throw ConfigError("config file must hold a JSON object");
    }
    auto used = [&](const std::string& flag) { return app.count(flag) > 0; };

    g.e_backend = used("--backend") ? g.backend : g.cfg.value("backend", g.e_backend);
    g.e_seed = used("--seed") ? g.seed : g.cfg.value("seed", g.e_seed);
    g.e_cache = used("--cache") ? fs::path(g.cache) : fs::path(g.cfg.value("cache", "cache"));
    g.e_out = used("--out") ? fs::path(g.out) : fs::path(g.cfg.value("out", "out"));
    g.e_bundle = used("--bundle") ? fs::path(g.bundle) : fs::path(g.cfg.value("bundle", ""));
    g.e_run_id = used("--run-id") ? g.run_id : g.cfg.value("run_id", "");
    g.e_model_id = used("--model") ? g.model_id : g.cfg.value("model_id", "default");
    g.e_concurrency = used("--concurrency") ? g.concurrency : g.cfg.value("concurrency", 8);
    std::string dir_name =
        used("--direction") ? g.direction : g.cfg.value("direction", "lo_to_hi");
    g.e_direction = engine::direction_from_string(dir_name);
    if (used("--instances")) {
        g.e_instances = split_csv(g.instances_csv);
    } else if (g.cfg.contains("instances")) {
        g.e_instances = g.cfg.at("instances").get<std::vector<std::string>>();
    }
    if (g.e_concurrency < 1) throw ConfigError("concurrency must be >= 1");
}

corpus::Rulebook load_bundle(const Global& g) {
    if (g.e_bundle.empty())
        throw ConfigError("no bundle configured; pass --bundle or set \"bundle\" in the config");
    return corpus::load_rulebook(g.e_bundle);
}

std::shared_ptr<llm::Backend> make_backend(const Global& g,
                                           std::shared_ptr<const corpus::Rulebook> book) {
    if (g.e_backend == "http") {
        llm::HttpConfig http;
        if (g.cfg.contains("http")) {
            const auto& h = g.cfg.at("http");
            http.endpoint_url = h.value("endpoint_url", http.endpoint_url);
            http.api_key_env = h.value("api_key_env", http.api_key_env);
            http.retry_max = h.value("retry_max", http.retry_max);
            http.timeout_s = h.value("timeout_s", http.timeout_s);
        }
        return std::make_shared<llm::HttpBackend>(http);
    }
    if (g.e_backend == "replay") return std::make_shared<llm::ReplayBackend>(true);
    if (g.e_backend.rfind("mock:", 0) == 0) {
        auto profile = llm::mock_profile_from_string(g.e_backend.substr(5));
        if (!book) throw ConfigError("mock backends need a loaded bundle");
        return std::make_shared<llm::MockBackend>(std::move(book), profile, g.e_seed);
    }
    throw ConfigError("unknown backend \"" + g.e_backend + "\" (want http, replay, or mock:<profile>)");
}

llm::Client make_client(const Global& g, std::shared_ptr<const corpus::Rulebook> book) {
    llm::ClientConfig cfg;
    cfg.cache_dir = g.e_cache;
    cfg.concurrency = g.e_concurrency;
    return llm::Client(make_backend(g, std::move(book)), cfg);
}

// Manifest goes to disk before the first backend call.
fs::path start_run(const Global& g, const std::string& experiment, const corpus::Rulebook& book,
                   json experiment_cfg) {
    runner::RunManifest manifest;
    manifest.experiment = experiment;
    manifest.seed = g.e_seed;
    manifest.backend = g.e_backend;
    manifest.dataset_digest = runner::dataset_digest(book);
    manifest.run_id = g.e_run_id.empty()
                          ? runner::default_run_id(experiment, g.e_seed, g.e_backend,
                                                   manifest.dataset_digest)
                          : g.e_run_id;
    manifest.created_at = runner::timestamp_utc();
    manifest.config = {{"backend", g.e_backend},
                       {"seed", g.e_seed},
                       {"bundle", g.e_bundle.string()},
                       {"cache", g.e_cache.string()},
                       {"model_id", g.e_model_id},
                       {"direction", engine::to_string(g.e_direction)},
                       {"concurrency", g.e_concurrency},
                       {"experiment", std::move(experiment_cfg)}};
    auto dir = g.e_out / manifest.run_id;
    runner::write_manifest(manifest, dir);
    return dir;
}

rulecraft::Exemplars load_exemplars_if_any(const Global& g, const std::string& flag_value) {
    std::string path = flag_value;
    if (path.empty()) path = g.cfg.value("exemplars", "");
    if (path.empty()) return {};
    return rulecraft::load_exemplars(path);
}

translator::ApplicationConfig base_app_config(const Global& g) {
    translator::ApplicationConfig app;
    app.direction = g.e_direction;
    app.seed = g.e_seed;
    app.model_id = g.e_model_id;
    return app;
}

// -- subcommand bodies ---------------------------------------------------------

int cmd_ingest(const Global& g, const std::string& save_dir) {
    auto book = load_bundle(g);
    std::cout << "loaded " << book.rules.size() << " rules, " << book.examples.size()
              << " examples (" << book.source_language << " -> " << book.target_language
              << ")\n";
    for (const auto& warning : book.warnings) std::cout << "warning: " << warning << "\n";
    if (!save_dir.empty()) {
        corpus::save_rulebook(book, save_dir);
        std::cout << "wrote normalized bundle to " << save_dir << "\n";
    }
    return 0;
}

json stats_to_json(const corpus::DatasetStats& stats) {
    json per_action = json::object();
    for (const auto& [action, count] : stats.per_action)
        per_action[corpus::to_string(action)] = count;
    json per_difficulty = json::object();
    for (const auto& [difficulty, count] : stats.per_difficulty)
        per_difficulty[corpus::to_string(difficulty)] = count;
    json per_domain = json::object();
    for (const auto& [domain, count] : stats.per_domain)
        per_domain[corpus::to_string(domain)] = count;
    return {{"n_rules", stats.n_rules},
            {"n_examples", stats.n_examples},
            {"n_phrase", stats.n_phrase},
            {"n_sentence", stats.n_sentence},
            {"n_multi_rule", stats.n_multi_rule},
            {"per_action", per_action},
            {"per_difficulty", per_difficulty},
            {"per_domain", per_domain},
            {"avg_example_len_source", stats.avg_example_len_source},
            {"avg_example_len_target", stats.avg_example_len_target}};
}

int cmd_stats(const Global& g) {
    auto book = load_bundle(g);
    std::cout << stats_to_json(corpus::compute_stats(book)).dump(2) << "\n";
    return 0;
}

int cmd_extract(const Global& g, const std::string& input) {
    std::ifstream in(input);
    if (!in) throw ConfigError("cannot open input file " + input);
    std::stringstream buffer;
    buffer << in.rdbuf();

    corpus::ProsePatterns patterns;
    if (g.cfg.contains("extract") && g.cfg.at("extract").contains("patterns"))
        patterns = corpus::ProsePatterns::from_json(g.cfg.at("extract").at("patterns"));

    auto result = corpus::extract_from_prose(buffer.str(), patterns);
    auto dir = g.e_out / (g.e_run_id.empty() ? "extract" : g.e_run_id);
    fs::create_directories(dir);
    std::ofstream entries(dir / "extracted.jsonl");
    for (const auto& entry : result.entries) {
        json triples = json::array();
        for (const auto& triple : entry.examples)
            triples.push_back({{"surface", triple.surface},
                               {"gloss", triple.gloss},
                               {"translation", triple.translation}});
        entries << json{{"rule_text", entry.rule_text}, {"examples", triples}}.dump() << "\n";
    }
    corpus::write_skip_log(result, dir / "extract.log.jsonl");
    std::cout << "extracted " << result.entries.size() << " rules, skipped "
              << result.skips.size() << " regions; outputs in " << dir.string() << "\n";
    return 0;
}

int cmd_convert(const Global& g, const std::string& style_name, const std::string& rules_csv,
                const std::string& exemplars_path, const std::string& save_bundle) {
    auto book = load_bundle(g);
    auto shared = std::make_shared<const corpus::Rulebook>(book);
    auto client = make_client(g, shared);
    auto exemplars = load_exemplars_if_any(g, exemplars_path);

    std::vector<rulecraft::CodeRule::Style> styles;
    if (style_name == "application" || style_name == "both")
        styles.push_back(rulecraft::CodeRule::Style::application);
    if (style_name == "retrieval_check" || style_name == "both")
        styles.push_back(rulecraft::CodeRule::Style::retrieval_check);
    if (styles.empty())
        throw ConfigError("unknown style \"" + style_name +
                          "\" (want application, retrieval_check, or both)");

    std::vector<std::string> ids = split_csv(rules_csv);
    if (ids.empty())
        for (const auto& rule : book.rules) ids.push_back(rule.id);

    auto dir = g.e_out / (g.e_run_id.empty() ? "convert" : g.e_run_id);
    fs::create_directories(dir);
    std::ofstream out(dir / "converted.jsonl");
    std::size_t failures = 0;
    auto find_mutable = [&book](const std::string& id) -> corpus::GrammarRule* {
        for (auto& rule : book.rules)
            if (rule.id == id) return &rule;
        return nullptr;
    };
    for (const auto& id : ids) {
        auto* rule = find_mutable(id);
        if (!rule) throw ConfigError("unknown rule id: " + id);
        for (auto style : styles) {
            const auto& shots = style == rulecraft::CodeRule::Style::application
                                    ? exemplars.conversion_application
                                    : exemplars.conversion_retrieval;
            try {
                auto code = rulecraft::convert_rule(*rule, style, client, shots, g.e_model_id);
                out << json{{"rule_id", id},
                            {"style", rulecraft::to_string(style)},
                            {"code", code.to_json()}}
                           .dump()
                    << "\n";
                if (!save_bundle.empty()) {
                    if (style == rulecraft::CodeRule::Style::application)
                        rule->code_application = code;
                    else
                        rule->code_retrieval = code;
                }
            } catch (const GenerationInvalid& e) {
                ++failures;
                out << json{{"rule_id", id},
                            {"style", rulecraft::to_string(style)},
                            {"error", e.what()}}
                           .dump()
                    << "\n";
            }
        }
    }
    if (!save_bundle.empty()) corpus::save_rulebook(book, save_bundle);
    std::cout << "converted " << ids.size() << " rules (" << failures
              << " failures); outputs in " << dir.string() << "\n";
    if (failures) throw GenerationInvalid(std::to_string(failures) + " rules failed validation");
    return 0;
}

int cmd_igt_gen(const Global& g, const std::string& exemplars_path) {
    auto book = load_bundle(g);
    auto shared = std::make_shared<const corpus::Rulebook>(book);
    auto client = make_client(g, shared);
    auto exemplars = load_exemplars_if_any(g, exemplars_path);

    std::vector<const corpus::ParallelExample*> targets;
    if (g.e_instances.empty()) {
        for (const auto& example : book.examples) targets.push_back(&example);
    } else {
        for (const auto& id : g.e_instances) {
            const auto* example = book.find_example(id);
            if (!example) throw ConfigError("unknown instance id: " + id);
            targets.push_back(example);
        }
    }

    auto dir = g.e_out / (g.e_run_id.empty() ? "igt" : g.e_run_id);
    fs::create_directories(dir);
    std::ofstream out(dir / "igt.jsonl");
    for (const auto* example : targets) {
        auto result = rulecraft::generate_igt(example->target_text, example->lexicon, client,
                                              exemplars.igt, book.gloss_inventory, example->id,
                                              g.e_model_id);
        out << json{{"instance_id", example->id},
                    {"sentence", example->target_text},
                    {"surface", result.igt.surface_tokens},
                    {"gloss", result.igt.gloss_tokens},
                    {"unknown_symbols", result.unknown_symbols}}
                   .dump()
            << "\n";
    }
    std::cout << "generated IGT for " << targets.size() << " sentences; outputs in "
              << dir.string() << "\n";
    return 0;
}

int cmd_induce(const Global& g, const std::string& rule_id, const std::string& exemplars_path) {
    auto book = load_bundle(g);
    auto shared = std::make_shared<const corpus::Rulebook>(book);
    auto client = make_client(g, shared);
    auto exemplars = load_exemplars_if_any(g, exemplars_path);

    rulecraft::InductionRequest request;
    request.cluster_rule_id = rule_id;
    request.shots = exemplars.induction;
    for (const auto* example : book.examples_for_rule(rule_id))
        request.examples.push_back(*example);

    auto induced = rulecraft::induce_rule(request, client, g.e_model_id);
    auto dir = g.e_out / (g.e_run_id.empty() ? "induce" : g.e_run_id);
    fs::create_directories(dir);
    std::ofstream out(dir / "induced.json");
    out << json{{"rule_id", rule_id},
                {"n_examples", request.examples.size()},
                {"induced_text", induced}}
               .dump(2)
        << "\n";
    std::cout << induced << "\n";
    return 0;
}

int cmd_retrieve(const Global& g, const std::string& strategy_name,
                 const std::string& format_name, std::vector<int> ks, int budget) {
    auto book = load_bundle(g);
    auto shared = std::make_shared<const corpus::Rulebook>(book);

    runner::RetrievalTableOptions options;
    options.base.direction = g.e_direction;
    options.base.model_id = g.e_model_id;
    options.base.context_budget = budget;
    options.instance_ids = g.e_instances;
    if (!ks.empty()) options.bm25_ks = std::move(ks);
    if (strategy_name != "all")
        options.strategies = {retrieval::strategy_from_string(strategy_name)};
    if (format_name == "both") {
        options.formats = {retrieval::RuleFormat::text, retrieval::RuleFormat::code};
    } else {
        options.formats = {retrieval::rule_format_from_string(format_name)};
    }

    auto dir = start_run(g, "retrieval", book,
                         {{"strategy", strategy_name},
                          {"format", format_name},
                          {"bm25_ks", options.bm25_ks},
                          {"context_budget", budget}});
    auto client = make_client(g, shared);
    auto report = runner::run_retrieval_table(book, options, client);
    runner::emit_report(report, dir);
    std::cout << "retrieval table done; report in " << dir.string() << "\n";
    return 0;
}

int cmd_translate(const Global& g, bool grid, const std::string& rule_mode,
                  const std::string& rule_format, int n_examples, bool use_igt, bool no_lexicon) {
    auto book = load_bundle(g);
    auto shared = std::make_shared<const corpus::Rulebook>(book);

    auto base = base_app_config(g);
    runner::ApplicationGridOptions options;
    options.instance_ids = g.e_instances;
    if (grid) {
        options.cells = runner::default_grid(g.e_direction, base);
    } else {
        runner::GridCell cell;
        cell.app = base;
        cell.app.rule_mode = translator::rule_mode_from_string(rule_mode);
        cell.app.rule_format = retrieval::rule_format_from_string(rule_format);
        cell.app.n_examples = n_examples;
        cell.app.use_igt = use_igt;
        cell.app.use_lexicon = !no_lexicon;
        cell.name = rule_mode + "|" + rule_format + "|ex" + std::to_string(n_examples) +
                    (use_igt ? "|igt" : "") + (no_lexicon ? "|nolex" : "");
        translator::check_config(cell.app);  // fail fast before any backend call
        options.cells = {cell};
    }

    auto dir = start_run(g, "application", book,
                         {{"grid", grid},
                          {"rule_mode", rule_mode},
                          {"rule_format", rule_format},
                          {"n_examples", n_examples},
                          {"use_igt", use_igt},
                          {"use_lexicon", !no_lexicon}});
    auto client = make_client(g, shared);
    auto report = runner::run_application_grid(book, options, client);
    runner::emit_report(report, dir);
    std::cout << "application grid done; report in " << dir.string() << "\n";
    return 0;
}

int cmd_pilot(const Global& g, std::vector<int> n_values, const std::string& rule_format) {
    auto book = load_bundle(g);
    auto shared = std::make_shared<const corpus::Rulebook>(book);

    runner::PilotOptions options;
    options.app = base_app_config(g);
    options.app.rule_format = retrieval::rule_format_from_string(rule_format);
    options.app.n_examples = 0;
    options.instance_ids = g.e_instances;
    if (!n_values.empty()) {
        options.n_values = std::move(n_values);
    } else if (g.cfg.contains("pilot") && g.cfg.at("pilot").contains("n_values")) {
        options.n_values = g.cfg.at("pilot").at("n_values").get<std::vector<int>>();
    }

    auto dir = start_run(g, "pilot", book,
                         {{"n_values", options.n_values}, {"rule_format", rule_format}});
    auto client = make_client(g, shared);
    auto result = runner::run_pilot(book, options, client);

    runner::RunReport report;
    report.experiment = "pilot";
    for (const auto& point : result.curve) {
        runner::ScoredCell cell;
        cell.cell = "n=" + std::to_string(point.n);
        cell.n_instances = static_cast<int>(result.records.size() / result.curve.size());
        cell.bleu = point.bleu;
        cell.chrf = point.chrf;
        report.cells.push_back(std::move(cell));
    }
    for (const auto& [n, record] : result.records) {
        auto j = translator::to_json(record);
        j["n"] = n;
        report.records.push_back(std::move(j));
    }
    runner::emit_report(report, dir);
    runner::emit_curves_csv(result.curve, dir / "curves.csv");
    std::cout << "pilot sweep done; report in " << dir.string() << "\n";
    return 0;
}

int cmd_pipeline(const Global& g, const std::string& strategy_name,
                 const std::string& retrieval_format, const std::string& application_format,
                 const std::string& combine, bool no_retrieval, int bm25_k, int budget) {
    auto book = load_bundle(g);
    auto shared = std::make_shared<const corpus::Rulebook>(book);

    runner::PipelineOptions options;
    options.with_retrieval = !no_retrieval;
    options.strategy = retrieval::strategy_from_string(strategy_name);
    options.retrieval_format = retrieval::rule_format_from_string(retrieval_format);
    options.application_format = retrieval::rule_format_from_string(application_format);
    if (!combine.empty())
        options.combine = translator::combine_strategy_from_string(combine);
    options.bm25_k = bm25_k;
    options.app = base_app_config(g);
    options.retrieval.direction = g.e_direction;
    options.retrieval.model_id = g.e_model_id;
    options.retrieval.context_budget = budget;
    options.instance_ids = g.e_instances;

    auto dir = start_run(g, "pipeline", book,
                         {{"with_retrieval", options.with_retrieval},
                          {"strategy", strategy_name},
                          {"retrieval_format", retrieval_format},
                          {"application_format", application_format},
                          {"combine", combine},
                          {"bm25_k", bm25_k},
                          {"context_budget", budget}});
    auto client = make_client(g, shared);
    auto report = runner::run_pipeline(book, options, client);
    runner::emit_report(report, dir);
    std::cout << "pipeline done; report in " << dir.string() << "\n";
    return 0;
}

int cmd_report(const std::string& run_dir) {
    fs::path dir(run_dir);
    std::ifstream in(dir / "report.json");
    if (!in) throw ConfigError("no report.json under " + run_dir);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("report.json: ") + e.what());
    }
    auto report = runner::run_report_from_json(j);
    runner::emit_report(report, dir);
    std::cout << "re-emitted report for " << report.experiment << " in " << dir.string() << "\n";
    return 0;
}

int dispatch(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IgtUnavailable& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NotEnoughRules& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TransportError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return 3;
    } catch (const AuthError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return 3;
    } catch (const CacheMiss& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return 3;
    } catch (const ProfileError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "validation failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grammar-book machine translation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    Global g;
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--backend", g.backend, "http | replay | mock:<profile>");
    app.add_option("--seed", g.seed, "global random seed");
    app.add_option("--cache", g.cache, "response cache directory");
    app.add_option("--out", g.out, "output root; runs land in out/{run_id}/");
    app.add_option("--bundle", g.bundle, "rulebook bundle directory");
    app.add_option("--run-id", g.run_id, "override the derived run id");
    app.add_option("--direction", g.direction, "lo_to_hi | hi_to_lo");
    app.add_option("--model", g.model_id, "model id sent to the backend");
    app.add_option("--instances", g.instances_csv, "comma-separated instance ids");
    app.add_option("--concurrency", g.concurrency, "max in-flight backend calls");

    auto* ingest = app.add_subcommand("ingest", "load and validate a bundle");
    std::string ingest_save;
    ingest->add_option("--save", ingest_save, "write the normalized bundle here");

    auto* stats = app.add_subcommand("stats", "dataset statistics as JSON");

    auto* extract = app.add_subcommand("extract", "extract rules from a prose grammar book");
    std::string extract_input;
    extract->add_option("--input", extract_input, "prose text file")->required();

    auto* convert = app.add_subcommand("convert-rules", "rewrite textual rules as code rules");
    std::string convert_style = "both", convert_rules, convert_exemplars, convert_save;
    convert->add_option("--style", convert_style, "application | retrieval_check | both");
    convert->add_option("--rules", convert_rules, "comma-separated rule ids (default all)");
    convert->add_option("--exemplars", convert_exemplars, "exemplars JSON file");
    convert->add_option("--save-bundle", convert_save, "write bundle with code rules attached");

    auto* igt_gen = app.add_subcommand("igt-gen", "generate IGT for example sentences");
    std::string igt_exemplars;
    igt_gen->add_option("--exemplars", igt_exemplars, "exemplars JSON file");

    auto* induce = app.add_subcommand("induce", "induce a rule from its example cluster");
    std::string induce_rule_id, induce_exemplars;
    induce->add_option("--rule-id", induce_rule_id, "rule cluster to induce from")->required();
    induce->add_option("--exemplars", induce_exemplars, "exemplars JSON file");

    auto* retrieve = app.add_subcommand("retrieve", "run the retrieval strategy table");
    std::string retrieve_strategy = "all", retrieve_format = "text";
    std::vector<int> retrieve_ks;
    int retrieve_budget = 8192;
    retrieve->add_option("--strategy", retrieve_strategy, "bm25 | full_book | rule_by_rule | all");
    retrieve->add_option("--format", retrieve_format, "text | code | both");
    retrieve->add_option("--k", retrieve_ks, "bm25 cutoffs");
    retrieve->add_option("--context-budget", retrieve_budget, "estimated token budget");

    auto* translate = app.add_subcommand("translate", "run rule-application translation");
    bool translate_grid = false, translate_igt = false, translate_nolex = false;
    std::string translate_mode = "gold", translate_format = "text";
    int translate_examples = 0;
    translate->add_flag("--grid", translate_grid, "run the full condition grid");
    translate->add_option("--rule-mode", translate_mode, "none | random | gold");
    translate->add_option("--rule-format", translate_format, "text | code");
    translate->add_option("--n-examples", translate_examples, "in-context examples per prompt");
    translate->add_flag("--igt", translate_igt, "ask for an IGT before the translation");
    translate->add_flag("--no-lexicon", translate_nolex, "drop the per-sentence dictionaries");

    auto* pilot = app.add_subcommand("pilot", "irrelevant-rule sweep");
    std::vector<int> pilot_n;
    std::string pilot_format = "text";
    pilot->add_option("--n", pilot_n, "irrelevant-rule counts, ascending");
    pilot->add_option("--rule-format", pilot_format, "text | code");

    auto* pipeline = app.add_subcommand("pipeline", "retrieval feeding rule application");
    std::string pipe_strategy = "rule_by_rule", pipe_rfmt = "text", pipe_afmt = "text",
                pipe_combine;
    bool pipe_norel = false;
    int pipe_k = 5, pipe_budget = 8192;
    pipeline->add_option("--strategy", pipe_strategy, "bm25 | full_book | rule_by_rule");
    pipeline->add_option("--retrieval-format", pipe_rfmt, "text | code");
    pipeline->add_option("--application-format", pipe_afmt, "text | code");
    pipeline->add_option("--combine", pipe_combine,
                         "func_call | inline_template | inline_llm (merge >1 code rules)");
    pipeline->add_flag("--no-retrieval", pipe_norel, "whole book in the prompt instead");
    pipeline->add_option("--bm25-k", pipe_k, "bm25 cutoff");
    pipeline->add_option("--context-budget", pipe_budget, "estimated token budget");

    auto* report = app.add_subcommand("report", "re-emit report files for a finished run");
    std::string report_dir;
    report->add_option("run_dir", report_dir, "out/{run_id} directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    return dispatch([&]() -> int {
        merge(g, app);
        if (ingest->parsed()) return cmd_ingest(g, ingest_save);
        if (stats->parsed()) return cmd_stats(g);
        if (extract->parsed()) return cmd_extract(g, extract_input);
        if (convert->parsed())
            return cmd_convert(g, convert_style, convert_rules, convert_exemplars, convert_save);
        if (igt_gen->parsed()) return cmd_igt_gen(g, igt_exemplars);
        if (induce->parsed()) return cmd_induce(g, induce_rule_id, induce_exemplars);
        if (retrieve->parsed())
            return cmd_retrieve(g, retrieve_strategy, retrieve_format, retrieve_ks,
                                retrieve_budget);
        if (translate->parsed())
            return cmd_translate(g, translate_grid, translate_mode, translate_format,
                                 translate_examples, translate_igt, translate_nolex);
        if (pilot->parsed()) return cmd_pilot(g, pilot_n, pilot_format);
        if (pipeline->parsed())
            return cmd_pipeline(g, pipe_strategy, pipe_rfmt, pipe_afmt, pipe_combine, pipe_norel,
                                pipe_k, pipe_budget);
        if (report->parsed()) return cmd_report(report_dir);
        throw ConfigError("no subcommand given");
    });
}
