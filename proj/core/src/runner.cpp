#include "rulemt/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "rulemt/errors.hpp"
#include "rulemt/rand.hpp"
#include "rulemt/rulecraft.hpp"
#include "rulemt/text.hpp"

namespace rulemt::runner {

nlohmann::json to_json(const RunManifest& manifest) {
    return {{"run_id", manifest.run_id},
            {"experiment", manifest.experiment},
            {"config", manifest.config},
            {"seed", manifest.seed},
            {"backend", manifest.backend},
            {"dataset_digest", manifest.dataset_digest},
            {"created_at", manifest.created_at}};
}

std::string dataset_digest(const corpus::Rulebook& book) {
    nlohmann::json j;
    j["source_language"] = book.source_language;
    j["target_language"] = book.target_language;
    j["gloss_inventory"] = book.gloss_inventory;
    auto rules = nlohmann::json::array();
    for (const auto& rule : book.rules) rules.push_back(corpus::rule_to_json(rule));
    auto examples = nlohmann::json::array();
    for (const auto& example : book.examples)
        examples.push_back(corpus::example_to_json(example));
    j["rules"] = std::move(rules);
    j["examples"] = std::move(examples);
    return llm::sha256_hex(j.dump());
}

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string default_run_id(const std::string& experiment, std::uint64_t seed,
                           const std::string& backend, const std::string& digest) {
    std::string safe;
    for (char c : backend) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '.' || c == '-' || c == '_';
        safe += ok ? c : '-';
    }
    return experiment + "-s" + std::to_string(seed) + "-" + safe + "-" + digest.substr(0, 8);
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "manifest.json");
    if (!out) throw ConfigError("cannot write manifest under " + dir.string());
    out << to_json(manifest).dump(2) << "\n";
}

metrics::MetricConfig metric_config_for(engine::Direction direction) {
    metrics::MetricConfig cfg;
    cfg.tokenization = direction == engine::Direction::hi_to_lo ? text::Tokenization::whitespace
                                                                : text::Tokenization::mixed;
    return cfg;
}

std::pair<double, double> score_translations(
    const std::vector<translator::TranslationRecord>& records, const corpus::Rulebook& book,
    engine::Direction direction) {
    std::vector<std::string> hypotheses, references;
    for (const auto& record : records) {
        const auto* example = book.find_example(record.instance_id);
        if (!example)
            throw ConfigError("record references unknown instance " + record.instance_id);
        hypotheses.push_back(record.extracted_translation);
        references.push_back(direction == engine::Direction::hi_to_lo ? example->target_text
                                                                      : example->source_text);
    }
    auto cfg = metric_config_for(direction);
    return {metrics::bleu(hypotheses, references, cfg),
            metrics::chrf_pp(hypotheses, references, cfg)};
}

corpus::Difficulty instance_difficulty(const corpus::ParallelExample& instance,
                                       const corpus::Rulebook& book) {
    auto hardest = corpus::Difficulty::easy;
    for (const auto& id : instance.rule_ids) {
        const auto* rule = book.find_rule(id);
        if (rule && static_cast<int>(rule->difficulty) > static_cast<int>(hardest))
            hardest = rule->difficulty;
    }
    return hardest;
}

namespace {

std::vector<const corpus::ParallelExample*> select_instances(
    const corpus::Rulebook& book, const std::vector<std::string>& ids) {
    std::vector<const corpus::ParallelExample*> out;
    if (ids.empty()) {
        for (const auto& example : book.examples) out.push_back(&example);
        return out;
    }
    for (const auto& id : ids) {
        const auto* example = book.find_example(id);
        if (!example) throw ConfigError("unknown instance id: " + id);
        out.push_back(example);
    }
    return out;
}

template <typename MakeOverrides>
std::vector<translator::TranslationRecord> translate_all(
    const std::vector<const corpus::ParallelExample*>& instances, const corpus::Rulebook& book,
    const translator::ApplicationConfig& cfg, llm::Client& client, MakeOverrides make) {
    std::vector<translator::TranslationRecord> records(instances.size());
    llm::parallel_for(instances.size(), client.config().concurrency, [&](std::size_t i) {
        records[i] = translator::translate(*instances[i], book, cfg, client, make(i));
    });
    return records;
}

std::string format_score(double value) {
    if (value < 0.0) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", value);
    return buf;
}

// Recall is a 0..1 fraction; one decimal would collapse everything to 0.x.
std::string format_recall(double value) {
    if (value < 0.0) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    return buf;
}

ScoredCell make_cell(std::string name, int n, double bleu, double chrf, double recall,
                     double avg_rules, std::string note = "") {
    ScoredCell cell;
    cell.cell = std::move(name);
    cell.n_instances = n;
    cell.bleu = bleu;
    cell.chrf = chrf;
    cell.recall = recall;
    cell.avg_rules = avg_rules;
    cell.note = std::move(note);
    return cell;
}

double prompt_tokens(const llm::CompletionRequest& request) {
    double total = 0.0;
    for (const auto& message : request.messages) total += text::estimate_tokens(message.content);
    return total;
}

}  // namespace

// -- pilot --------------------------------------------------------------------

PilotResult run_pilot(const corpus::Rulebook& book, const PilotOptions& options,
                      llm::Client& client) {
    translator::check_config(options.app);
    if (options.n_values.empty()) throw ConfigError("pilot needs at least one n value");
    for (std::size_t i = 0; i < options.n_values.size(); ++i) {
        if (options.n_values[i] < 0) throw ConfigError("pilot n values must be >= 0");
        if (i > 0 && options.n_values[i] <= options.n_values[i - 1])
            throw ConfigError("pilot n values must be strictly ascending");
    }
    auto instances = select_instances(book, options.instance_ids);
    if (instances.empty()) throw ConfigError("pilot needs at least one instance");

    // One shuffled candidate order per instance, shared across n, so the
    // sample for a larger n extends the sample for a smaller one.
    std::map<std::string, std::vector<std::string>> candidate_order;
    const int max_n = options.n_values.back();
    for (const auto* instance : instances) {
        std::set<std::string> gold(instance->rule_ids.begin(), instance->rule_ids.end());
        std::vector<std::string> candidates;
        for (const auto& rule : book.rules)
            if (!gold.count(rule.id)) candidates.push_back(rule.id);
        if (static_cast<std::size_t>(max_n) > candidates.size())
            throw NotEnoughRules("n=" + std::to_string(max_n) + " exceeds the " +
                                 std::to_string(candidates.size()) +
                                 " irrelevant rules available for " + instance->id);
        rng::seeded_shuffle(candidates, rng::mix_seed(options.app.seed, instance->id + "|pilot"));
        candidate_order[instance->id] = std::move(candidates);
    }

    PilotResult result;
    for (int n : options.n_values) {
        std::vector<std::vector<std::string>> rule_sets(instances.size());
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto& instance = *instances[i];
            auto rules = instance.rule_ids;
            const auto& candidates = candidate_order[instance.id];
            rules.insert(rules.end(), candidates.begin(), candidates.begin() + n);
            rng::seeded_shuffle(rules, rng::mix_seed(options.app.seed, instance.id +
                                                                           "|pilot-order|" +
                                                                           std::to_string(n)));
            rule_sets[i] = std::move(rules);
        }
        auto records = translate_all(instances, book, options.app, client, [&](std::size_t i) {
            translator::PromptOverrides overrides;
            overrides.rule_ids = rule_sets[i];
            return overrides;
        });
        auto [bleu, chrf] = score_translations(records, book, options.app.direction);
        result.curve.push_back({n, bleu, chrf});
        for (auto& record : records) result.records.emplace_back(n, std::move(record));
    }
    return result;
}

void emit_curves_csv(const std::vector<PilotPoint>& curve, const std::filesystem::path& file) {
    if (!file.parent_path().empty()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot write " + file.string());
    out << "n,bleu,chrf\n";
    char buf[64];
    for (const auto& point : curve) {
        std::snprintf(buf, sizeof(buf), "%d,%.4f,%.4f\n", point.n, point.bleu, point.chrf);
        out << buf;
    }
}

// -- retrieval table --------------------------------------------------------------

RunReport run_retrieval_table(const corpus::Rulebook& book, const RetrievalTableOptions& options,
                              llm::Client& client) {
    RunReport report;
    report.experiment = "retrieval";
    auto instances = select_instances(book, options.instance_ids);
    if (instances.empty()) throw ConfigError("retrieval table needs at least one instance");

    auto gold_of = [](const corpus::ParallelExample& instance) {
        return std::set<std::string>(instance.rule_ids.begin(), instance.rule_ids.end());
    };

    for (auto strategy : options.strategies) {
        if (strategy == retrieval::Strategy::bm25) {
            auto index = retrieval::bm25_build(book);
            for (int k : options.bm25_ks) {
                std::vector<metrics::RetrievalJudgment> judgments;
                double total_rules = 0.0;
                std::string cell = "bm25@" + std::to_string(k);
                for (const auto* instance : instances) {
                    auto scored = index.query(
                        retrieval::query_sentence(*instance, options.base.direction), k);
                    metrics::RetrievalJudgment judgment;
                    judgment.gold_rule_ids = gold_of(*instance);
                    for (const auto& [id, score] : scored)
                        judgment.retrieved_rule_ids.push_back(id);
                    total_rules += static_cast<double>(scored.size());
                    nlohmann::json record = {{"cell", cell},
                                             {"instance_id", instance->id},
                                             {"retrieved", judgment.retrieved_rule_ids}};
                    report.records.push_back(std::move(record));
                    judgments.push_back(std::move(judgment));
                }
                double recall = metrics::recall_at_k(judgments, k);
                report.cells.push_back(make_cell(cell, static_cast<int>(instances.size()), -1.0,
                                                 -1.0, recall,
                                                 total_rules / static_cast<double>(instances.size())));
            }
            continue;
        }

        for (auto format : options.formats) {
            auto opts = options.base;
            opts.rule_format = format;
            std::string cell =
                retrieval::to_string(strategy) + "|" + retrieval::to_string(format);
            std::vector<retrieval::RetrievalResult> results(instances.size());
            try {
                if (strategy == retrieval::Strategy::full_book) {
                    llm::parallel_for(instances.size(), client.config().concurrency,
                                      [&](std::size_t i) {
                                          results[i] = retrieval::retrieve_full_book(
                                              *instances[i], book, opts, client);
                                      });
                } else {
                    for (std::size_t i = 0; i < instances.size(); ++i)
                        results[i] =
                            retrieval::retrieve_rule_by_rule(*instances[i], book, opts, client);
                }
            } catch (const ContextOverflow& e) {
                report.cells.push_back(make_cell(cell, 0, -1.0, -1.0, -1.0, -1.0,
                                                 std::string("skipped: ") + e.what()));
                continue;
            }

            std::vector<metrics::RetrievalJudgment> judgments;
            for (std::size_t i = 0; i < instances.size(); ++i) {
                metrics::RetrievalJudgment judgment;
                judgment.gold_rule_ids = gold_of(*instances[i]);
                judgment.retrieved_rule_ids = results[i].retrieved;
                judgments.push_back(std::move(judgment));
                auto record = retrieval::to_json(results[i]);
                record["cell"] = cell;
                report.records.push_back(std::move(record));
            }
            auto summary = metrics::retrieval_recall_and_count(judgments);
            report.cells.push_back(make_cell(cell, static_cast<int>(instances.size()), -1.0, -1.0,
                                             summary.recall, summary.avg_count));
        }
    }
    return report;
}

// -- application grid --------------------------------------------------------------

std::vector<GridCell> default_grid(engine::Direction direction,
                                   const translator::ApplicationConfig& base) {
    auto mk = [&](const std::string& name, translator::RuleMode mode,
                  retrieval::RuleFormat format, int n_examples, bool use_igt, bool use_lexicon) {
        GridCell cell;
        cell.name = name;
        cell.app = base;
        cell.app.direction = direction;
        cell.app.rule_mode = mode;
        cell.app.rule_format = format;
        cell.app.n_examples = n_examples;
        cell.app.use_igt = use_igt;
        cell.app.use_lexicon = use_lexicon;
        return cell;
    };
    using translator::RuleMode;
    using retrieval::RuleFormat;
    return {
        mk("no_rule_no_lexicon", RuleMode::none, RuleFormat::text, 0, false, false),
        mk("no_rule", RuleMode::none, RuleFormat::text, 0, false, true),
        mk("parallel_examples", RuleMode::none, RuleFormat::text, 2, false, true),
        mk("random_rule", RuleMode::random_rule, RuleFormat::text, 0, false, true),
        mk("text_rule", RuleMode::gold, RuleFormat::text, 0, false, true),
        mk("code_rule", RuleMode::gold, RuleFormat::code, 0, false, true),
        mk("text_rule_2ex", RuleMode::gold, RuleFormat::text, 2, false, true),
        mk("code_rule_2ex", RuleMode::gold, RuleFormat::code, 2, false, true),
        mk("text_rule_igt", RuleMode::gold, RuleFormat::text, 0, true, true),
        mk("text_rule_2ex_igt", RuleMode::gold, RuleFormat::text, 2, true, true),
    };
}

RunReport run_application_grid(const corpus::Rulebook& book,
                               const ApplicationGridOptions& options, llm::Client& client) {
    RunReport report;
    report.experiment = "application";
    auto instances = select_instances(book, options.instance_ids);
    if (instances.empty()) throw ConfigError("application grid needs at least one instance");

    for (const auto& cell : options.cells) {
        try {
            translator::check_config(cell.app);
        } catch (const IgtUnavailable&) {
            report.cells.push_back(make_cell(cell.name, 0, -1.0, -1.0, -1.0, -1.0,
                                             "skipped: IGT unavailable for hi_to_lo"));
            continue;
        }

        std::vector<translator::TranslationRecord> records;
        try {
            records = translate_all(instances, book, cell.app, client,
                                    [](std::size_t) { return translator::PromptOverrides{}; });
        } catch (const MissingCodeError& e) {
            report.cells.push_back(
                make_cell(cell.name, 0, -1.0, -1.0, -1.0, -1.0, "skipped: " + std::string(e.what())));
            continue;
        }
        auto [bleu, chrf] = score_translations(records, book, cell.app.direction);
        report.cells.push_back(
            make_cell(cell.name, static_cast<int>(records.size()), bleu, chrf, -1.0, -1.0));

        if (options.difficulty_slices) {
            for (auto difficulty : {corpus::Difficulty::easy, corpus::Difficulty::medium,
                                    corpus::Difficulty::hard}) {
                std::vector<translator::TranslationRecord> slice;
                for (std::size_t i = 0; i < records.size(); ++i)
                    if (instance_difficulty(*instances[i], book) == difficulty)
                        slice.push_back(records[i]);
                std::string name = cell.name + "|" + corpus::to_string(difficulty);
                if (slice.empty()) {
                    report.cells.push_back(make_cell(name, 0, -1.0, -1.0, -1.0, -1.0));
                } else {
                    auto [sb, sc] = score_translations(slice, book, cell.app.direction);
                    report.cells.push_back(
                        make_cell(name, static_cast<int>(slice.size()), sb, sc, -1.0, -1.0));
                }
            }
        }

        for (std::size_t i = 0; i < records.size(); ++i) {
            auto record = translator::to_json(records[i]);
            record["cell"] = cell.name;
            record["difficulty"] = corpus::to_string(instance_difficulty(*instances[i], book));
            report.records.push_back(std::move(record));
        }
    }
    return report;
}

// -- pipeline -----------------------------------------------------------------

namespace {

const rulecraft::CodeRule& require_application_code(const corpus::Rulebook& book,
                                                    const std::string& id) {
    const auto* rule = book.find_rule(id);
    if (!rule) throw ConfigError("unknown rule id: " + id);
    if (!rule->code_application)
        throw MissingCodeError("rule " + id + " has no application code rule");
    return *rule->code_application;
}

}  // namespace

RunReport run_pipeline(const corpus::Rulebook& book, const PipelineOptions& options,
                       llm::Client& client) {
    RunReport report;
    report.experiment = "pipeline";
    translator::check_config(options.app);
    auto instances = select_instances(book, options.instance_ids);
    if (instances.empty()) throw ConfigError("pipeline needs at least one instance");

    std::vector<std::vector<std::string>> retrieved(instances.size());
    if (!options.with_retrieval) {
        std::vector<std::string> all_ids;
        for (const auto& rule : book.rules) all_ids.push_back(rule.id);
        for (auto& ids : retrieved) ids = all_ids;
        report.cells.push_back(make_cell("retrieval", static_cast<int>(instances.size()), -1.0,
                                         -1.0, -1.0, static_cast<double>(all_ids.size()),
                                         "whole book (no retrieval)"));
    } else if (options.strategy == retrieval::Strategy::bm25) {
        auto index = retrieval::bm25_build(book);
        std::vector<metrics::RetrievalJudgment> judgments(instances.size());
        for (std::size_t i = 0; i < instances.size(); ++i) {
            auto scored = index.query(
                retrieval::query_sentence(*instances[i], options.retrieval.direction),
                options.bm25_k);
            for (const auto& [id, score] : scored) retrieved[i].push_back(id);
            judgments[i].gold_rule_ids.insert(instances[i]->rule_ids.begin(),
                                              instances[i]->rule_ids.end());
            judgments[i].retrieved_rule_ids = retrieved[i];
        }
        auto summary = metrics::retrieval_recall_and_count(judgments);
        report.cells.push_back(make_cell("retrieval", static_cast<int>(instances.size()), -1.0,
                                         -1.0, summary.recall, summary.avg_count));
    } else {
        auto opts = options.retrieval;
        opts.rule_format = options.retrieval_format;
        std::vector<retrieval::RetrievalResult> results(instances.size());
        try {
            if (options.strategy == retrieval::Strategy::full_book) {
                llm::parallel_for(instances.size(), client.config().concurrency,
                                  [&](std::size_t i) {
                                      results[i] = retrieval::retrieve_full_book(*instances[i],
                                                                                 book, opts,
                                                                                 client);
                                  });
            } else {
                for (std::size_t i = 0; i < instances.size(); ++i)
                    results[i] =
                        retrieval::retrieve_rule_by_rule(*instances[i], book, opts, client);
            }
        } catch (const ContextOverflow& e) {
            report.cells.push_back(
                make_cell("retrieval", 0, -1.0, -1.0, -1.0, -1.0, std::string("skipped: ") + e.what()));
            report.cells.push_back(make_cell("translation", 0, -1.0, -1.0, -1.0, -1.0,
                                             "skipped: retrieval stage skipped"));
            return report;
        }
        std::vector<metrics::RetrievalJudgment> judgments(instances.size());
        for (std::size_t i = 0; i < instances.size(); ++i) {
            retrieved[i] = results[i].retrieved;
            judgments[i].gold_rule_ids.insert(instances[i]->rule_ids.begin(),
                                              instances[i]->rule_ids.end());
            judgments[i].retrieved_rule_ids = retrieved[i];
            auto record = retrieval::to_json(results[i]);
            record["cell"] = "retrieval";
            report.records.push_back(std::move(record));
        }
        auto summary = metrics::retrieval_recall_and_count(judgments);
        report.cells.push_back(make_cell("retrieval", static_cast<int>(instances.size()), -1.0,
                                         -1.0, summary.recall, summary.avg_count));
    }

    auto app_cfg = options.app;
    app_cfg.rule_format = options.application_format;

    std::vector<translator::PromptOverrides> overrides(instances.size());
    std::vector<std::unique_ptr<rulecraft::CodeRule>> combined(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        overrides[i].rule_ids = retrieved[i];
        if (options.application_format == retrieval::RuleFormat::code && options.combine &&
            retrieved[i].size() > 1) {
            auto acc = require_application_code(book, retrieved[i][0]);
            for (std::size_t j = 1; j < retrieved[i].size(); ++j) {
                auto seed = rng::mix_seed(options.app.seed,
                                          instances[i]->id + "|combine|" + std::to_string(j));
                acc = translator::combine_code_rules(
                    acc, require_application_code(book, retrieved[i][j]), *options.combine,
                    client, seed, options.app.model_id);
            }
            combined[i] = std::make_unique<rulecraft::CodeRule>(std::move(acc));
            overrides[i].combined = combined[i].get();
        }
    }

    for (std::size_t i = 0; i < instances.size(); ++i) {
        auto built = translator::build_prompt(*instances[i], book, app_cfg, overrides[i]);
        if (prompt_tokens(built.request) > static_cast<double>(options.retrieval.context_budget)) {
            report.cells.push_back(make_cell("translation", 0, -1.0, -1.0, -1.0, -1.0,
                                             "skipped: context budget exceeded"));
            return report;
        }
    }

    auto records = translate_all(instances, book, app_cfg, client,
                                 [&](std::size_t i) { return overrides[i]; });
    auto [bleu, chrf] = score_translations(records, book, app_cfg.direction);
    report.cells.push_back(
        make_cell("translation", static_cast<int>(records.size()), bleu, chrf, -1.0, -1.0));
    for (const auto& record : records) {
        auto j = translator::to_json(record);
        j["cell"] = "translation";
        report.records.push_back(std::move(j));
    }
    return report;
}

// -- reports ------------------------------------------------------------------

nlohmann::json to_json(const RunReport& report) {
    auto cells = nlohmann::json::array();
    for (const auto& cell : report.cells) {
        cells.push_back({{"cell", cell.cell},
                         {"n_instances", cell.n_instances},
                         {"bleu", cell.bleu},
                         {"chrf", cell.chrf},
                         {"recall", cell.recall},
                         {"avg_rules", cell.avg_rules},
                         {"note", cell.note}});
    }
    return {{"experiment", report.experiment},
            {"cells", std::move(cells)},
            {"records", report.records}};
}

RunReport run_report_from_json(const nlohmann::json& j) {
    RunReport report;
    report.experiment = j.at("experiment").get<std::string>();
    for (const auto& c : j.at("cells")) {
        ScoredCell cell;
        cell.cell = c.at("cell").get<std::string>();
        cell.n_instances = c.value("n_instances", 0);
        cell.bleu = c.value("bleu", -1.0);
        cell.chrf = c.value("chrf", -1.0);
        cell.recall = c.value("recall", -1.0);
        cell.avg_rules = c.value("avg_rules", -1.0);
        cell.note = c.value("note", "");
        report.cells.push_back(std::move(cell));
    }
    for (const auto& r : j.value("records", nlohmann::json::array()))
        report.records.push_back(r);
    return report;
}

void emit_report(const RunReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::ofstream md(dir / "report.md");
    if (!md) throw ConfigError("cannot write report under " + dir.string());
    md << "# " << report.experiment << " report\n\n";
    md << "| cell | instances | BLEU | chrF++ | recall | #rules | note |\n";
    md << "| --- | --- | --- | --- | --- | --- | --- |\n";
    for (const auto& cell : report.cells) {
        md << "| " << cell.cell << " | " << cell.n_instances << " | " << format_score(cell.bleu)
           << " | " << format_score(cell.chrf) << " | " << format_recall(cell.recall) << " | "
           << format_score(cell.avg_rules) << " | " << cell.note << " |\n";
    }

    std::ofstream csv(dir / "report.csv");
    csv << "cell,n_instances,bleu,chrf,recall,avg_rules,note\n";
    auto csv_score = [](double value) { return value < 0.0 ? std::string() : format_score(value); };
    auto csv_recall = [](double value) {
        return value < 0.0 ? std::string() : format_recall(value);
    };
    for (const auto& cell : report.cells) {
        csv << cell.cell << "," << cell.n_instances << "," << csv_score(cell.bleu) << ","
            << csv_score(cell.chrf) << "," << csv_recall(cell.recall) << ","
            << csv_score(cell.avg_rules) << "," << cell.note << "\n";
    }

    std::ofstream records(dir / "records.jsonl");
    for (const auto& record : report.records) records << record.dump() << "\n";

    std::ofstream full(dir / "report.json");
    full << to_json(report).dump(2) << "\n";
}

}  // namespace rulemt::runner
