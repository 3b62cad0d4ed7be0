#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rulemt/corpus.hpp"
#include "rulemt/llm.hpp"
#include "rulemt/metrics.hpp"
#include "rulemt/retrieval.hpp"
#include "rulemt/translator.hpp"

// Experiment orchestration: pilot sweep, retrieval table, application grid,
// retrieval-then-application pipeline, report emission.
namespace rulemt::runner {

struct RunManifest {
    std::string run_id;
    std::string experiment;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string backend;
    std::string dataset_digest;
    std::string created_at;  // ISO 8601 UTC
};

nlohmann::json to_json(const RunManifest& manifest);

// Digest over the canonical JSON serialization of the loaded bundle.
std::string dataset_digest(const corpus::Rulebook& book);

std::string timestamp_utc();

// Deterministic id so reruns of the same configuration land in the same
// directory: {experiment}-s{seed}-{backend}-{digest prefix}.
std::string default_run_id(const std::string& experiment, std::uint64_t seed,
                           const std::string& backend, const std::string& digest);

// Creates dir and writes manifest.json. Call before any backend traffic.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& dir);

// One aggregate row. Scores below zero mean "not applicable" and render
// as "-" in reports.
struct ScoredCell {
    std::string cell;
    int n_instances = 0;
    double bleu = -1.0;
    double chrf = -1.0;
    double recall = -1.0;
    double avg_rules = -1.0;
    std::string note;
};

struct RunReport {
    std::string experiment;
    std::vector<ScoredCell> cells;
    std::vector<nlohmann::json> records;  // per-instance, ordered by cell then instance
};

// Full-precision round trip so reports can be re-emitted from disk.
nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);

// whitespace tokens for the Latin-script low-resource side, CJK-aware mixed
// tokens for the Chinese side.
metrics::MetricConfig metric_config_for(engine::Direction direction);

// References come from the book by instance id; hypothesis order preserved.
std::pair<double, double> score_translations(
    const std::vector<translator::TranslationRecord>& records, const corpus::Rulebook& book,
    engine::Direction direction);

// Instance difficulty is the hardest of its gold rules.
corpus::Difficulty instance_difficulty(const corpus::ParallelExample& instance,
                                       const corpus::Rulebook& book);

// -- pilot -------------------------------------------------------------------

struct PilotPoint {
    int n = 0;
    double bleu = 0.0;
    double chrf = 0.0;
};

struct PilotOptions {
    std::vector<int> n_values = {0, 1, 2, 4, 8, 16, 32, 64, 108};
    translator::ApplicationConfig app;
    std::vector<std::string> instance_ids;  // empty = every example
};

struct PilotResult {
    std::vector<PilotPoint> curve;
    std::vector<std::pair<int, translator::TranslationRecord>> records;  // (n, record)
};

// Each prompt carries the gold rules plus n distinct irrelevant rules in
// shuffled positions; sampling is seeded and grows by prefix so larger n
// extend smaller n. Throws NotEnoughRules and ConfigError.
PilotResult run_pilot(const corpus::Rulebook& book, const PilotOptions& options,
                      llm::Client& client);

void emit_curves_csv(const std::vector<PilotPoint>& curve, const std::filesystem::path& file);

// -- retrieval table -----------------------------------------------------------

struct RetrievalTableOptions {
    std::vector<retrieval::Strategy> strategies = {retrieval::Strategy::bm25,
                                                   retrieval::Strategy::full_book,
                                                   retrieval::Strategy::rule_by_rule};
    std::vector<retrieval::RuleFormat> formats = {retrieval::RuleFormat::text};
    retrieval::RetrievalOptions base;
    std::vector<int> bm25_ks = {1, 5};
    std::vector<std::string> instance_ids;
};

RunReport run_retrieval_table(const corpus::Rulebook& book, const RetrievalTableOptions& options,
                              llm::Client& client);

// -- application grid ------------------------------------------------------------

struct GridCell {
    std::string name;
    translator::ApplicationConfig app;
};

struct ApplicationGridOptions {
    std::vector<GridCell> cells;
    std::vector<std::string> instance_ids;
    bool difficulty_slices = true;
};

// The standard condition ladder for one direction: no rule (with and without
// lexicon), parallel examples, random rule, textual and code rules with and
// without examples, IGT variants where the direction permits them.
std::vector<GridCell> default_grid(engine::Direction direction,
                                   const translator::ApplicationConfig& base);

// Cells that violate the IGT-direction constraint are kept as skipped rows.
RunReport run_application_grid(const corpus::Rulebook& book,
                               const ApplicationGridOptions& options, llm::Client& client);

// -- pipeline -------------------------------------------------------------------

struct PipelineOptions {
    bool with_retrieval = true;  // false = whole book in the prompt
    retrieval::Strategy strategy = retrieval::Strategy::rule_by_rule;
    retrieval::RuleFormat retrieval_format = retrieval::RuleFormat::text;
    retrieval::RuleFormat application_format = retrieval::RuleFormat::text;
    std::optional<translator::CombineStrategy> combine;  // merge >1 retrieved code rules
    int bm25_k = 5;
    translator::ApplicationConfig app;
    retrieval::RetrievalOptions retrieval;
    std::vector<std::string> instance_ids;
};

// Stage 1 retrieval feeds every retrieved rule into the stage 2 prompt.
// Prompts over the context budget skip the whole cell with a note.
RunReport run_pipeline(const corpus::Rulebook& book, const PipelineOptions& options,
                       llm::Client& client);

// -- reports -----------------------------------------------------------------

// report.md + report.csv + records.jsonl under dir; deterministic bytes for
// a fixed report, scores at one decimal.
void emit_report(const RunReport& report, const std::filesystem::path& dir);

}  // namespace rulemt::runner
