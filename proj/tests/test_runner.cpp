#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <regex>
#include <set>

#include "rulemt/errors.hpp"
#include "rulemt/mock_backend.hpp"
#include "rulemt/runner.hpp"
#include "support.hpp"

using namespace rulemt;
using namespace rulemt::runner;
using namespace testsupport;

namespace {

llm::Client mock_client(const corpus::Rulebook& book,
                        const std::string& profile = "perfect_translator",
                        std::uint64_t seed = 7) {
    llm::ClientConfig cfg;
    cfg.use_cache = false;
    cfg.concurrency = 4;
    return llm::Client(
        std::make_shared<llm::MockBackend>(std::make_shared<const corpus::Rulebook>(book),
                                           llm::mock_profile_from_string(profile), seed),
        cfg);
}

const ScoredCell* find_cell(const RunReport& report, const std::string& name) {
    for (const auto& cell : report.cells)
        if (cell.cell == name) return &cell;
    return nullptr;
}

corpus::Rulebook coded_pair_book() {
    corpus::Rulebook book;
    book.source_language = "zh";
    book.target_language = "za";
    auto mk = [](const std::string& id, const std::string& fn, const std::string& text) {
        corpus::GrammarRule rule;
        rule.id = id;
        rule.text = text;
        rulecraft::CodeRule code;
        code.style = rulecraft::CodeRule::Style::application;
        code.function_name = fn;
        code.comment_block = "# " + text;
        code.body = "def " + fn + "(source_sentence, dictionary):\n" +
                    "    tokens = source_sentence.split()\n" +
                    "    target_sentence = ' '.join(tokens)\n" +
                    "    return target_sentence";
        rule.code_application = code;
        return rule;
    };
    book.rules.push_back(mk("ra", "apply_noun_rule", "名词规则。"));
    book.rules.push_back(mk("rb", "apply_verb_rule", "动词规则。"));
    corpus::ParallelExample ex;
    ex.id = "p1";
    ex.rule_ids = {"ra", "rb"};
    ex.source_text = "他不去。";
    ex.target_text = "De mbouj bae.";
    ex.lexicon = {{"de", "他"}, {"mbouj", "不"}, {"bae", "去"}};
    book.examples.push_back(std::move(ex));
    return book;
}

}  // namespace

TEST_CASE("manifest serialization and run ids") {
    RunManifest manifest;
    manifest.run_id = "pilot-s7-mock-abcdef01";
    manifest.experiment = "pilot";
    manifest.config = {{"n_values", {0, 1, 2}}};
    manifest.seed = 7;
    manifest.backend = "mock:distracted:0.9";
    manifest.dataset_digest = std::string(64, 'a');
    manifest.created_at = "2026-01-01T00:00:00Z";

    auto j = to_json(manifest);
    CHECK(j.at("run_id") == "pilot-s7-mock-abcdef01");
    CHECK(j.at("experiment") == "pilot");
    CHECK(j.at("config").at("n_values").size() == 3);
    CHECK(j.at("seed") == 7);
    CHECK(j.at("backend") == "mock:distracted:0.9");
    CHECK(j.at("dataset_digest") == std::string(64, 'a'));
    CHECK(j.at("created_at") == "2026-01-01T00:00:00Z");

    SUBCASE("default run ids sanitize the backend name") {
        std::string digest = "0123456789abcdef0123456789abcdef";
        CHECK(default_run_id("pilot", 7, "mock:distracted:0.9", digest) ==
              "pilot-s7-mock-distracted-0.9-01234567");
        CHECK(default_run_id("application", 0, "replay", digest) ==
              "application-s0-replay-01234567");
        CHECK(default_run_id("x", 42, "a b/c", digest) == "x-s42-a-b-c-01234567");
    }

    SUBCASE("write_manifest creates the directory and round-trips") {
        auto dir = temp_dir("runner-manifest") / "nested";
        write_manifest(manifest, dir);
        auto text = slurp(dir / "manifest.json");
        CHECK(text.back() == '\n');
        auto parsed = nlohmann::json::parse(text);
        CHECK(parsed == to_json(manifest));
    }

    SUBCASE("timestamps are ISO 8601 UTC") {
        std::regex iso(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)");
        CHECK(std::regex_match(timestamp_utc(), iso));
    }
}

TEST_CASE("dataset digest is stable and content sensitive") {
    auto digest = dataset_digest(demo_book());
    CHECK(digest.size() == 64);
    CHECK(digest.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(dataset_digest(demo_book()) == digest);
    CHECK(dataset_digest(tiny_book()) != digest);

    auto mutated = demo_book();
    mutated.rules[0].text += "？";
    CHECK(dataset_digest(mutated) != digest);

    auto mutated2 = demo_book();
    mutated2.examples[0].source_text += "啊";
    CHECK(dataset_digest(mutated2) != digest);

    auto mutated3 = demo_book();
    mutated3.gloss_inventory.push_back("XYZ");
    CHECK(dataset_digest(mutated3) != digest);
}

TEST_CASE("metric configs and reference lookup follow the direction") {
    CHECK(metric_config_for(engine::Direction::hi_to_lo).tokenization ==
          text::Tokenization::whitespace);
    CHECK(metric_config_for(engine::Direction::lo_to_hi).tokenization ==
          text::Tokenization::mixed);

    auto book = demo_book();
    std::vector<translator::TranslationRecord> records(2);
    records[0].instance_id = book.examples[0].id;
    records[0].extracted_translation = book.examples[0].target_text;
    records[1].instance_id = book.examples[1].id;
    records[1].extracted_translation = book.examples[1].target_text;
    auto [bleu, chrf] = score_translations(records, book, engine::Direction::hi_to_lo);
    CHECK(bleu == doctest::Approx(100.0));
    CHECK(chrf == doctest::Approx(100.0));

    records[0].extracted_translation = book.examples[0].source_text;
    records[1].extracted_translation = book.examples[1].source_text;
    auto [bleu2, chrf2] = score_translations(records, book, engine::Direction::lo_to_hi);
    CHECK(bleu2 == doctest::Approx(100.0));
    CHECK(chrf2 == doctest::Approx(100.0));

    records[0].instance_id = "nope";
    CHECK_THROWS_AS(score_translations(records, book, engine::Direction::hi_to_lo), ConfigError);
}

TEST_CASE("instance difficulty is the hardest gold rule") {
    auto book = demo_book();
    CHECK(instance_difficulty(*book.find_example("e001"), book) == corpus::Difficulty::easy);
    CHECK(instance_difficulty(*book.find_example("e005"), book) == corpus::Difficulty::hard);
    CHECK(instance_difficulty(*book.find_example("e020"), book) == corpus::Difficulty::medium);

    corpus::ParallelExample mixed;
    mixed.rule_ids = {"r001", "r002"};
    CHECK(instance_difficulty(mixed, book) == corpus::Difficulty::hard);
    corpus::ParallelExample unknown;
    unknown.rule_ids = {"zzz"};
    CHECK(instance_difficulty(unknown, book) == corpus::Difficulty::easy);
}

TEST_CASE("pilot validates inputs before any backend traffic") {
    auto book = demo_book();
    auto client = mock_client(book);

    PilotOptions options;
    options.app.direction = engine::Direction::hi_to_lo;

    options.n_values = {};
    CHECK_THROWS_AS(run_pilot(book, options, client), ConfigError);
    options.n_values = {-1};
    CHECK_THROWS_AS(run_pilot(book, options, client), ConfigError);
    options.n_values = {2, 2};
    CHECK_THROWS_AS(run_pilot(book, options, client), ConfigError);
    options.n_values = {4, 2};
    CHECK_THROWS_AS(run_pilot(book, options, client), ConfigError);

    options.n_values = {0, 1};
    options.app.n_examples = -1;
    CHECK_THROWS_AS(run_pilot(book, options, client), ConfigError);
    options.app.n_examples = 2;

    SUBCASE("the distractor budget counts only irrelevant rules") {
        // e020 holds two gold rules, so only 9 of the 11 rules qualify.
        options.n_values = {0, 10};
        try {
            run_pilot(book, options, client);
            FAIL("expected NotEnoughRules");
        } catch (const NotEnoughRules& e) {
            std::string msg = e.what();
            CHECK(msg.find("e020") != std::string::npos);
            CHECK(msg.find("9 irrelevant") != std::string::npos);
        }

        options.instance_ids = {"e001"};
        options.n_values = {0, 11};
        CHECK_THROWS_AS(run_pilot(book, options, client), NotEnoughRules);
        options.n_values = {0, 10};
        CHECK_NOTHROW(run_pilot(book, options, client));
    }

    SUBCASE("a book without examples cannot run") {
        corpus::Rulebook empty;
        empty.rules = book.rules;
        options.n_values = {0};
        CHECK_THROWS_AS(run_pilot(empty, options, client), ConfigError);
    }
}

TEST_CASE("pilot keeps gold rules in every prompt and grows samples by prefix") {
    auto book = demo_book();
    auto client = mock_client(book);

    PilotOptions options;
    options.n_values = {0, 2, 5};
    options.app.direction = engine::Direction::hi_to_lo;

    auto result = run_pilot(book, options, client);
    REQUIRE(result.curve.size() == 3);
    for (std::size_t i = 0; i < result.curve.size(); ++i) {
        CHECK(result.curve[i].n == options.n_values[i]);
        // Gold rules ride along at every n, so a perfect translator stays at 100.
        CHECK(result.curve[i].bleu == doctest::Approx(100.0));
        CHECK(result.curve[i].chrf == doctest::Approx(100.0));
    }
    REQUIRE(result.records.size() == 3 * book.examples.size());

    std::map<std::string, std::map<int, std::set<std::string>>> distractors;
    for (const auto& [n, record] : result.records) {
        const auto* example = book.find_example(record.instance_id);
        REQUIRE(example != nullptr);
        std::set<std::string> gold(example->rule_ids.begin(), example->rule_ids.end());
        CHECK(record.rule_ids_in_prompt.size() == gold.size() + static_cast<std::size_t>(n));
        std::set<std::string> extra;
        for (const auto& id : record.rule_ids_in_prompt) {
            if (!gold.count(id)) extra.insert(id);
        }
        CHECK(extra.size() == static_cast<std::size_t>(n));
        distractors[record.instance_id][n] = std::move(extra);
    }
    for (const auto& [id, by_n] : distractors) {
        const auto& at2 = by_n.at(2);
        const auto& at5 = by_n.at(5);
        CHECK(std::includes(at5.begin(), at5.end(), at2.begin(), at2.end()));
    }

    auto client2 = mock_client(book);
    auto rerun = run_pilot(book, options, client2);
    REQUIRE(rerun.records.size() == result.records.size());
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        CHECK(rerun.records[i].first == result.records[i].first);
        CHECK(rerun.records[i].second.instance_id == result.records[i].second.instance_id);
        CHECK(rerun.records[i].second.rule_ids_in_prompt ==
              result.records[i].second.rule_ids_in_prompt);
    }
}

TEST_CASE("pilot curves degrade monotonically under distraction") {
    auto book = demo_book();
    auto client = mock_client(book, "distracted:0.9");

    PilotOptions options;
    options.n_values = {0, 2, 4, 9};
    options.app.direction = engine::Direction::hi_to_lo;

    auto result = run_pilot(book, options, client);
    REQUIRE(result.curve.size() == 4);
    for (std::size_t i = 1; i < result.curve.size(); ++i) {
        CHECK(result.curve[i].bleu <= result.curve[i - 1].bleu + 1e-9);
        CHECK(result.curve[i].chrf <= result.curve[i - 1].chrf + 1e-9);
    }
    CHECK(result.curve.back().bleu < result.curve.front().bleu - 5.0);

    SUBCASE("curves.csv renders one row per point at fixed precision") {
        auto file = temp_dir("runner-curves") / "nested" / "curves.csv";
        emit_curves_csv(result.curve, file);
        std::string expected = "n,bleu,chrf\n";
        char buf[64];
        for (const auto& point : result.curve) {
            std::snprintf(buf, sizeof(buf), "%d,%.4f,%.4f\n", point.n, point.bleu, point.chrf);
            expected += buf;
        }
        CHECK(slurp(file) == expected);
    }
}

TEST_CASE("retrieval table covers bm25 and llm strategies") {
    auto book = demo_book();
    auto client = mock_client(book, "perfect_classifier");

    RetrievalTableOptions options;
    auto report = run_retrieval_table(book, options, client);
    CHECK(report.experiment == "retrieval");
    REQUIRE(report.cells.size() == 4);
    CHECK(report.cells[0].cell == "bm25@1");
    CHECK(report.cells[1].cell == "bm25@5");
    CHECK(report.cells[2].cell == "full_book|text");
    CHECK(report.cells[3].cell == "rule_by_rule|text");

    for (const auto& cell : report.cells) {
        CHECK(cell.n_instances == 22);
        CHECK(cell.bleu == -1.0);
        CHECK(cell.chrf == -1.0);
        CHECK(cell.recall >= 0.0);
        CHECK(cell.recall <= 1.0);
    }
    CHECK(report.cells[0].avg_rules <= 1.0);
    CHECK(report.cells[1].avg_rules <= 5.0);
    CHECK(report.cells[1].recall >= report.cells[0].recall);
    CHECK(report.cells[2].recall == doctest::Approx(1.0));
    CHECK(report.cells[2].avg_rules == doctest::Approx(25.0 / 22.0));
    CHECK(report.cells[3].recall == doctest::Approx(1.0));
    CHECK(report.cells[3].avg_rules == doctest::Approx(25.0 / 22.0));

    REQUIRE(report.records.size() == 4 * 22);
    for (const auto& record : report.records) CHECK(record.contains("cell"));

    SUBCASE("a cell over the context budget is kept as a skipped row") {
        RetrievalTableOptions tight;
        tight.base.context_budget = 10;
        auto skipped = run_retrieval_table(book, tight, client);
        REQUIRE(skipped.cells.size() == 4);
        CHECK(skipped.cells[2].cell == "full_book|text");
        CHECK(skipped.cells[2].n_instances == 0);
        CHECK(skipped.cells[2].recall == -1.0);
        CHECK(skipped.cells[2].note.rfind("skipped:", 0) == 0);
        CHECK(skipped.cells[3].recall == doctest::Approx(1.0));
    }
}

TEST_CASE("the default grid enumerates the standard conditions") {
    translator::ApplicationConfig base;
    base.seed = 11;
    auto grid = default_grid(engine::Direction::hi_to_lo, base);
    REQUIRE(grid.size() == 10);
    std::vector<std::string> names;
    for (const auto& cell : grid) {
        names.push_back(cell.name);
        CHECK(cell.app.direction == engine::Direction::hi_to_lo);
        CHECK(cell.app.seed == 11);
    }
    std::vector<std::string> expected = {
        "no_rule_no_lexicon", "no_rule",       "parallel_examples", "random_rule",
        "text_rule",          "code_rule",     "text_rule_2ex",     "code_rule_2ex",
        "text_rule_igt",      "text_rule_2ex_igt"};
    CHECK(names == expected);

    CHECK_FALSE(grid[0].app.use_lexicon);
    CHECK(grid[1].app.use_lexicon);
    CHECK(grid[2].app.rule_mode == translator::RuleMode::none);
    CHECK(grid[2].app.n_examples == 2);
    CHECK(grid[3].app.rule_mode == translator::RuleMode::random_rule);
    CHECK(grid[5].app.rule_format == retrieval::RuleFormat::code);
    CHECK(grid[8].app.use_igt);
    CHECK(grid[9].app.use_igt);
    CHECK(grid[9].app.n_examples == 2);
}

TEST_CASE("application grid scores cells, slices by difficulty, and skips") {
    auto book = demo_book();
    auto client = mock_client(book);

    ApplicationGridOptions options;
    translator::ApplicationConfig base;
    options.cells = default_grid(engine::Direction::hi_to_lo, base);
    auto report = run_application_grid(book, options, client);
    CHECK(report.experiment == "application");

    // 6 scored cells expand into aggregate + 3 slices; 4 skipped stay single rows.
    CHECK(report.cells.size() == 6 * 4 + 4);
    CHECK(report.records.size() == 6 * 22);
    for (const auto& record : report.records) {
        CHECK(record.contains("cell"));
        CHECK(record.contains("difficulty"));
    }

    const auto* text_rule = find_cell(report, "text_rule");
    REQUIRE(text_rule != nullptr);
    CHECK(text_rule->n_instances == 22);
    CHECK(text_rule->bleu == doctest::Approx(100.0));
    CHECK(text_rule->chrf == doctest::Approx(100.0));

    const auto* no_rule = find_cell(report, "no_rule");
    REQUIRE(no_rule != nullptr);
    CHECK(no_rule->bleu < text_rule->bleu);

    const auto* easy = find_cell(report, "text_rule|easy");
    const auto* medium = find_cell(report, "text_rule|medium");
    const auto* hard = find_cell(report, "text_rule|hard");
    REQUIRE(easy != nullptr);
    REQUIRE(medium != nullptr);
    REQUIRE(hard != nullptr);
    CHECK(easy->n_instances == 10);
    CHECK(medium->n_instances == 9);
    CHECK(hard->n_instances == 3);
    CHECK(easy->bleu == doctest::Approx(100.0));

    const auto* igt = find_cell(report, "text_rule_igt");
    REQUIRE(igt != nullptr);
    CHECK(igt->n_instances == 0);
    CHECK(igt->note == "skipped: IGT unavailable for hi_to_lo");
    CHECK(find_cell(report, "text_rule_igt|easy") == nullptr);

    const auto* code = find_cell(report, "code_rule");
    REQUIRE(code != nullptr);
    CHECK(code->n_instances == 0);
    CHECK(code->note.rfind("skipped:", 0) == 0);

    SUBCASE("code cells score when every gold rule carries code") {
        ApplicationGridOptions narrow;
        narrow.cells = default_grid(engine::Direction::hi_to_lo, base);
        narrow.instance_ids = {"e005", "e006", "e007"};
        auto r2 = run_application_grid(book, narrow, client);
        const auto* coded = find_cell(r2, "code_rule");
        REQUIRE(coded != nullptr);
        CHECK(coded->n_instances == 3);
        CHECK(coded->bleu == doctest::Approx(100.0));
        const auto* coded_hard = find_cell(r2, "code_rule|hard");
        REQUIRE(coded_hard != nullptr);
        CHECK(coded_hard->n_instances == 3);
        const auto* coded_easy = find_cell(r2, "code_rule|easy");
        REQUIRE(coded_easy != nullptr);
        CHECK(coded_easy->n_instances == 0);
        CHECK(coded_easy->bleu == -1.0);
    }
}

TEST_CASE("pipeline without retrieval puts the whole book in the prompt") {
    auto book = demo_book();
    auto client = mock_client(book);

    PipelineOptions options;
    options.with_retrieval = false;
    options.app.direction = engine::Direction::hi_to_lo;

    auto report = run_pipeline(book, options, client);
    CHECK(report.experiment == "pipeline");
    REQUIRE(report.cells.size() == 2);
    CHECK(report.cells[0].cell == "retrieval");
    CHECK(report.cells[0].note == "whole book (no retrieval)");
    CHECK(report.cells[0].avg_rules == doctest::Approx(11.0));
    CHECK(report.cells[0].recall == -1.0);
    CHECK(report.cells[1].cell == "translation");
    CHECK(report.cells[1].n_instances == 22);
    CHECK(report.cells[1].bleu == doctest::Approx(100.0));
    CHECK(report.cells[1].chrf == doctest::Approx(100.0));

    REQUIRE(report.records.size() == 22);
    for (const auto& record : report.records) {
        CHECK(record.at("cell") == "translation");
        CHECK(record.at("rule_ids_in_prompt").size() == 11);
    }
}

TEST_CASE("pipeline feeds retrieved rules into the translation stage") {
    auto book = demo_book();
    auto client = mock_client(book, "perfect_classifier");

    PipelineOptions options;
    options.strategy = retrieval::Strategy::rule_by_rule;
    options.app.direction = engine::Direction::hi_to_lo;

    auto report = run_pipeline(book, options, client);
    REQUIRE(report.cells.size() == 2);
    CHECK(report.cells[0].recall == doctest::Approx(1.0));
    CHECK(report.cells[0].avg_rules == doctest::Approx(25.0 / 22.0));
    CHECK(report.cells[1].bleu == doctest::Approx(100.0));

    REQUIRE(report.records.size() == 44);
    for (std::size_t i = 0; i < 22; ++i) CHECK(report.records[i].at("cell") == "retrieval");
    for (std::size_t i = 22; i < 44; ++i) CHECK(report.records[i].at("cell") == "translation");

    SUBCASE("bm25 retrieval keeps records only for the translation stage") {
        PipelineOptions bm;
        bm.strategy = retrieval::Strategy::bm25;
        bm.bm25_k = 5;
        bm.app.direction = engine::Direction::hi_to_lo;
        auto r2 = run_pipeline(book, bm, client);
        REQUIRE(r2.cells.size() == 2);
        CHECK(r2.cells[0].recall >= 0.0);
        CHECK(r2.cells[0].recall <= 1.0);
        CHECK(r2.cells[0].avg_rules <= 5.0);
        CHECK(r2.cells[1].n_instances == 22);
        CHECK(r2.records.size() == 22);
    }
}

TEST_CASE("pipeline skips stages that exceed the context budget") {
    auto book = demo_book();
    auto client = mock_client(book, "perfect_classifier");

    PipelineOptions options;
    options.strategy = retrieval::Strategy::full_book;
    options.retrieval.context_budget = 10;
    options.app.direction = engine::Direction::hi_to_lo;

    auto report = run_pipeline(book, options, client);
    REQUIRE(report.cells.size() == 2);
    CHECK(report.cells[0].note.rfind("skipped:", 0) == 0);
    CHECK(report.cells[1].note == "skipped: retrieval stage skipped");
    CHECK(report.records.empty());

    SUBCASE("the translation stage checks the budget too") {
        PipelineOptions whole;
        whole.with_retrieval = false;
        whole.retrieval.context_budget = 10;
        whole.app.direction = engine::Direction::hi_to_lo;
        auto r2 = run_pipeline(book, whole, client);
        REQUIRE(r2.cells.size() == 2);
        CHECK(r2.cells[0].note == "whole book (no retrieval)");
        CHECK(r2.cells[1].note == "skipped: context budget exceeded");
        CHECK(r2.cells[1].n_instances == 0);
        CHECK(r2.records.empty());
    }
}

TEST_CASE("pipeline code application demands stored code rules") {
    auto book = demo_book();
    auto client = mock_client(book);

    PipelineOptions options;
    options.with_retrieval = false;
    options.application_format = retrieval::RuleFormat::code;
    options.combine = translator::CombineStrategy::inline_template;
    options.app.direction = engine::Direction::hi_to_lo;
    CHECK_THROWS_AS(run_pipeline(book, options, client), MissingCodeError);

    PipelineOptions plain;
    plain.with_retrieval = false;
    plain.application_format = retrieval::RuleFormat::code;
    plain.instance_ids = {"e001"};
    plain.app.direction = engine::Direction::hi_to_lo;
    CHECK_THROWS_AS(run_pipeline(book, plain, client), MissingCodeError);
}

TEST_CASE("pipeline merges retrieved code rules before translating") {
    auto book = coded_pair_book();
    std::vector<std::string> prompts;
    auto client = inline_client(
        [&](const llm::CompletionRequest& req) {
            prompts.push_back(req.messages.back().content);
            return "好的。";
        },
        1);

    PipelineOptions options;
    options.with_retrieval = false;
    options.application_format = retrieval::RuleFormat::code;
    options.combine = translator::CombineStrategy::inline_template;
    options.app.n_examples = 0;

    auto report = run_pipeline(book, options, client);
    REQUIRE(report.cells.size() == 2);
    CHECK(report.cells[1].n_instances == 1);
    REQUIRE(prompts.size() == 1);
    CHECK(prompts[0].find("def apply_combined_rule(source_sentence, dictionary):") !=
          std::string::npos);
    CHECK(prompts[0].find("名词规则。") != std::string::npos);
    CHECK(prompts[0].find("动词规则。") != std::string::npos);
    REQUIRE(report.records.size() == 1);
    auto ids = report.records[0].at("rule_ids_in_prompt").get<std::vector<std::string>>();
    CHECK(ids == std::vector<std::string>{"ra", "rb"});

    SUBCASE("without a combine strategy each code rule renders separately") {
        prompts.clear();
        PipelineOptions separate = options;
        separate.combine.reset();
        auto r2 = run_pipeline(book, separate, client);
        REQUIRE(prompts.size() == 1);
        CHECK(prompts[0].find("def apply_noun_rule(source_sentence, dictionary):") !=
              std::string::npos);
        CHECK(prompts[0].find("def apply_verb_rule(source_sentence, dictionary):") !=
              std::string::npos);
        CHECK(prompts[0].find("apply_combined_rule") == std::string::npos);
    }
}

TEST_CASE("run reports round-trip through json and emit deterministic files") {
    RunReport report;
    report.experiment = "demo";
    ScoredCell alpha;
    alpha.cell = "alpha";
    alpha.n_instances = 22;
    alpha.bleu = 41.23456;
    alpha.chrf = 55.5;
    ScoredCell beta;
    beta.cell = "beta";
    beta.note = "skipped: nope";
    ScoredCell gamma;
    gamma.cell = "gamma";
    gamma.n_instances = 22;
    gamma.recall = 1.0;
    gamma.avg_rules = 25.0 / 22.0;
    report.cells = {alpha, beta, gamma};
    report.records.push_back({{"cell", "alpha"}, {"instance_id", "e001"}});
    report.records.push_back({{"cell", "gamma"}, {"instance_id", "e002"}});

    auto j = to_json(report);
    auto back = run_report_from_json(j);
    CHECK(to_json(back) == j);

    auto dir1 = temp_dir("runner-report1");
    auto dir2 = temp_dir("runner-report2");
    emit_report(report, dir1);
    emit_report(report, dir2);
    for (const char* name : {"report.md", "report.csv", "records.jsonl", "report.json"})
        CHECK(slurp(dir1 / name) == slurp(dir2 / name));

    std::string md = "# demo report\n\n";
    md += "| cell | instances | BLEU | chrF++ | recall | #rules | note |\n";
    md += "| --- | --- | --- | --- | --- | --- | --- |\n";
    md += "| alpha | 22 | 41.2 | 55.5 | - | - |  |\n";
    md += "| beta | 0 | - | - | - | - | skipped: nope |\n";
    md += "| gamma | 22 | - | - | 1.000 | 1.1 |  |\n";
    CHECK(slurp(dir1 / "report.md") == md);

    std::string csv = "cell,n_instances,bleu,chrf,recall,avg_rules,note\n";
    csv += "alpha,22,41.2,55.5,,,\n";
    csv += "beta,0,,,,,skipped: nope\n";
    csv += "gamma,22,,,1.000,1.1,\n";
    CHECK(slurp(dir1 / "report.csv") == csv);

    std::string jsonl;
    for (const auto& record : report.records) jsonl += record.dump() + "\n";
    CHECK(slurp(dir1 / "records.jsonl") == jsonl);
    CHECK(slurp(dir1 / "report.json") == to_json(report).dump(2) + "\n");

    SUBCASE("missing optional keys fall back to defaults") {
        nlohmann::json sparse = {{"experiment", "x"},
                                 {"cells", nlohmann::json::array({{{"cell", "c"}}})}};
        auto parsed = run_report_from_json(sparse);
        CHECK(parsed.experiment == "x");
        REQUIRE(parsed.cells.size() == 1);
        CHECK(parsed.cells[0].bleu == -1.0);
        CHECK(parsed.cells[0].note.empty());
        CHECK(parsed.records.empty());
    }
}
