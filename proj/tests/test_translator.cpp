#include <doctest.h>

#include <algorithm>
#include <memory>
#include <set>

#include "rulemt/errors.hpp"
#include "rulemt/metrics.hpp"
#include "rulemt/mock_backend.hpp"
#include "rulemt/translator.hpp"
#include "support.hpp"

using namespace rulemt;
using namespace rulemt::translator;

namespace {

llm::Client mock_client(std::shared_ptr<const corpus::Rulebook> book,
                        const std::string& profile = "perfect_translator") {
    llm::ClientConfig cfg;
    cfg.use_cache = false;
    return llm::Client(std::make_shared<llm::MockBackend>(
                           std::move(book), llm::mock_profile_from_string(profile), 7),
                       cfg);
}

// Book where IGT coverage of the ICL pool is under the test's control.
corpus::Rulebook igt_book(bool first_has_igt, bool second_has_igt) {
    corpus::Rulebook book;
    corpus::GrammarRule rule;
    rule.id = "r001";
    rule.text = "否定词mbouj位于动词之前。";
    book.rules.push_back(rule);
    auto add = [&](const std::string& id, bool with_igt) {
        corpus::ParallelExample ex;
        ex.id = id;
        ex.rule_ids = {"r001"};
        ex.source_text = "他不去。";
        ex.target_text = "De mbouj bae.";
        ex.lexicon = {{"de", "他"}, {"mbouj", "不"}, {"bae", "去"}};
        if (with_igt) {
            corpus::Igt igt;
            igt.surface_tokens = {"de", "mbouj", "bae"};
            igt.gloss_tokens = {"3SG", "NEG", "去"};
            ex.igt = igt;
        }
        book.examples.push_back(std::move(ex));
    };
    add("a1", first_has_igt);
    add("a2", second_has_igt);
    add("probe", false);
    return book;
}

rulecraft::CodeRule simple_rule(const std::string& name, const std::string& comment) {
    rulecraft::CodeRule code;
    code.style = rulecraft::CodeRule::Style::application;
    code.function_name = name;
    code.comment_block = "# " + comment;
    code.body = "def " + name + "(" + std::string(rulecraft::kCodeRuleParams) + "):\n" +
                "    tokens = tokenize(source_sentence)\n" +
                "    target_sentence = ' '.join(tokens)\n" +
                "    return target_sentence";
    return code;
}

}  // namespace

TEST_CASE("check_config guards igt direction and basic fields") {
    ApplicationConfig cfg;
    cfg.use_igt = true;
    cfg.direction = engine::Direction::hi_to_lo;
    CHECK_THROWS_AS(check_config(cfg), IgtUnavailable);
    cfg.direction = engine::Direction::lo_to_hi;
    CHECK_NOTHROW(check_config(cfg));

    ApplicationConfig bad;
    bad.n_examples = -1;
    CHECK_THROWS_AS(check_config(bad), ConfigError);
    ApplicationConfig no_model;
    no_model.model_id = "";
    CHECK_THROWS_AS(check_config(no_model), ConfigError);
}

TEST_CASE("rule mode and combine strategy names round-trip") {
    CHECK(rule_mode_from_string("none") == RuleMode::none);
    CHECK(rule_mode_from_string("random") == RuleMode::random_rule);
    CHECK(rule_mode_from_string("gold") == RuleMode::gold);
    CHECK(to_string(RuleMode::random_rule) == "random");
    CHECK_THROWS_AS(rule_mode_from_string("psychic"), ConfigError);

    for (auto s : {CombineStrategy::func_call, CombineStrategy::inline_template,
                   CombineStrategy::inline_llm})
        CHECK(combine_strategy_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(combine_strategy_from_string("merge"), ConfigError);
}

TEST_CASE("build_prompt matches the golden transcript") {
    auto book = testsupport::tiny_book();
    const auto* instance = book.find_example("e005");
    REQUIRE(instance != nullptr);

    ApplicationConfig cfg;
    cfg.rule_mode = RuleMode::gold;
    cfg.direction = engine::Direction::hi_to_lo;
    cfg.n_examples = 2;  // pool holds only e006, so the sample is forced

    auto built = build_prompt(*instance, book, cfg);
    auto golden = testsupport::slurp(std::filesystem::path(RULEMT_GOLDEN_DIR) /
                                     "prompt_e005_gold.txt");
    REQUIRE(built.request.messages.size() == 1);
    CHECK(built.request.messages[0].content + "\n" == golden);

    CHECK(built.rule_ids_in_prompt == std::vector<std::string>{"r003"});
    CHECK(built.example_ids == std::vector<std::string>{"e006"});
    CHECK(built.insufficient_examples);
    CHECK(built.n_irrelevant == 0);
    CHECK(built.igt_source.empty());
    CHECK(built.request.tags.at("task") == "translate");
    CHECK(built.request.tags.at("instance_id") == "e005");
    CHECK(built.request.tags.at("direction") == "hi_to_lo");
    CHECK(built.request.tags.at("rule_ids_in_prompt") == "r003");
    CHECK(built.request.tags.at("n_irrelevant") == "0");
}

TEST_CASE("build_prompt is deterministic under (seed, instance)") {
    auto book = testsupport::demo_book();
    const auto* instance = book.find_example("e001");
    ApplicationConfig cfg;
    cfg.seed = 5;
    auto a = build_prompt(*instance, book, cfg);
    auto b = build_prompt(*instance, book, cfg);
    CHECK(llm::canonical_json(a.request) == llm::canonical_json(b.request));
    CHECK(a.example_ids == b.example_ids);

    // Some other seed must pick a different sample eventually.
    bool varied = false;
    for (std::uint64_t seed = 0; seed < 20 && !varied; ++seed) {
        ApplicationConfig probe = cfg;
        probe.seed = seed;
        varied = build_prompt(*instance, book, probe).example_ids != a.example_ids;
    }
    CHECK(varied);
}

TEST_CASE("rule selection per mode") {
    auto book = testsupport::demo_book();
    const auto* instance = book.find_example("e020");  // gold r005, r004
    REQUIRE(instance != nullptr);

    SUBCASE("gold keeps instance order") {
        ApplicationConfig cfg;
        cfg.rule_mode = RuleMode::gold;
        auto built = build_prompt(*instance, book, cfg);
        CHECK(built.rule_ids_in_prompt == instance->rule_ids);
        CHECK(built.n_irrelevant == 0);
    }
    SUBCASE("none omits the rule block") {
        ApplicationConfig cfg;
        cfg.rule_mode = RuleMode::none;
        auto built = build_prompt(*instance, book, cfg);
        CHECK(built.rule_ids_in_prompt.empty());
        CHECK(built.request.messages[0].content.find("语法规则") == std::string::npos);
        CHECK(built.request.messages[0].content.find("以下为一些例句") != std::string::npos);
    }
    SUBCASE("random never leaks a gold rule") {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            for (const auto& ex : book.examples) {
                ApplicationConfig cfg;
                cfg.rule_mode = RuleMode::random_rule;
                cfg.seed = seed;
                auto built = build_prompt(ex, book, cfg);
                CHECK(built.rule_ids_in_prompt.size() == ex.rule_ids.size());
                for (const auto& id : built.rule_ids_in_prompt)
                    CHECK(std::find(ex.rule_ids.begin(), ex.rule_ids.end(), id) ==
                          ex.rule_ids.end());
                CHECK(built.n_irrelevant ==
                      static_cast<int>(built.rule_ids_in_prompt.size()));
            }
        }
    }
    SUBCASE("overrides replace selection") {
        ApplicationConfig cfg;
        cfg.rule_mode = RuleMode::none;
        PromptOverrides overrides;
        overrides.rule_ids = {"r001", "r005"};
        auto built = build_prompt(*instance, book, cfg, overrides);
        CHECK(built.rule_ids_in_prompt == overrides.rule_ids);
        CHECK(built.n_irrelevant == 1);  // r001 is not gold for e020
    }
}

TEST_CASE("icl examples share a rule and exclude the instance") {
    auto book = testsupport::demo_book();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (const auto& ex : book.examples) {
            ApplicationConfig cfg;
            cfg.seed = seed;
            cfg.n_examples = 3;
            auto built = build_prompt(ex, book, cfg);
            std::set<std::string> gold(ex.rule_ids.begin(), ex.rule_ids.end());
            for (const auto& id : built.example_ids) {
                CHECK(id != ex.id);
                const auto* picked = book.find_example(id);
                REQUIRE(picked != nullptr);
                CHECK(std::any_of(picked->rule_ids.begin(), picked->rule_ids.end(),
                                  [&](const std::string& r) { return gold.count(r) > 0; }));
            }
        }
    }
}

TEST_CASE("insufficient example pools are flagged") {
    auto book = testsupport::demo_book();
    // r007 has exactly two examples; from e013's view the pool is just e014.
    const auto* instance = book.find_example("e013");
    ApplicationConfig cfg;
    cfg.n_examples = 2;
    auto built = build_prompt(*instance, book, cfg);
    CHECK(built.example_ids == std::vector<std::string>{"e014"});
    CHECK(built.insufficient_examples);

    cfg.n_examples = 0;
    auto bare = build_prompt(*instance, book, cfg);
    CHECK(bare.example_ids.empty());
    CHECK_FALSE(bare.insufficient_examples);
    CHECK(bare.request.messages[0].content.find("例句") == std::string::npos);
}

TEST_CASE("igt_source reflects where glosses come from") {
    ApplicationConfig cfg;
    cfg.direction = engine::Direction::lo_to_hi;
    cfg.use_igt = true;
    cfg.n_examples = 2;

    auto all_book = igt_book(true, true);
    auto built = build_prompt(*all_book.find_example("probe"), all_book, cfg);
    CHECK(built.igt_source == "book");
    CHECK(built.request.tags.at("igt") == "1");
    CHECK(built.request.messages[0].content.find("IGT：3SG NEG 去") != std::string::npos);

    auto none_book = igt_book(false, false);
    built = build_prompt(*none_book.find_example("probe"), none_book, cfg);
    CHECK(built.igt_source == "lexicon");
    // Lexicon glossing of "De mbouj bae." is word-for-word.
    CHECK(built.request.messages[0].content.find("IGT：他 不 去") != std::string::npos);

    auto mixed_book = igt_book(true, false);
    built = build_prompt(*mixed_book.find_example("probe"), mixed_book, cfg);
    CHECK(built.igt_source == "mixed");

    ApplicationConfig plain = cfg;
    plain.use_igt = false;
    built = build_prompt(*all_book.find_example("probe"), all_book, plain);
    CHECK(built.igt_source.empty());
}

TEST_CASE("code rule format renders application code in the prompt") {
    auto book = testsupport::demo_book();
    corpus::Rulebook coded;
    coded.rules.push_back(*book.find_rule("r002"));
    corpus::ParallelExample instance = *book.find_example("e005");
    instance.rule_ids = {"r002"};

    ApplicationConfig cfg;
    cfg.rule_format = retrieval::RuleFormat::code;
    cfg.n_examples = 0;
    auto built = build_prompt(instance, coded, cfg);
    CHECK(built.request.messages[0].content.find("def apply_rule(") != std::string::npos);

    // Rules without code refuse the code format.
    corpus::Rulebook bare;
    bare.rules.push_back(*book.find_rule("r001"));
    corpus::ParallelExample other = *book.find_example("e001");
    CHECK_THROWS_AS(build_prompt(other, bare, cfg), MissingCodeError);
}

TEST_CASE("extract_answer strips labels quotes and picks the last line") {
    CHECK(extract_answer("De mbouj bae.", false) ==
          std::make_pair(std::string("De mbouj bae."), std::string("")));
    CHECK(extract_answer("翻译结果：De mbouj bae.", false).first == "De mbouj bae.");
    CHECK(extract_answer("译文： “Gou yawj bonj saw.”", false).first == "Gou yawj bonj saw.");
    CHECK(extract_answer("Answer: \"va hoengz\"", false).first == "va hoengz");
    CHECK(extract_answer("「『嵌套引号』」", false).first == "嵌套引号");
    CHECK(extract_answer("思考过程……\n\n中间结论。\n翻译：最终答案", false).first == "最终答案");
    CHECK(extract_answer("", false) == std::make_pair(std::string(""), std::string("")));
    CHECK(extract_answer("  \n\n  ", false).first.empty());

    auto with_igt = extract_answer("IGT: de mbouj bae\n翻译结果：他不去。", true);
    CHECK(with_igt.first == "他不去。");
    CHECK(with_igt.second == "de mbouj bae");

    // expect_igt with a single line leaves the igt empty.
    auto lone = extract_answer("他不去。", true);
    CHECK(lone.first == "他不去。");
    CHECK(lone.second.empty());
}

TEST_CASE("translate fills the record and flags empty output") {
    auto book = std::make_shared<corpus::Rulebook>(testsupport::demo_book());
    auto client = mock_client(book);
    ApplicationConfig cfg;
    cfg.direction = engine::Direction::hi_to_lo;

    const auto* e009 = book->find_example("e009");
    auto record = translate(*e009, *book, cfg, client);
    CHECK(record.instance_id == "e009");
    CHECK(record.extracted_translation == "Gou yawj yaep ndeu.");
    CHECK(record.prompt_digest.size() == 64);
    CHECK_FALSE(record.empty_output);
    CHECK(record.rule_ids_in_prompt == e009->rule_ids);

    auto blank = testsupport::inline_client(
        [](const llm::CompletionRequest&) { return std::string("  \n"); });
    auto empty_record = translate(*e009, *book, cfg, blank);
    CHECK(empty_record.empty_output);
    CHECK(empty_record.extracted_translation.empty());
}

TEST_CASE("translation record json omits cache metadata") {
    TranslationRecord record;
    record.instance_id = "e001";
    record.prompt_digest = "abc";
    record.raw_output = "翻译结果：va hoengz";
    record.extracted_translation = "va hoengz";
    record.rule_ids_in_prompt = {"r001"};
    record.example_ids = {"e002"};
    record.insufficient_examples = true;
    record.from_cache = true;

    auto j = to_json(record);
    CHECK_FALSE(j.contains("from_cache"));
    auto back = translation_record_from_json(j);
    CHECK(back.instance_id == record.instance_id);
    CHECK(back.rule_ids_in_prompt == record.rule_ids_in_prompt);
    CHECK(back.insufficient_examples);
    CHECK_FALSE(back.from_cache);
}

TEST_CASE("inline_template combine is local, ordered by seed parity, and valid") {
    auto a = simple_rule("apply_rule_a", "规则甲。");
    auto b = simple_rule("apply_rule_b", "规则乙。");
    auto client = testsupport::inline_client([](const llm::CompletionRequest&) -> std::string {
        throw TransportError("inline_template must not call the backend");
    });

    auto even = combine_code_rules(a, b, CombineStrategy::inline_template, client, 0);
    CHECK(even.function_name == "apply_combined_rule");
    CHECK(even.style == rulecraft::CodeRule::Style::application);
    CHECK(validate_code_rule(even).empty());
    // a's locals get _a and its return becomes an assignment feeding b.
    CHECK(even.body.find("tokens_a") != std::string::npos);
    CHECK(even.body.find("source_sentence = target_sentence_a") != std::string::npos);
    CHECK(even.body.find("return target_sentence_b") != std::string::npos);
    CHECK(even.comment_block.find("规则甲。") < even.comment_block.find("规则乙。"));

    auto odd = combine_code_rules(a, b, CombineStrategy::inline_template, client, 1);
    CHECK(odd.body.find("source_sentence = target_sentence_b") != std::string::npos);
    CHECK(odd.body.find("return target_sentence_a") != std::string::npos);
    CHECK(odd.comment_block.find("规则乙。") < odd.comment_block.find("规则甲。"));

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto combined = combine_code_rules(a, b, CombineStrategy::inline_template, client, seed);
        CHECK(validate_code_rule(combined).empty());
    }
}

TEST_CASE("combine validates its inputs") {
    auto a = simple_rule("apply_rule_a", "规则甲。");
    auto client = testsupport::inline_client(
        [](const llm::CompletionRequest&) { return std::string("x"); });

    rulecraft::CodeRule checker;
    checker.style = rulecraft::CodeRule::Style::retrieval_check;
    checker.function_name = "check_whether_apply";
    checker.body = "def check_whether_apply(source_sentence, dictionary):\n    return True";
    CHECK_THROWS_AS(combine_code_rules(a, checker, CombineStrategy::inline_template, client, 0),
                    ConfigError);

    auto broken = simple_rule("apply_rule_b", "规则乙。");
    broken.body = "没有函数";
    CHECK_THROWS_AS(combine_code_rules(a, broken, CombineStrategy::inline_template, client, 0),
                    ConfigError);
}

TEST_CASE("llm combine strategies produce validated orchestrators") {
    auto book = std::make_shared<corpus::Rulebook>(testsupport::demo_book());
    auto client = mock_client(book);
    auto a = simple_rule("apply_rule_a", "规则甲。");
    auto b = simple_rule("apply_rule_b", "规则乙。");

    auto called = combine_code_rules(a, b, CombineStrategy::func_call, client, 0);
    CHECK(called.function_name == "apply_combined_rule");
    CHECK(validate_code_rule(called).empty());
    CHECK(called.body.find("apply_rule_a(source_sentence, dictionary)") != std::string::npos);
    CHECK(called.body.find("apply_rule_b(") != std::string::npos);

    auto inlined = combine_code_rules(a, b, CombineStrategy::inline_llm, client, 0);
    CHECK(inlined.function_name == "apply_combined_rule");
    CHECK(validate_code_rule(inlined).empty());

    // Persistent invalid generations exhaust the retry.
    auto garbage = testsupport::inline_client(
        [](const llm::CompletionRequest&) { return std::string("def f(x):\n    return True"); });
    CHECK_THROWS_AS(combine_code_rules(a, b, CombineStrategy::func_call, garbage, 0),
                    GenerationInvalid);
}

TEST_CASE("gold prompts give the mock what it needs to score perfectly") {
    auto book = std::make_shared<corpus::Rulebook>(testsupport::demo_book());
    auto client = mock_client(book);
    ApplicationConfig cfg;
    cfg.direction = engine::Direction::hi_to_lo;
    cfg.rule_mode = RuleMode::gold;

    std::vector<std::string> hyp;
    std::vector<std::string> ref;
    for (const auto& ex : book->examples) {
        hyp.push_back(translate(ex, *book, cfg, client).extracted_translation);
        ref.push_back(ex.target_text);
    }
    CHECK(metrics::bleu(hyp, ref) == 100.0);
    CHECK(metrics::chrf_pp(hyp, ref) == 100.0);

    // Dropping the gold rules from the prompt breaks the oracle's answers.
    ApplicationConfig none = cfg;
    none.rule_mode = RuleMode::none;
    std::vector<std::string> bare;
    for (const auto& ex : book->examples)
        bare.push_back(translate(ex, *book, none, client).extracted_translation);
    CHECK(metrics::bleu(bare, ref) < 100.0);
}
