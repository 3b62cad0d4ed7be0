#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "rulemt/corpus.hpp"
#include "rulemt/llm.hpp"

// Deterministic offline backend driven by the rulebook's oracle programs.
// Requests carry routing tags (task, instance_id, ...) that the mock reads to
// synthesize an answer; the prompt text itself is never parsed. Every profile
// answers every task: the profile's named behavior applies to its own task
// and the rest fall back to the oracle, so retrieval and application stages
// can run against differently profiled backends or share one.
namespace rulemt::llm {

struct MockProfile {
    enum class Kind {
        perfect_classifier,  // yes iff the rule is in the instance's gold set
        always_yes,
        distracted,          // correct with probability p^(n_irrelevant+1)
        perfect_translator,  // applies the gold programs
        no_rule_translator   // lexicon substitution only
    };
    Kind kind = Kind::perfect_translator;
    double p = 0.9;  // distracted base success probability
};

std::string to_string(const MockProfile& profile);
// Accepts "perfect_classifier", "always_yes", "distracted", "distracted:0.8",
// "perfect_translator", "no_rule_translator".
MockProfile mock_profile_from_string(std::string_view spec);

// Gold-program reference translation: hi_to_lo composes the instance's rule
// programs in rule_ids order over the lexicon-segmented source; lo_to_hi is
// the gold high-resource text. Throws ProfileError when a required program is
// missing or authored for the other direction.
std::string oracle_translation(const corpus::ParallelExample& example,
                               const corpus::Rulebook& book, engine::Direction direction);

// Word-for-word lexicon substitution with no rule applied.
std::string lexicon_only_translation(const corpus::ParallelExample& example,
                                     engine::Direction direction);

class MockBackend : public Backend {
public:
    MockBackend(std::shared_ptr<const corpus::Rulebook> book, MockProfile profile,
                std::uint64_t seed);

    std::string name() const override;
    std::string complete(const CompletionRequest& req) override;

private:
    std::string classify(const CompletionRequest& req) const;
    std::string full_book(const CompletionRequest& req) const;
    std::string translate(const CompletionRequest& req) const;
    std::string igt(const CompletionRequest& req) const;
    std::string induce(const CompletionRequest& req) const;
    std::string convert(const CompletionRequest& req) const;
    std::string combine(const CompletionRequest& req) const;

    const corpus::ParallelExample& example_for(const CompletionRequest& req) const;
    // Uniform in [0,1), stable across runs: FNV-1a over seed and salt parts.
    double uniform(std::initializer_list<std::string_view> salt) const;

    std::shared_ptr<const corpus::Rulebook> book_;
    MockProfile profile_;
    std::uint64_t seed_;
};

}  // namespace rulemt::llm
