#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coa/errors.hpp"
#include "coa/scoring.hpp"

using namespace coa;

namespace {

// Oracle implementation, deliberately structured unlike the library: the
// whole string is lowercased and non-word bytes are blanked out up front,
// tokens come from a stream, and the clipped overlap is a sorted two-pointer
// merge instead of a hash-map decrement.
std::vector<std::string> oracle_tokenize(std::string text) {
    for (char& c : text) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || u >= 0x80)
            c = static_cast<char>(std::tolower(u));
        else
            c = ' ';
    }
    std::istringstream in(text);
    std::vector<std::string> tokens;
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

std::size_t oracle_overlap(std::vector<std::string> a, std::vector<std::string> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t n = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++n;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return n;
}

double oracle_score(const std::string& cand, const std::string& ref,
                    const Weights& w, double awl_cap) {
    const auto ct = oracle_tokenize(cand);
    const auto rt = oracle_tokenize(ref);
    const auto o = static_cast<double>(oracle_overlap(ct, rt));
    const double p = o / static_cast<double>(ct.size());
    const double rcl = rt.empty() ? 0.0 : o / static_cast<double>(rt.size());
    double len_sum = 0;
    for (const auto& t : ct) len_sum += static_cast<double>(t.size());
    const double awl = std::min(1.0, len_sum / static_cast<double>(ct.size()) / awl_cap);
    return w.alpha * p + w.beta * rcl + w.gamma * awl;
}

std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> words = {
        "the",   "cat",  "sat",   "mat",      "paris", "france", "capital",
        "river", "2021", "alpha", "beta",     "GPT-3.5", "long",  "banana",
        "x",     "data", "when",  "population"};
    std::uniform_int_distribution<std::size_t> count(1, 12);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::string out;
    const std::size_t n = count(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (!out.empty()) out += ' ';
        out += words[pick(rng)];
    }
    return out;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
    CHECK(tokenize("The cat sat.").tokens == std::vector<std::string>{"the", "cat", "sat"});
    CHECK(tokenize("GPT-3.5").tokens == std::vector<std::string>{"gpt", "3", "5"});
    CHECK(tokenize("  a,,b  ").tokens == std::vector<std::string>{"a", "b"});
    CHECK(tokenize("").empty());
    CHECK(tokenize(" .,;! ").empty());
}

TEST_CASE("tokenize keeps non-ASCII bytes inside tokens") {
    const auto t = tokenize("caf\xc3\xa9 au lait");
    REQUIRE(t.size() == 3);
    CHECK(t.tokens[0] == "caf\xc3\xa9");
}

TEST_CASE("truncate_to_tokens keeps original bytes through the cap") {
    CHECK(truncate_to_tokens("a b c d", 2) == "a b");
    CHECK(truncate_to_tokens("GPT-3.5 is great", 2) == "GPT-3");
    CHECK(truncate_to_tokens("one two", 10) == "one two");
    CHECK(truncate_to_tokens("one two.", 2) == "one two.");
    CHECK(truncate_to_tokens("anything", 0).empty());
    CHECK(truncate_to_tokens("", 3).empty());
}

TEST_CASE("faith_score matches the worked example") {
    const Weights w;
    const auto fs = faith_score("the cat sat", "the cat", w, 10.0);
    CHECK(fs.p == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(fs.rcl == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fs.awl_norm == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(fs.s == doctest::Approx(0.7266666666666667).epsilon(1e-12));
}

TEST_CASE("faith_score on disjoint texts reduces to the length term") {
    const Weights w;
    const auto fs = faith_score("alpha beta", "gamma delta", w, 10.0);
    CHECK(fs.p == 0.0);
    CHECK(fs.rcl == 0.0);
    CHECK(fs.awl_norm == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(fs.s == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("faith_score clips repeated tokens at the reference count") {
    const Weights w;
    const auto fs = faith_score("a a a", "a", w, 10.0);
    CHECK(fs.p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(fs.rcl == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("faith_score error and edge cases") {
    const Weights w;
    CHECK_THROWS_AS(faith_score("", "ref", w), EmptyCandidateError);
    CHECK_THROWS_AS(faith_score(" ,. ", "ref", w), EmptyCandidateError);

    const auto fs = faith_score("word", "", w, 10.0);
    CHECK(fs.p == 0.0);
    CHECK(fs.rcl == 0.0);

    const auto capped = faith_score("extraordinarily", "x", w, 10.0);
    CHECK(capped.awl_norm == 1.0);
}

TEST_CASE("weights are validated") {
    CHECK_THROWS_AS(faith_score("a", "a", Weights{-0.1, 0.9, 0.2}), InvalidInputError);
    CHECK_THROWS_AS(faith_score("a", "a", Weights{0.5, 0.5, 0.5}), InvalidInputError);
    CHECK_THROWS_AS(faith_score("a", "a", Weights{}, 0.0), InvalidInputError);
    CHECK_NOTHROW(faith_score("a", "a", Weights{0.3, 0.3, 0.4}));
}

TEST_CASE("faith_score agrees with the oracle on random pairs") {
    std::mt19937_64 rng(2024);
    const Weights w;
    for (int i = 0; i < 500; ++i) {
        const auto cand = random_text(rng);
        const auto ref = random_text(rng);
        const auto fs = faith_score(cand, ref, w, 10.0);
        CHECK(fs.s == doctest::Approx(oracle_score(cand, ref, w, 10.0)).epsilon(1e-12));
        CHECK(fs.p >= 0.0);
        CHECK(fs.p <= 1.0);
        CHECK(fs.rcl >= 0.0);
        CHECK(fs.rcl <= 1.0);
        CHECK(fs.awl_norm >= 0.0);
        CHECK(fs.awl_norm <= 1.0);
        CHECK(fs.s >= 0.0);
        CHECK(fs.s <= 1.0);
    }
}

TEST_CASE("identical texts score full precision and recall") {
    std::mt19937_64 rng(7);
    const Weights w;
    for (int i = 0; i < 50; ++i) {
        const auto text = random_text(rng);
        const auto fs = faith_score(text, text, w, 10.0);
        CHECK(fs.p == 1.0);
        CHECK(fs.rcl == 1.0);
    }
}

TEST_CASE("mrfs takes the maximum over references") {
    const Weights w;
    const std::vector<std::string> refs = {"gamma delta", "the cat", "the cat sat"};
    const auto [s, idx] = mrfs("the cat sat", refs, w, 10.0);
    CHECK(idx == 2);
    CHECK(s == doctest::Approx(1.0 * 0.8 + 0.2 * 0.3).epsilon(1e-12));
}

TEST_CASE("mrfs breaks ties at the smallest index") {
    const Weights w;
    const std::vector<std::string> refs = {"the cat", "the cat", "unrelated"};
    const auto [s, idx] = mrfs("the cat", refs, w, 10.0);
    CHECK(idx == 0);
    CHECK(s == doctest::Approx(0.86).epsilon(1e-12));
}

TEST_CASE("mrfs requires references") {
    CHECK_THROWS_AS(mrfs("guess", {}, Weights{}), NoReferencesError);
}

TEST_CASE("verify_answer keeps the guess at or above the threshold") {
    const Weights w;
    const std::vector<std::string> refs = {"the cat"};
    const auto kept = verify_answer("the cat sat", refs, 0.72, w, 10.0);
    CHECK_FALSE(kept.corrected);
    CHECK_FALSE(kept.replacement.has_value());
    CHECK(kept.best_ref_index == 0);

    const auto fixed = verify_answer("alpha beta", refs, 0.5, w, 10.0);
    CHECK(fixed.corrected);
    REQUIRE(fixed.replacement.has_value());
    CHECK(*fixed.replacement == "the cat");
}

TEST_CASE("verify_answer keeps a guess scoring exactly the threshold") {
    const Weights w;
    const std::vector<std::string> refs = {"the cat"};
    const double exact = verify_answer("the cat sat", refs, 0.0, w, 10.0).mrfs;
    const auto at = verify_answer("the cat sat", refs, exact, w, 10.0);
    CHECK_FALSE(at.corrected);
    const auto above = verify_answer("the cat sat", refs,
                                     std::nextafter(exact, 1.0), w, 10.0);
    CHECK(above.corrected);
}
