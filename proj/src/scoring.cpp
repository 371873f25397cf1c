#include "coa/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "coa/errors.hpp"

namespace coa {

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

/// Clipped unigram overlap: sum over distinct tokens of
/// min(count_in_candidate, count_in_reference).
std::size_t clipped_overlap(const TokenList& cand, const TokenList& ref) {
    std::unordered_map<std::string, std::size_t> ref_counts;
    for (const auto& t : ref.tokens) ++ref_counts[t];
    std::size_t overlap = 0;
    for (const auto& t : cand.tokens) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            ++overlap;
            --it->second;
        }
    }
    return overlap;
}

}  // namespace

void Weights::validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
        throw InvalidInputError("score weights must be non-negative");
    if (std::abs(alpha + beta + gamma - 1.0) > 1e-9)
        throw InvalidInputError("score weights must sum to 1");
}

TokenList tokenize(std::string_view text) {
    TokenList out;
    std::string current;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            out.tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.tokens.push_back(std::move(current));
    return out;
}

std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens) {
    if (max_tokens == 0) return {};
    std::size_t seen = 0;
    std::size_t cap_end = 0;
    bool in_token = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (is_word_byte(static_cast<unsigned char>(text[i]))) {
            if (!in_token) {
                in_token = true;
                ++seen;
                if (seen > max_tokens) return std::string(text.substr(0, cap_end));
            }
            if (seen == max_tokens) cap_end = i + 1;
        } else {
            in_token = false;
        }
    }
    return std::string(text);
}

FaithScore faith_score(std::string_view candidate, std::string_view reference,
                       const Weights& weights, double awl_cap) {
    weights.validate();
    if (awl_cap <= 0.0) throw InvalidInputError("awl_cap must be positive");

    const TokenList cand = tokenize(candidate);
    if (cand.empty()) throw EmptyCandidateError("candidate has no tokens");
    const TokenList ref = tokenize(reference);

    const auto overlap = static_cast<double>(clipped_overlap(cand, ref));

    FaithScore score;
    score.p = overlap / static_cast<double>(cand.size());
    score.rcl = ref.empty() ? 0.0 : overlap / static_cast<double>(ref.size());

    std::size_t total_len = 0;
    for (const auto& t : cand.tokens) total_len += t.size();
    const double awl = static_cast<double>(total_len) / static_cast<double>(cand.size());
    score.awl_norm = std::min(1.0, awl / awl_cap);

    score.s = weights.alpha * score.p + weights.beta * score.rcl +
              weights.gamma * score.awl_norm;
    return score;
}

std::pair<double, std::size_t> mrfs(std::string_view candidate,
                                    const std::vector<std::string>& references,
                                    const Weights& weights, double awl_cap) {
    if (references.empty()) throw NoReferencesError("no references to score against");
    double best = -1.0;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < references.size(); ++i) {
        const double s = faith_score(candidate, references[i], weights, awl_cap).s;
        if (s > best) {
            best = s;
            best_index = i;
        }
    }
    return {best, best_index};
}

VerificationOutcome verify_answer(std::string_view guess,
                                  const std::vector<std::string>& references,
                                  double threshold, const Weights& weights,
                                  double awl_cap) {
    auto [score, index] = mrfs(guess, references, weights, awl_cap);
    VerificationOutcome outcome;
    outcome.mrfs = score;
    outcome.best_ref_index = index;
    outcome.corrected = score < threshold;
    if (outcome.corrected) outcome.replacement = references[index];
    return outcome;
}

}  // namespace coa
