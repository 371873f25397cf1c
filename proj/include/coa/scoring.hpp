#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coa {

/// Ordered lowercase word tokens. Maximal runs of alphanumeric characters
/// become tokens; everything else separates them.
struct TokenList {
    std::vector<std::string> tokens;

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }

    bool operator==(const TokenList&) const = default;
};

/// Component weights of the composite faith score. Must be non-negative and
/// sum to 1 (within 1e-9).
struct Weights {
    double alpha = 0.4;  // precision
    double beta = 0.4;   // recall
    double gamma = 0.2;  // normalized average word length

    void validate() const;

    bool operator==(const Weights&) const = default;
};

/// One candidate-vs-reference faith score and its components, each in [0,1].
/// s = alpha*p + beta*rcl + gamma*awl_norm for the weights used.
struct FaithScore {
    double p = 0.0;
    double rcl = 0.0;
    double awl_norm = 0.0;
    double s = 0.0;

    bool operator==(const FaithScore&) const = default;
};

/// Result of verifying a guess answer against retrieved references.
/// corrected == true exactly when mrfs < threshold, in which case
/// `replacement` holds the best-scoring reference text.
struct VerificationOutcome {
    double mrfs = 0.0;
    std::size_t best_ref_index = 0;
    bool corrected = false;
    std::optional<std::string> replacement;

    bool operator==(const VerificationOutcome&) const = default;
};

/// Default cap on the mean token length used to normalize AWL into [0,1].
inline constexpr double kDefaultAwlCap = 10.0;

/// Lowercases `text` and splits it into maximal alphanumeric runs. Bytes
/// outside ASCII are treated as word characters so UTF-8 words survive
/// intact. Empty input yields an empty list.
TokenList tokenize(std::string_view text);

/// Returns the prefix of `text` ending with its `max_tokens`-th token
/// (original bytes preserved). Texts with at most `max_tokens` tokens pass
/// through whole.
std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens);

/// Computes the composite faith score of `candidate` against `reference`:
/// clipped unigram-overlap precision and recall plus the capped mean token
/// length of the candidate. Throws EmptyCandidateError when the candidate
/// tokenizes to nothing.
FaithScore faith_score(std::string_view candidate, std::string_view reference,
                       const Weights& weights, double awl_cap = kDefaultAwlCap);

/// Multi-reference faith score: the maximum faith score of `candidate` over
/// all references, with the smallest index achieving it. Throws
/// NoReferencesError on an empty reference list.
std::pair<double, std::size_t> mrfs(std::string_view candidate,
                                    const std::vector<std::string>& references,
                                    const Weights& weights, double awl_cap = kDefaultAwlCap);

/// Scores `guess` against `references` and decides whether to keep it.
/// mrfs >= threshold keeps the guess; mrfs < threshold replaces it with the
/// best-scoring reference.
VerificationOutcome verify_answer(std::string_view guess,
                                  const std::vector<std::string>& references,
                                  double threshold, const Weights& weights,
                                  double awl_cap = kDefaultAwlCap);

}  // namespace coa
