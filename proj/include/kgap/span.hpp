#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgap/qa_data.hpp"
#include "kgap/text.hpp"

namespace kgap::span {

enum class SpanSource { heuristic, external, gold };

struct SpanPrediction {
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;  // exclusive; fact.substr(char_start, char_end - char_start) == text
    SpanSource source = SpanSource::heuristic;
};

struct HeuristicOptions {
    // Fraction of the fact's content tokens that the stem must cover.
    double min_coverage = 0.6;
};

// Longest run of fact tokens whose content words are all absent from the
// question stem, counted in content words; interior stopwords are kept.
// Returns nullopt when the stem covers less than min_coverage of the fact,
// or every content word of the fact is mentioned in the stem.
std::optional<SpanPrediction> heuristic_span(const Question& q, std::string_view fact,
                                             const HeuristicOptions& options = {});

// Finds `span` inside `fact` and returns it as a prediction; nullopt if absent.
std::optional<SpanPrediction> locate_span(std::string_view fact, std::string_view span, SpanSource source);

struct SpanScore {
    double f1 = 0.0;
    int em = 0;
};

// SQuAD-style answer normalization: lowercase, strip punctuation and the
// articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);

// Max token F1 and exact match over the gold spans. Empty golds throw
// ContractViolation.
SpanScore span_f1_em(std::string_view pred, const std::vector<std::string>& golds);

}  // namespace kgap::span
