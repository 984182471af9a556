#include "kgap/span.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "kgap/error.hpp"

namespace kgap::span {

namespace {

enum class TokenClass { gap, neutral, barrier };

}  // namespace

std::optional<SpanPrediction> heuristic_span(const Question& q, std::string_view fact,
                                             const HeuristicOptions& options) {
    const auto& stopwords = text::StopwordList::builtin();
    auto stem_tokens = text::content_tokens(q.stem, stopwords);
    auto fact_tokens = text::content_tokens(fact, stopwords);
    if (fact_tokens.empty()) return std::nullopt;
    if (text::coverage(fact_tokens, stem_tokens) < options.min_coverage) return std::nullopt;

    auto tokens = text::tokenize(fact);
    std::vector<TokenClass> cls;
    cls.reserve(tokens.size());
    for (const auto& tok : tokens) {
        if (!text::is_word(tok.text)) {
            cls.push_back(TokenClass::barrier);
            continue;
        }
        auto term = text::normalize_token(tok.text, stopwords);
        if (term.empty())
            cls.push_back(TokenClass::neutral);
        else if (stem_tokens.contains(term))
            cls.push_back(TokenClass::barrier);
        else
            cls.push_back(TokenClass::gap);
    }

    std::size_t best_start = 0;
    std::size_t best_last = 0;
    std::size_t best_count = 0;
    for (std::size_t i = 0; i < tokens.size();) {
        if (cls[i] != TokenClass::gap) {
            ++i;
            continue;
        }
        std::size_t count = 0;
        std::size_t last = i;
        std::size_t j = i;
        for (; j < tokens.size() && cls[j] != TokenClass::barrier; ++j) {
            if (cls[j] == TokenClass::gap) {
                ++count;
                last = j;
            }
        }
        if (count > best_count) {
            best_start = i;
            best_last = last;
            best_count = count;
        }
        i = j;
    }
    if (best_count == 0) return std::nullopt;

    SpanPrediction pred;
    pred.char_start = tokens[best_start].start;
    pred.char_end = tokens[best_last].end;
    pred.text = std::string(fact.substr(pred.char_start, pred.char_end - pred.char_start));
    pred.source = SpanSource::heuristic;
    return pred;
}

std::optional<SpanPrediction> locate_span(std::string_view fact, std::string_view span, SpanSource source) {
    if (span.empty()) return std::nullopt;
    auto pos = fact.find(span);
    if (pos == std::string_view::npos) return std::nullopt;
    return SpanPrediction{std::string(span), pos, pos + span.size(), source};
}

// ---------------------------------------------------------------------------

std::string normalize_answer(std::string_view s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (char c : s) {
        auto u = static_cast<unsigned char>(c);
        if (std::ispunct(u)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(u)));
    }
    std::istringstream in(cleaned);
    std::string word;
    std::string out;
    while (in >> word) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

namespace {

std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return pred == gold ? 1.0 : 0.0;
    std::map<std::string, int> counts;
    for (const auto& w : gold) ++counts[w];
    int common = 0;
    for (const auto& w : pred) {
        auto it = counts.find(w);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    double p = static_cast<double>(common) / static_cast<double>(pred.size());
    double r = static_cast<double>(common) / static_cast<double>(gold.size());
    return 2.0 * p * r / (p + r);
}

}  // namespace

SpanScore span_f1_em(std::string_view pred, const std::vector<std::string>& golds) {
    if (golds.empty()) throw ContractViolation("span_f1_em requires at least one gold span");
    auto norm_pred = normalize_answer(pred);
    auto pred_words = words(norm_pred);
    SpanScore best;
    for (const auto& g : golds) {
        auto norm_gold = normalize_answer(g);
        if (norm_gold == norm_pred) best.em = 1;
        best.f1 = std::max(best.f1, token_f1(pred_words, words(norm_gold)));
    }
    return best;
}

}  // namespace kgap::span
