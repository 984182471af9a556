#pragma once

// Exhaustive reference implementations used by unit and acceptance tests.
// They scan every tuple, sentence or token run instead of using indices.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <utility>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "kgap/ingest.hpp"
#include "kgap/qa_data.hpp"
#include "kgap/retrieval.hpp"
#include "kgap/text.hpp"

namespace oracle {

using kgap::retrieval::ScoredDoc;

inline std::set<std::string> tokens(const std::string& s) {
    auto c = kgap::text::content_tokens(s);
    return {c.begin(), c.end()};
}

inline bool intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
    for (const auto& x : a)
        if (b.count(x)) return true;
    return false;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::vector<std::string> i, u;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(i));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
    return u.empty() ? 0.0 : static_cast<double>(i.size()) / static_cast<double>(u.size());
}

inline std::vector<ScoredDoc> rank(std::vector<ScoredDoc> all, std::size_t k) {
    std::stable_sort(all.begin(), all.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

inline std::vector<ScoredDoc> search_tuples(const std::vector<kgap::KnowledgeTuple>& kb, const std::string& span,
                                            const std::string& choice, std::size_t k,
                                            const std::vector<std::string>& excluded = {}) {
    auto S = tokens(span), C = tokens(choice);
    if (S.empty() || C.empty()) return {};
    auto query = tokens(span + " " + choice);
    std::vector<ScoredDoc> hits;
    for (std::uint32_t id = 0; id < kb.size(); ++id) {
        const auto& t = kb[id];
        if (std::find(excluded.begin(), excluded.end(), t.relation) != excluded.end()) continue;
        auto subj = tokens(t.subject), obj = tokens(t.object);
        bool match = (intersects(subj, S) && intersects(obj, C)) || (intersects(subj, C) && intersects(obj, S));
        if (match) hits.push_back({id, jaccard(tokens(t.subject + " " + t.object), query)});
    }
    return rank(std::move(hits), k);
}

// Sentence filter written with regular expressions.
inline bool clean(const std::string& s, std::size_t max_len = 300) {
    static const std::regex charset(R"(^[A-Za-z0-9][A-Za-z0-9 .,;:!?'"()%/-]*$)");
    static const std::regex bad_hyphen(R"((^|[^A-Za-z0-9])-|-([^A-Za-z0-9]|$))");
    static const std::regex two_sentences(R"([.!?] +[A-Z])");
    if (s.empty() || s.size() > max_len) return false;
    if (!std::regex_match(s, charset)) return false;
    if (std::regex_search(s, bad_hyphen)) return false;
    if (std::regex_search(s, two_sentences)) return false;
    static const std::set<std::string> negations{"no", "not", "never", "none", "nothing",
                                                 "neither", "nor", "cannot", "without"};
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ') ++j;
        std::string w = s.substr(i, j - i);
        // strip edge characters that are neither letters nor digits
        auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
        while (!w.empty() && !alnum(w.front())) w.erase(w.begin());
        while (!w.empty() && !alnum(w.back())) w.pop_back();
        for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (negations.count(w)) return false;
        if (w.size() >= 3 && w.compare(w.size() - 3, 3, "n't") == 0) return false;
        i = j;
    }
    return true;
}

inline std::vector<ScoredDoc> search_text(const std::vector<std::string>& corpus, const std::string& span,
                                          const std::string& choice, std::size_t k, double k1 = 1.2,
                                          double b = 0.75) {
    auto S = tokens(span), C = tokens(choice);
    if (S.empty() || C.empty()) return {};
    auto query = tokens(span + " " + choice);

    std::vector<std::vector<std::string>> terms;
    double total = 0.0;
    for (const auto& s : corpus) {
        terms.push_back(kgap::text::normalized_terms(s));
        total += static_cast<double>(terms.back().size());
    }
    const double n = static_cast<double>(corpus.size());
    const double avgdl = corpus.empty() ? 0.0 : total / n;

    auto tf = [&](std::size_t d, const std::string& t) {
        return static_cast<double>(std::count(terms[d].begin(), terms[d].end(), t));
    };
    auto df = [&](const std::string& t) {
        double c = 0;
        for (std::size_t d = 0; d < terms.size(); ++d)
            if (tf(d, t) > 0) ++c;
        return c;
    };

    std::vector<ScoredDoc> hits;
    for (std::uint32_t d = 0; d < corpus.size(); ++d) {
        bool contains = true;
        for (const auto& t : query) contains = contains && tf(d, t) > 0;
        if (!contains || !clean(corpus[d])) continue;
        double score = 0.0;
        for (const auto& t : query) {  // std::set iterates in sorted order
            double dft = df(t);
            double idf = std::log(1.0 + (n - dft + 0.5) / (dft + 0.5));
            double f = tf(d, t);
            double norm = avgdl > 0.0 ? static_cast<double>(terms[d].size()) / avgdl : 0.0;
            score += idf * (f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * norm)));
        }
        hits.push_back({d, score});
    }
    return rank(std::move(hits), k);
}

// Enumerates every token run [i, j] of the fact that starts and ends on an
// uncovered content word and contains neither punctuation nor a covered word.
inline std::optional<std::string> heuristic_span(const std::string& stem, const std::string& fact,
                                                 double min_coverage = 0.6) {
    const auto& sw = kgap::text::StopwordList::builtin();
    auto S = tokens(stem), F = tokens(fact);
    if (F.empty()) return std::nullopt;
    std::size_t covered = 0;
    for (const auto& f : F) covered += S.count(f);
    if (static_cast<double>(covered) / static_cast<double>(F.size()) < min_coverage) return std::nullopt;

    auto toks = kgap::text::tokenize(fact);
    enum Kind { gap, stop, blocked };
    std::vector<Kind> kind;
    for (const auto& t : toks) {
        bool has_alnum = std::any_of(t.text.begin(), t.text.end(),
                                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; });
        if (!has_alnum) {
            kind.push_back(blocked);
            continue;
        }
        auto norm = kgap::text::normalize_token(t.text, sw);
        kind.push_back(norm.empty() ? stop : S.count(norm) ? blocked : gap);
    }

    int best_count = 0;
    std::size_t best_i = 0, best_j = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        for (std::size_t j = i; j < toks.size(); ++j) {
            if (kind[i] != gap || kind[j] != gap) continue;
            int count = 0;
            bool ok = true;
            for (std::size_t x = i; x <= j; ++x) {
                if (kind[x] == blocked) ok = false;
                if (kind[x] == gap) ++count;
            }
            if (ok && count > best_count) {
                best_count = count;
                best_i = i;
                best_j = j;
            }
        }
    }
    if (best_count == 0) return std::nullopt;
    return fact.substr(toks[best_i].start, toks[best_j].end - toks[best_i].start);
}

// Random knowledge for property tests.
struct RandomKb {
    std::vector<kgap::KnowledgeTuple> tuples;
    std::vector<std::string> sentences;
};

inline const std::vector<std::string>& words() {
    static const std::vector<std::string> w{
        "metal", "metals", "spoon", "spoons", "steel", "heat", "heating", "conduct", "conducts", "conductor",
        "light", "energy", "sun", "plant", "plants", "water", "ice", "cold", "iron", "copper",
        "wire", "wiring", "electric", "electrical", "bulb", "food", "animal", "dog", "solid", "buckle",
        "the", "a", "of", "is", "in", "and", "to", "from", "are", "it"};
    return w;
}

inline std::string random_phrase(std::mt19937_64& rng, int min_words, int max_words) {
    std::uniform_int_distribution<int> len(min_words, max_words);
    std::string s;
    int n = len(rng);
    for (int i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += words()[rng() % words().size()];
    }
    return s;
}

inline RandomKb random_kb(std::mt19937_64& rng, std::size_t n_tuples, std::size_t n_sentences) {
    static const std::vector<std::string> rels{"/r/MadeOf", "/r/IsA", "/r/UsedFor", "/r/RelatedTo", "/r/PartOf"};
    static const std::vector<std::string> noise{"not",  "never", "don't", "Then",    "-x", "&",    "well-known",
                                                "(it)", "90%",   "a/b",   "Heat.",   "!",  "None", "cannot"};
    RandomKb kb;
    for (std::size_t i = 0; i < n_tuples; ++i)
        kb.tuples.push_back({random_phrase(rng, 1, 3), rels[rng() % rels.size()], random_phrase(rng, 1, 3),
                             "t" + std::to_string(i)});
    for (std::size_t i = 0; i < n_sentences; ++i) {
        std::string s = random_phrase(rng, 3, 14);
        if (rng() % 3 == 0) {
            auto pos = rng() % (s.size() + 1);
            s.insert(pos, " " + noise[rng() % noise.size()] + " ");
        }
        if (rng() % 2) s += '.';
        if (rng() % 25 == 0) s = std::string(301, 'a');
        while (!s.empty() && s.front() == ' ') s.erase(s.begin());
        kb.sentences.push_back(s);
    }
    return kb;
}

// Fact of up to max_tokens tokens with stopwords and punctuation mixed in,
// and a stem that reuses a random part of the fact's words.
inline std::pair<std::string, std::string> random_stem_and_fact(std::mt19937_64& rng, int max_tokens = 30) {
    static const std::vector<std::string> punct{",", ".", ";", "(", ")", "?"};
    std::uniform_int_distribution<int> len(1, max_tokens);
    int n = len(rng);
    std::string fact, stem;
    for (int i = 0; i < n; ++i) {
        std::string w = rng() % 8 == 0 ? punct[rng() % punct.size()] : words()[rng() % words().size()];
        if (!fact.empty() && w.size() > 1) fact += ' ';
        fact += w;
        if (w.size() > 1 && rng() % 4 != 0) stem += w + ' ';
    }
    stem += random_phrase(rng, 0, 3);
    return {stem, fact};
}

}  // namespace oracle
