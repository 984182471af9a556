#include "kgap/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iterator>

#include "kgap/error.hpp"

namespace kgap::retrieval {

using text::ContentTokenSet;
using text::content_tokens;

double jaccard(const ContentTokenSet& a, const ContentTokenSet& b) {
    std::size_t inter = a.intersection_size(b);
    std::size_t uni = a.size() + b.size() - inter;
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

namespace {

template <typename Map>
auto find_span(const Map& map, const std::string& token) -> std::span<const typename Map::mapped_type::value_type> {
    auto it = map.find(token);
    if (it == map.end()) return {};
    return it->second;
}

std::vector<DocId> union_postings(const TupleIndex& index, const ContentTokenSet& tokens, bool subject) {
    std::vector<DocId> out;
    for (const auto& tok : tokens) {
        auto list = subject ? index.subject_postings(tok) : index.object_postings(tok);
        std::vector<DocId> merged;
        merged.reserve(out.size() + list.size());
        std::set_union(out.begin(), out.end(), list.begin(), list.end(), std::back_inserter(merged));
        out.swap(merged);
    }
    return out;
}

std::vector<DocId> intersect(const std::vector<DocId>& a, const std::vector<DocId>& b) {
    std::vector<DocId> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

void keep_top_k(std::vector<ScoredDoc>& docs, std::size_t k) {
    if (docs.size() > k) {
        std::partial_sort(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(k), docs.end(), ranks_before);
        docs.resize(k);
    } else {
        std::sort(docs.begin(), docs.end(), ranks_before);
    }
}

void require_k(std::size_t k) {
    if (k < 1) throw ContractViolation("retrieval k must be >= 1");
}

}  // namespace

// ---------------------------------------------------------------------------
// TupleIndex

TupleIndex TupleIndex::build(std::vector<KnowledgeTuple> tuples) {
    TupleIndex index;
    index.tuples_ = std::move(tuples);
    index.derive_tokens();
    for (DocId id = 0; id < index.tuples_.size(); ++id) {
        for (const auto& tok : index.subject_tokens_[id]) index.subject_postings_[tok].push_back(id);
        for (const auto& tok : index.object_tokens_[id]) index.object_postings_[tok].push_back(id);
    }
    return index;
}

void TupleIndex::derive_tokens() {
    subject_tokens_.clear();
    object_tokens_.clear();
    tuple_tokens_.clear();
    subject_tokens_.reserve(tuples_.size());
    object_tokens_.reserve(tuples_.size());
    tuple_tokens_.reserve(tuples_.size());
    for (const auto& t : tuples_) {
        subject_tokens_.push_back(content_tokens(t.subject));
        object_tokens_.push_back(content_tokens(t.object));
        tuple_tokens_.push_back(content_tokens(t.subject + " " + t.object));
    }
}

std::span<const DocId> TupleIndex::subject_postings(const std::string& token) const {
    return find_span(subject_postings_, token);
}

std::span<const DocId> TupleIndex::object_postings(const std::string& token) const {
    return find_span(object_postings_, token);
}

void TupleIndex::check_invariants() const {
    auto check = [&](const auto& postings, const char* which) {
        for (const auto& [tok, ids] : postings) {
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (ids[i] >= tuples_.size())
                    throw ValidationError(std::string(which) + " posting '" + tok + "' references missing tuple");
                if (i > 0 && ids[i - 1] >= ids[i])
                    throw ValidationError(std::string(which) + " posting '" + tok + "' unsorted or duplicated");
            }
        }
    };
    check(subject_postings_, "subject");
    check(object_postings_, "object");
}

std::vector<ScoredDoc> search_tuples(const TupleIndex& index, std::string_view span, std::string_view choice,
                                     std::size_t k, std::span<const std::string> excluded_relations) {
    require_k(k);
    auto span_tokens = content_tokens(span);
    auto choice_tokens = content_tokens(choice);
    if (span_tokens.empty() || choice_tokens.empty()) return {};

    auto forward = intersect(union_postings(index, span_tokens, true), union_postings(index, choice_tokens, false));
    auto reverse = intersect(union_postings(index, choice_tokens, true), union_postings(index, span_tokens, false));
    std::vector<DocId> candidates;
    std::set_union(forward.begin(), forward.end(), reverse.begin(), reverse.end(), std::back_inserter(candidates));

    auto query = content_tokens(std::string(span) + " " + std::string(choice));
    std::vector<ScoredDoc> scored;
    scored.reserve(candidates.size());
    for (DocId id : candidates) {
        const auto& rel = index.tuple(id).relation;
        if (std::find(excluded_relations.begin(), excluded_relations.end(), rel) != excluded_relations.end())
            continue;
        scored.push_back({id, jaccard(index.tuple_tokens(id), query)});
    }
    keep_top_k(scored, k);
    return scored;
}

// ---------------------------------------------------------------------------
// TextIndex

TextIndex TextIndex::build(std::vector<CorpusSentence> sentences) {
    TextIndex index;
    index.sentences_ = std::move(sentences);
    index.doc_lengths_.reserve(index.sentences_.size());
    double total = 0.0;
    for (DocId id = 0; id < index.sentences_.size(); ++id) {
        auto terms = text::normalized_terms(index.sentences_[id].text);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
        total += static_cast<double>(terms.size());
        std::sort(terms.begin(), terms.end());
        for (std::size_t i = 0; i < terms.size();) {
            std::size_t j = i;
            while (j < terms.size() && terms[j] == terms[i]) ++j;
            index.postings_[terms[i]].push_back({id, static_cast<std::uint32_t>(j - i)});
            i = j;
        }
    }
    if (!index.sentences_.empty()) index.avg_doc_len_ = total / static_cast<double>(index.sentences_.size());
    return index;
}

std::span<const Posting> TextIndex::postings(const std::string& token) const { return find_span(postings_, token); }

void TextIndex::check_invariants() const {
    if (doc_lengths_.size() != sentences_.size()) throw ValidationError("doc length table size mismatch");
    double total = 0.0;
    for (auto len : doc_lengths_) total += len;
    double expect = sentences_.empty() ? 0.0 : total / static_cast<double>(sentences_.size());
    if (std::abs(expect - avg_doc_len_) > 1e-9 * std::max(1.0, expect))
        throw ValidationError("avg_doc_len does not match doc lengths");
    for (const auto& [tok, list] : postings_) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i].doc >= sentences_.size()) throw ValidationError("posting '" + tok + "' references missing doc");
            if (i > 0 && list[i - 1].doc >= list[i].doc) throw ValidationError("posting '" + tok + "' unsorted");
            if (list[i].tf == 0) throw ValidationError("posting '" + tok + "' has zero tf");
        }
    }
}

double bm25_idf(std::size_t df, std::size_t num_docs) {
    double n = static_cast<double>(num_docs);
    double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_term_weight(std::uint32_t tf, std::uint32_t doc_len, double avg_doc_len, const Bm25Params& p) {
    double f = tf;
    double norm = avg_doc_len > 0.0 ? static_cast<double>(doc_len) / avg_doc_len : 0.0;
    return f * (p.k1 + 1.0) / (f + p.k1 * (1.0 - p.b + p.b * norm));
}

std::vector<ScoredDoc> search_text(const TextIndex& index, std::string_view span, std::string_view choice,
                                   std::size_t k, const CleanRules& rules, const Bm25Params& bm25) {
    require_k(k);
    auto span_tokens = content_tokens(span);
    auto choice_tokens = content_tokens(choice);
    if (span_tokens.empty() || choice_tokens.empty()) return {};
    auto query = content_tokens(std::string(span) + " " + std::string(choice));

    // containment of every span and choice token == containment of every query token
    std::vector<std::span<const Posting>> lists;
    for (const auto& tok : query) {
        auto list = index.postings(tok);
        if (list.empty()) return {};
        lists.push_back(list);
    }
    std::vector<std::size_t> order(lists.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lists[a].size() < lists[b].size(); });

    std::vector<DocId> docs;
    for (const auto& p : lists[order[0]]) docs.push_back(p.doc);
    for (std::size_t oi = 1; oi < order.size() && !docs.empty(); ++oi) {
        std::vector<DocId> next;
        auto list = lists[order[oi]];
        auto it = list.begin();
        for (DocId d : docs) {
            it = std::lower_bound(it, list.end(), d, [](const Posting& p, DocId v) { return p.doc < v; });
            if (it == list.end()) break;
            if (it->doc == d) next.push_back(d);
        }
        docs.swap(next);
    }

    std::vector<double> idf(lists.size());
    for (std::size_t i = 0; i < lists.size(); ++i) idf[i] = bm25_idf(lists[i].size(), index.size());

    std::vector<ScoredDoc> scored;
    for (DocId d : docs) {
        if (!clean_sentence(index.sentence(d).text, rules)) continue;
        double score = 0.0;
        for (std::size_t i = 0; i < lists.size(); ++i) {
            auto it = std::lower_bound(lists[i].begin(), lists[i].end(), d,
                                       [](const Posting& p, DocId v) { return p.doc < v; });
            score += idf[i] * bm25_term_weight(it->tf, index.doc_length(d), index.avg_doc_len(), bm25);
        }
        scored.push_back({d, score});
    }
    keep_top_k(scored, k);
    return scored;
}

// ---------------------------------------------------------------------------
// clean_sentence

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool allowed_char(char c) {
    if (is_alnum(c) || c == ' ') return true;
    switch (c) {
    case '.':
    case ',':
    case ';':
    case ':':
    case '!':
    case '?':
    case '\'':
    case '"':
    case '(':
    case ')':
    case '-':
    case '%':
    case '/':
        return true;
    default:
        return false;
    }
}

bool has_negation(std::string_view s, const CleanRules& rules) {
    for (const auto& tok : text::tokenize(s)) {
        auto word = text::to_lower(tok.text);
        for (const auto& neg : rules.negations) {
            if (neg.starts_with("n'")) {
                if (word.ends_with(neg)) return true;
            } else if (word == neg) {
                return true;
            }
        }
    }
    return false;
}

bool single_sentence(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '.' && s[i] != '!' && s[i] != '?') continue;
        std::size_t j = i + 1;
        if (j >= s.size() || s[j] != ' ') continue;
        while (j < s.size() && s[j] == ' ') ++j;
        if (j < s.size() && std::isupper(static_cast<unsigned char>(s[j]))) return false;
    }
    return true;
}

bool hyphens_ok(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '-') continue;
        if (i == 0 || i + 1 >= s.size() || !is_alnum(s[i - 1]) || !is_alnum(s[i + 1])) return false;
    }
    return true;
}

}  // namespace

bool clean_sentence(std::string_view s, const CleanRules& rules) {
    if (s.empty() || s.size() > rules.max_length) return false;
    if (!is_alnum(s.front())) return false;
    if (!std::all_of(s.begin(), s.end(), allowed_char)) return false;
    if (!hyphens_ok(s)) return false;
    if (!single_sentence(s)) return false;
    return !has_negation(s, rules);
}

// ---------------------------------------------------------------------------

EvidenceSet assemble_kb(std::string_view span, std::string_view choice, const TupleIndex& tuples,
                        const TextIndex& text, const RetrievalConfig& config) {
    EvidenceSet kb;
    for (const auto& hit : search_tuples(tuples, span, choice, config.tuple_k, config.excluded_relations)) {
        kb.sentences.push_back(tuple_to_sentence(tuples.tuple(hit.id)));
        kb.scores.push_back(hit.score);
    }
    for (const auto& hit : search_text(text, span, choice, config.text_k, config.clean, config.bm25)) {
        const auto& s = text.sentence(hit.id);
        kb.sentences.push_back({s.text, Origin::corpus, s.doc_id});
        kb.scores.push_back(hit.score);
    }
    if (kb.empty()) {
        kb.sentences.push_back({std::string(span) + " " + std::string(choice), Origin::backoff, ""});
        kb.scores.push_back(0.0);
    }
    return kb;
}

}  // namespace kgap::retrieval
