#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgap/ingest.hpp"
#include "kgap/text.hpp"

namespace kgap::retrieval {

using DocId = std::uint32_t;

// |a ∩ b| / |a ∪ b|, 0 when both are empty.
double jaccard(const text::ContentTokenSet& a, const text::ContentTokenSet& b);

// Token -> tuple postings over subjects and objects. Immutable once built.
class TupleIndex {
public:
    TupleIndex() = default;
    static TupleIndex build(std::vector<KnowledgeTuple> tuples);

    std::size_t size() const { return tuples_.size(); }
    const KnowledgeTuple& tuple(DocId id) const { return tuples_.at(id); }
    const std::vector<KnowledgeTuple>& tuples() const { return tuples_; }

    std::span<const DocId> subject_postings(const std::string& token) const;
    std::span<const DocId> object_postings(const std::string& token) const;

    const text::ContentTokenSet& subject_tokens(DocId id) const { return subject_tokens_[id]; }
    const text::ContentTokenSet& object_tokens(DocId id) const { return object_tokens_[id]; }
    // Tokens of "subject object", the set tuples are scored on.
    const text::ContentTokenSet& tuple_tokens(DocId id) const { return tuple_tokens_[id]; }

    // Line-delimited persistence, see docs in index_io.cpp.
    void save(std::ostream& out) const;
    static TupleIndex load(std::istream& in);

    // Throws ValidationError when a posting list references a missing tuple,
    // is unsorted, or contains duplicates.
    void check_invariants() const;

private:
    std::vector<KnowledgeTuple> tuples_;
    std::vector<text::ContentTokenSet> subject_tokens_;
    std::vector<text::ContentTokenSet> object_tokens_;
    std::vector<text::ContentTokenSet> tuple_tokens_;
    std::unordered_map<std::string, std::vector<DocId>> subject_postings_;
    std::unordered_map<std::string, std::vector<DocId>> object_postings_;

    void derive_tokens();
};

struct Posting {
    DocId doc = 0;
    std::uint32_t tf = 0;

    bool operator==(const Posting&) const = default;
};

// Token -> (sentence, term frequency) postings over a sentence corpus.
class TextIndex {
public:
    TextIndex() = default;
    static TextIndex build(std::vector<CorpusSentence> sentences);

    std::size_t size() const { return sentences_.size(); }
    const CorpusSentence& sentence(DocId id) const { return sentences_.at(id); }
    const std::vector<CorpusSentence>& sentences() const { return sentences_; }

    std::span<const Posting> postings(const std::string& token) const;
    std::uint32_t doc_length(DocId id) const { return doc_lengths_.at(id); }
    double avg_doc_len() const { return avg_doc_len_; }

    void save(std::ostream& out) const;
    static TextIndex load(std::istream& in);
    void check_invariants() const;

private:
    std::vector<CorpusSentence> sentences_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_len_ = 0.0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

struct ScoredDoc {
    DocId id = 0;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

// Descending score, then ascending id.
bool ranks_before(const ScoredDoc& a, const ScoredDoc& b);

// Tuples whose subject shares a token with the span and object shares one
// with the choice (or the reverse), ranked by Jaccard against span+choice.
// Relations listed in `excluded_relations` never match.
std::vector<ScoredDoc> search_tuples(const TupleIndex& index, std::string_view span, std::string_view choice,
                                     std::size_t k = 5, std::span<const std::string> excluded_relations = {});

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// ln(1 + (N - df + 0.5) / (df + 0.5))
double bm25_idf(std::size_t df, std::size_t num_docs);
double bm25_term_weight(std::uint32_t tf, std::uint32_t doc_len, double avg_doc_len, const Bm25Params& p);

struct CleanRules {
    std::size_t max_length = 300;
    std::vector<std::string> negations{"no",      "not",     "never", "none", "nothing",
                                       "neither", "nor",     "cannot", "n't", "without"};
};

// Length, negation, character-set, leading-character, single-sentence and
// hyphen checks.
bool clean_sentence(std::string_view s, const CleanRules& rules = {});

// BM25-ranked sentences containing every content token of the span and of
// the choice that also pass clean_sentence.
std::vector<ScoredDoc> search_text(const TextIndex& index, std::string_view span, std::string_view choice,
                                   std::size_t k = 5, const CleanRules& rules = {}, const Bm25Params& bm25 = {});

struct RetrievalConfig {
    std::size_t tuple_k = 5;
    std::size_t text_k = 5;
    std::vector<std::string> excluded_relations;
    CleanRules clean;
    Bm25Params bm25;
};

// Per-choice KB: sentencized tuples first, then corpus sentences. Never empty.
struct EvidenceSet {
    std::vector<KnowledgeSentence> sentences;
    std::vector<double> scores;

    std::size_t size() const { return sentences.size(); }
    bool empty() const { return sentences.empty(); }
};

EvidenceSet assemble_kb(std::string_view span, std::string_view choice, const TupleIndex& tuples,
                        const TextIndex& text, const RetrievalConfig& config = {});

}  // namespace kgap::retrieval
