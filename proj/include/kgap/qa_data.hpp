#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace kgap {

struct Choice {
    std::string label;
    std::string text;
};

struct Question {
    std::string id;
    std::string stem;
    std::vector<Choice> choices;
    std::string answer_key;

    // Index of the choice whose label equals answer_key.
    std::size_t gold_index() const;
};

// Throws ValidationError unless there are 4 uniquely labelled, nonempty
// choices and exactly one matches answer_key.
void validate(const Question& q);

// Nine base gap relations followed by the inverses of all but synonymOf.
class RelationVocabulary {
public:
    static const RelationVocabulary& standard();

    std::size_t size() const { return labels_.size(); }
    const std::string& label(std::size_t i) const { return labels_.at(i); }
    const std::vector<std::string>& labels() const { return labels_; }

    // Accepts the canonical label ("madeOf", "isa^-1") plus loose spellings:
    // any case, spaces or underscores inside ("made of"), and "_inv"/"-1"
    // inverse suffixes.
    std::optional<std::size_t> index_of(std::string_view label) const;
    std::optional<std::size_t> inverse(std::size_t i) const;
    bool is_inverse(std::size_t i) const { return i >= base_count_; }
    std::size_t base_count() const { return base_count_; }

private:
    RelationVocabulary();
    std::vector<std::string> labels_;
    std::size_t base_count_ = 0;
};

struct KGDExample {
    Question question;
    std::string fact;
    std::vector<std::string> spans;
    std::vector<std::size_t> relations;  // sorted vocabulary indices, no duplicates
};

struct KgdStats {
    std::size_t questions = 0;       // distinct question ids
    std::size_t question_facts = 0;  // accepted lines
    double avg_spans = 0.0;          // unique spans per question-fact pair
    double avg_relations = 0.0;      // unique relations per question-fact pair
};

struct LineError {
    std::size_t line = 0;
    std::string reason;
};

struct KgdLoadResult {
    std::vector<KGDExample> examples;
    std::vector<LineError> errors;
    KgdStats stats;
};

KgdStats compute_stats(const std::vector<KGDExample>& examples);

// JSONL with id, stem, choices[{label,text}], answer_key, fact, spans,
// relations. Lines violating an invariant are reported and skipped; a line
// that is not valid JSON aborts with IngestError.
KgdLoadResult load_kgd(std::istream& in);
KgdLoadResult load_kgd_file(const std::string& path);

struct QuestionRecord {
    Question question;
    std::optional<std::string> fact;
};

struct QuestionLoadResult {
    std::vector<QuestionRecord> records;
    std::vector<LineError> errors;
};

// Question-only JSONL: the KGD schema without spans/relations, "fact" optional.
QuestionLoadResult load_questions(std::istream& in);
QuestionLoadResult load_questions_file(const std::string& path);

struct SidecarSpan {
    std::string question_id;
    std::string fact;
    std::string span;
};

// {"question_id", "fact", "span"} per line.
std::vector<SidecarSpan> load_span_sidecar(std::istream& in);
std::vector<SidecarSpan> load_span_sidecar_file(const std::string& path);
void write_span_sidecar(std::ostream& out, const SidecarSpan& s);

}  // namespace kgap
