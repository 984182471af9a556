#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kgap/training.hpp"

namespace kgap::pipeline {

// Externally supplied spans keyed by (question id, fact).
class SpanTable {
public:
    SpanTable() = default;
    explicit SpanTable(const std::vector<SidecarSpan>& rows);

    const std::string* find(const std::string& question_id, const std::string& fact) const;
    std::size_t size() const { return spans_.size(); }

private:
    std::map<std::pair<std::string, std::string>, std::string> spans_;
};

struct Retrievers {
    const retrieval::TupleIndex* tuples = nullptr;
    const retrieval::TextIndex* text = nullptr;
    retrieval::RetrievalConfig config;
};

struct SpanStats {
    std::size_t sidecar = 0;
    std::size_t heuristic = 0;
    std::size_t whole_fact = 0;
};

// Full supervision from KGD rows; the first gold span drives retrieval.
std::vector<train::TextExample> from_kgd(const std::vector<KGDExample>& rows, const Retrievers& r);

// QA-only examples. Span: sidecar entry, else heuristic_span, else the whole fact.
std::vector<train::TextExample> from_questions(const std::vector<QuestionRecord>& rows, const SpanTable& spans,
                                               const span::HeuristicOptions& heuristic, const Retrievers& r,
                                               SpanStats* stats = nullptr);

std::vector<train::TrainingExample> to_training(const std::vector<train::TextExample>& rows,
                                                const EmbeddingTable& embeddings, std::size_t n_relations);

}  // namespace kgap::pipeline
