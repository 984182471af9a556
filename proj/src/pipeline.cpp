#include "kgap/pipeline.hpp"

namespace kgap::pipeline {

SpanTable::SpanTable(const std::vector<SidecarSpan>& rows) {
    for (const auto& r : rows) spans_[{r.question_id, r.fact}] = r.span;
}

const std::string* SpanTable::find(const std::string& question_id, const std::string& fact) const {
    auto it = spans_.find({question_id, fact});
    return it == spans_.end() ? nullptr : &it->second;
}

namespace {

train::TextExample make(const Question& q, const std::string& fact, const std::string& span, const Retrievers& r) {
    if (r.tuples == nullptr || r.text == nullptr) throw ContractViolation("retrievers not set");
    train::TextExample ex;
    ex.question = q;
    ex.fact = fact;
    ex.span = span;
    ex.kbs = train::retrieve_kbs(q, span, *r.tuples, *r.text, r.config);
    return ex;
}

}  // namespace

std::vector<train::TextExample> from_kgd(const std::vector<KGDExample>& rows, const Retrievers& r) {
    std::vector<train::TextExample> out;
    for (const auto& row : rows) {
        auto ex = make(row.question, row.fact, row.spans.empty() ? row.fact : row.spans.front(), r);
        ex.relations = row.relations;
        ex.supervision = row.relations.empty() ? train::Supervision::qa_only : train::Supervision::full;
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<train::TextExample> from_questions(const std::vector<QuestionRecord>& rows, const SpanTable& spans,
                                               const span::HeuristicOptions& heuristic, const Retrievers& r,
                                               SpanStats* stats) {
    SpanStats local;
    std::vector<train::TextExample> out;
    for (const auto& row : rows) {
        std::string fact = row.fact.value_or("");
        std::string chosen;
        if (const auto* s = spans.find(row.question.id, fact)) {
            chosen = *s;
            ++local.sidecar;
        } else if (auto h = span::heuristic_span(row.question, fact, heuristic)) {
            chosen = h->text;
            ++local.heuristic;
        } else {
            chosen = fact;
            ++local.whole_fact;
        }
        auto ex = make(row.question, fact, chosen, r);
        ex.supervision = train::Supervision::qa_only;
        out.push_back(std::move(ex));
    }
    if (stats != nullptr) *stats = local;
    return out;
}

std::vector<train::TrainingExample> to_training(const std::vector<train::TextExample>& rows,
                                                const EmbeddingTable& embeddings, std::size_t n_relations) {
    std::vector<train::TrainingExample> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(train::to_training_example(r, embeddings, n_relations));
    return out;
}

}  // namespace kgap::pipeline
