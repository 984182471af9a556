#include "kgap/qa_data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "json.hpp"
#include "kgap/error.hpp"

namespace kgap {

using nlohmann::json;

std::size_t Question::gold_index() const {
    for (std::size_t i = 0; i < choices.size(); ++i)
        if (choices[i].label == answer_key) return i;
    throw ValidationError("question " + id + ": answer key '" + answer_key + "' matches no choice");
}

void validate(const Question& q) {
    if (q.id.empty()) throw ValidationError("missing question id");
    if (q.stem.empty()) throw ValidationError("question " + q.id + ": empty stem");
    if (q.choices.size() != 4)
        throw ValidationError("question " + q.id + ": expected 4 choices, found " + std::to_string(q.choices.size()));
    std::set<std::string> labels;
    std::size_t matches = 0;
    for (const auto& c : q.choices) {
        if (c.text.empty()) throw ValidationError("question " + q.id + ": empty choice text");
        if (!labels.insert(c.label).second) throw ValidationError("question " + q.id + ": duplicate label " + c.label);
        if (c.label == q.answer_key) ++matches;
    }
    if (matches != 1) throw ValidationError("question " + q.id + ": answer key must match exactly one choice");
}

// ---------------------------------------------------------------------------

namespace {

std::string squash(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == ' ' || c == '_') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace

RelationVocabulary::RelationVocabulary() {
    const std::vector<std::string> base{"causes", "definedAs", "enables",  "isa",      "locatedIn",
                                        "madeOf", "partOf",    "provides", "synonymOf"};
    labels_ = base;
    base_count_ = base.size();
    for (const auto& b : base)
        if (b != "synonymOf") labels_.push_back(b + "^-1");
}

const RelationVocabulary& RelationVocabulary::standard() {
    static const RelationVocabulary vocab;
    return vocab;
}

std::optional<std::size_t> RelationVocabulary::index_of(std::string_view label) const {
    std::string key = squash(label);
    bool inverse = false;
    for (std::string_view suffix : {"^-1", "-inv", "inv", "-1"}) {
        if (key.size() > suffix.size() && key.ends_with(suffix)) {
            key.resize(key.size() - suffix.size());
            inverse = true;
            break;
        }
    }
    for (std::size_t i = 0; i < base_count_; ++i) {
        if (squash(labels_[i]) != key) continue;
        if (!inverse) return i;
        return this->inverse(i);
    }
    return std::nullopt;
}

std::optional<std::size_t> RelationVocabulary::inverse(std::size_t i) const {
    if (i >= labels_.size()) return std::nullopt;
    if (i >= base_count_) {
        auto base = labels_[i].substr(0, labels_[i].size() - 3);
        for (std::size_t b = 0; b < base_count_; ++b)
            if (labels_[b] == base) return b;
        return std::nullopt;
    }
    for (std::size_t j = base_count_; j < labels_.size(); ++j)
        if (labels_[j] == labels_[i] + "^-1") return j;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

std::string require_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw ValidationError(std::string("missing string field '") + key + "'");
    return it->get<std::string>();
}

Question parse_question(const json& j) {
    if (!j.is_object()) throw ValidationError("record is not a JSON object");
    Question q;
    q.id = require_string(j, "id");
    q.stem = require_string(j, "stem");
    q.answer_key = require_string(j, "answer_key");
    auto it = j.find("choices");
    if (it == j.end() || !it->is_array()) throw ValidationError("missing array field 'choices'");
    for (const auto& c : *it) {
        if (!c.is_object()) throw ValidationError("choice is not an object");
        q.choices.push_back({require_string(c, "label"), require_string(c, "text")});
    }
    validate(q);
    return q;
}

std::vector<std::string> string_array(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_array()) throw ValidationError(std::string("missing array field '") + key + "'");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string()) throw ValidationError(std::string("non-string entry in '") + key + "'");
        out.push_back(v.get<std::string>());
    }
    return out;
}

json parse_line(const std::string& line, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw IngestError(std::string("invalid JSON: ") + e.what(), line_no);
    }
}

template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        fn(parse_line(line, line_no), line_no);
    }
    if (in.bad()) throw IngestError("stream read failure", line_no + 1);
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    return in;
}

}  // namespace

KgdStats compute_stats(const std::vector<KGDExample>& examples) {
    KgdStats s;
    std::set<std::string> ids;
    double spans = 0.0;
    double relations = 0.0;
    for (const auto& ex : examples) {
        ids.insert(ex.question.id);
        spans += static_cast<double>(std::set<std::string>(ex.spans.begin(), ex.spans.end()).size());
        relations += static_cast<double>(ex.relations.size());
    }
    s.questions = ids.size();
    s.question_facts = examples.size();
    if (!examples.empty()) {
        s.avg_spans = spans / static_cast<double>(examples.size());
        s.avg_relations = relations / static_cast<double>(examples.size());
    }
    return s;
}

KgdLoadResult load_kgd(std::istream& in) {
    KgdLoadResult result;
    const auto& vocab = RelationVocabulary::standard();
    for_each_line(in, [&](const json& j, std::size_t line_no) {
        try {
            KGDExample ex;
            ex.question = parse_question(j);
            ex.fact = require_string(j, "fact");
            if (ex.fact.empty()) throw ValidationError("empty fact");
            ex.spans = string_array(j, "spans");
            if (ex.spans.empty()) throw ValidationError("no spans");
            for (const auto& s : ex.spans) {
                if (s.empty() || ex.fact.find(s) == std::string::npos)
                    throw ValidationError("span '" + s + "' is not a substring of the fact");
            }
            for (const auto& r : string_array(j, "relations")) {
                auto idx = vocab.index_of(r);
                if (!idx) throw ValidationError("relation '" + r + "' is outside the relation vocabulary");
                ex.relations.push_back(*idx);
            }
            std::sort(ex.relations.begin(), ex.relations.end());
            ex.relations.erase(std::unique(ex.relations.begin(), ex.relations.end()), ex.relations.end());
            result.examples.push_back(std::move(ex));
        } catch (const ValidationError& e) {
            result.errors.push_back({line_no, e.what()});
        }
    });
    result.stats = compute_stats(result.examples);
    return result;
}

KgdLoadResult load_kgd_file(const std::string& path) {
    auto in = open_or_throw(path);
    return load_kgd(in);
}

QuestionLoadResult load_questions(std::istream& in) {
    QuestionLoadResult result;
    for_each_line(in, [&](const json& j, std::size_t line_no) {
        try {
            QuestionRecord rec{parse_question(j), std::nullopt};
            if (auto it = j.find("fact"); it != j.end()) {
                if (!it->is_string()) throw ValidationError("'fact' must be a string");
                rec.fact = it->get<std::string>();
            }
            result.records.push_back(std::move(rec));
        } catch (const ValidationError& e) {
            result.errors.push_back({line_no, e.what()});
        }
    });
    return result;
}

QuestionLoadResult load_questions_file(const std::string& path) {
    auto in = open_or_throw(path);
    return load_questions(in);
}

std::vector<SidecarSpan> load_span_sidecar(std::istream& in) {
    std::vector<SidecarSpan> out;
    for_each_line(in, [&](const json& j, std::size_t line_no) {
        try {
            SidecarSpan s{require_string(j, "question_id"), require_string(j, "fact"), require_string(j, "span")};
            if (s.fact.find(s.span) == std::string::npos) throw ValidationError("span is not a substring of fact");
            out.push_back(std::move(s));
        } catch (const ValidationError& e) {
            throw IngestError(std::string("span sidecar: ") + e.what(), line_no);
        }
    });
    return out;
}

std::vector<SidecarSpan> load_span_sidecar_file(const std::string& path) {
    auto in = open_or_throw(path);
    return load_span_sidecar(in);
}

void write_span_sidecar(std::ostream& out, const SidecarSpan& s) {
    json j{{"question_id", s.question_id}, {"fact", s.fact}, {"span", s.span}};
    out << j.dump() << '\n';
}

}  // namespace kgap
