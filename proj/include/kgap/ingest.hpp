#pragma once

#include <cstddef>
#include <functional>
#include <istream>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace kgap {

struct KnowledgeTuple {
    std::string subject;
    std::string relation;  // "/r/MadeOf"
    std::string object;
    std::string source_id;

    bool operator==(const KnowledgeTuple&) const = default;
};

enum class Origin { tuple, corpus, backoff };

std::string_view origin_name(Origin o);

struct KnowledgeSentence {
    std::string text;
    Origin origin = Origin::corpus;
    std::string source_id;
};

struct CorpusSentence {
    std::string text;
    std::string doc_id;
};

// Reads text lines from a plain or gzip-compressed file, or from an
// existing stream. Trailing "\n" and "\r" are removed.
class LineReader {
public:
    explicit LineReader(std::istream& in);
    // Gzip-transparent. Throws IngestError if the file cannot be opened.
    static LineReader open(const std::string& path);

    LineReader(LineReader&&) noexcept;
    LineReader& operator=(LineReader&&) noexcept;
    ~LineReader();

    // Returns false at end of input. Throws IngestError on a read failure.
    bool next(std::string& line);
    std::size_t line_number() const { return line_number_; }

private:
    struct Impl;
    explicit LineReader(std::unique_ptr<Impl> impl);

    std::unique_ptr<Impl> impl_;
    std::size_t line_number_ = 0;
};

struct AssertionStats {
    std::size_t rows = 0;
    std::size_t kept = 0;
    std::size_t non_english = 0;
    std::size_t malformed = 0;
    // First few malformed-row diagnostics, "line N: reason".
    std::vector<std::string> warnings;
};

// ConceptNet assertion rows: assertion URI, relation URI, start URI, end URI,
// JSON metadata, tab separated. Only /c/en/ -> /c/en/ rows are emitted.
AssertionStats parse_assertions(LineReader& in, const std::function<void(KnowledgeTuple)>& sink);
std::vector<KnowledgeTuple> parse_assertions(LineReader& in, AssertionStats* stats = nullptr);

// "/c/en/belt_buckle/n" -> "belt buckle"; empty when not an English concept.
std::string english_concept_text(std::string_view uri);

// "/r/MadeOf" -> "made of"
std::string split_relation(std::string_view relation);

// "s is split(v) o", without doubling a leading "is" ("dog is a animal").
KnowledgeSentence tuple_to_sentence(const KnowledgeTuple& t);

struct CorpusStats {
    std::size_t lines = 0;
    std::size_t kept = 0;
    std::size_t blank = 0;
};

CorpusStats load_corpus(LineReader& in, const std::function<void(CorpusSentence)>& sink);
std::vector<CorpusSentence> load_corpus(LineReader& in, CorpusStats* stats = nullptr);

}  // namespace kgap
