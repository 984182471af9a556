#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace kgap::text {

// A surface token and the byte range [start, end) it occupies in the source.
struct Token {
    std::string text;
    std::size_t start = 0;
    std::size_t end = 0;

    bool operator==(const Token&) const = default;
};

using TokenSequence = std::vector<Token>;

// Splits on whitespace and detaches leading/trailing ASCII punctuation as
// single-character tokens. Interior punctuation (hyphens, apostrophes) stays.
TokenSequence tokenize(std::string_view text);

// Joins the tokens back into the source using their offsets. `source_size`
// is the length of the original text; gaps are filled with single spaces.
std::string detokenize(const TokenSequence& tokens, std::size_t source_size);

std::string to_lower(std::string_view s);

// True when the token has at least one ASCII letter or digit.
bool is_word(std::string_view token);

// Classic Porter (1980) suffix stripping. Input is expected lowercase.
std::string porter_stem(std::string_view word);

class StopwordList {
public:
    StopwordList() = default;

    // One lowercase word per line; '#' begins a comment; blank lines ignored.
    static StopwordList parse(std::istream& in);
    static StopwordList from_file(const std::string& path);

    // The list shipped in data/stopwords.txt, compiled in.
    static const StopwordList& builtin();

    bool contains(std::string_view word) const;
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

// Sorted, duplicate-free set of normalized (lowercased, stemmed,
// non-stopword) tokens.
class ContentTokenSet {
public:
    ContentTokenSet() = default;
    explicit ContentTokenSet(std::vector<std::string> tokens);

    bool contains(std::string_view token) const;
    bool empty() const { return tokens_.empty(); }
    std::size_t size() const { return tokens_.size(); }

    auto begin() const { return tokens_.begin(); }
    auto end() const { return tokens_.end(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    // Space-joined members, in sorted order.
    std::string joined() const;

    std::size_t intersection_size(const ContentTokenSet& other) const;

    bool operator==(const ContentTokenSet&) const = default;

private:
    std::vector<std::string> tokens_;
};

// Lowercases a raw token; returns "" when it is punctuation-only or a
// stopword, otherwise its Porter stem.
std::string normalize_token(std::string_view raw, const StopwordList& stopwords);

// Normalized terms in order of occurrence, duplicates kept.
std::vector<std::string> normalized_terms(std::string_view text,
                                          const StopwordList& stopwords = StopwordList::builtin());

ContentTokenSet content_tokens(std::string_view text,
                               const StopwordList& stopwords = StopwordList::builtin());

// |a ∩ b| / |a|; 1.0 when a is empty.
double coverage(const ContentTokenSet& a, const ContentTokenSet& b);

}  // namespace kgap::text
