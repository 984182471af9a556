#include "kgap/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stopwords_data.hpp"

namespace kgap::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

TokenSequence tokenize(std::string_view text) {
    TokenSequence out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && is_space(text[i])) ++i;
        if (i >= n) break;
        std::size_t j = i;
        while (j < n && !is_space(text[j])) ++j;

        // chunk is [i, j); peel punctuation from both ends
        std::size_t lo = i;
        std::size_t hi = j;
        while (lo < hi && is_punct(text[lo])) ++lo;
        while (hi > lo && is_punct(text[hi - 1])) --hi;

        for (std::size_t p = i; p < lo; ++p) out.push_back({std::string(1, text[p]), p, p + 1});
        if (lo < hi) out.push_back({std::string(text.substr(lo, hi - lo)), lo, hi});
        for (std::size_t p = std::max(hi, lo); p < j; ++p)
            out.push_back({std::string(1, text[p]), p, p + 1});
        i = j;
    }
    return out;
}

std::string detokenize(const TokenSequence& tokens, std::size_t source_size) {
    std::string out(source_size, ' ');
    for (const auto& t : tokens) out.replace(t.start, t.end - t.start, t.text);
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_word(std::string_view token) {
    return std::any_of(token.begin(), token.end(), is_alnum);
}

StopwordList StopwordList::parse(std::istream& in) {
    StopwordList list;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        list.words_.insert(to_lower(std::string_view(line).substr(first, last - first + 1)));
    }
    return list;
}

StopwordList StopwordList::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stopword list: " + path);
    return parse(in);
}

const StopwordList& StopwordList::builtin() {
    static const StopwordList list = [] {
        std::istringstream in{std::string(kBuiltinStopwords)};
        return parse(in);
    }();
    return list;
}

bool StopwordList::contains(std::string_view word) const {
    return words_.find(std::string(word)) != words_.end();
}

ContentTokenSet::ContentTokenSet(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
}

bool ContentTokenSet::contains(std::string_view token) const {
    return std::binary_search(tokens_.begin(), tokens_.end(), token);
}

std::string ContentTokenSet::joined() const {
    std::string out;
    for (const auto& t : tokens_) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

std::size_t ContentTokenSet::intersection_size(const ContentTokenSet& other) const {
    std::size_t count = 0;
    auto a = tokens_.begin();
    auto b = other.tokens_.begin();
    while (a != tokens_.end() && b != other.tokens_.end()) {
        if (*a < *b) {
            ++a;
        } else if (*b < *a) {
            ++b;
        } else {
            ++count;
            ++a;
            ++b;
        }
    }
    return count;
}

std::string normalize_token(std::string_view raw, const StopwordList& stopwords) {
    std::string word = to_lower(raw);
    if (word.size() > 2 && word.ends_with("'s")) word.resize(word.size() - 2);
    if (!is_word(word) || stopwords.contains(word)) return {};

    // Porter is not idempotent on its own output ("agreed" -> "agre" -> "agr");
    // iterate to a fixpoint so normalized text re-normalizes to itself.
    for (;;) {
        std::string next = porter_stem(word);
        if (next == word) break;
        word = std::move(next);
    }
    auto lo = std::find_if(word.begin(), word.end(), is_alnum);
    auto hi = std::find_if(word.rbegin(), word.rend(), is_alnum).base();
    word = std::string(lo, hi);
    if (word.empty() || stopwords.contains(word)) return {};
    return word;
}

std::vector<std::string> normalized_terms(std::string_view text, const StopwordList& stopwords) {
    std::vector<std::string> out;
    for (const auto& tok : tokenize(text)) {
        auto term = normalize_token(tok.text, stopwords);
        if (!term.empty()) out.push_back(std::move(term));
    }
    return out;
}

ContentTokenSet content_tokens(std::string_view text, const StopwordList& stopwords) {
    return ContentTokenSet(normalized_terms(text, stopwords));
}

double coverage(const ContentTokenSet& a, const ContentTokenSet& b) {
    if (a.empty()) return 1.0;
    return static_cast<double>(a.intersection_size(b)) / static_cast<double>(a.size());
}

}  // namespace kgap::text
