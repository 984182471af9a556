// Index persistence. Both formats are UTF-8, line delimited, tab separated,
// and written with tokens in byte order so identical inputs give identical
// files. Free-text fields escape '\\', '\t' and '\n' as "\\\\", "\\t", "\\n".
//
// Tuple index (version 1):
//   kgap-tuple-index <TAB> 1
//   tuples <TAB> N
//   subject <TAB> relation <TAB> object <TAB> source_id      (N lines; id = order)
//   subject-postings <TAB> M
//   token <TAB> id id id ...                                 (M lines)
//   object-postings <TAB> M
//   token <TAB> id id id ...                                 (M lines)
//
// Text index (version 1):
//   kgap-text-index <TAB> 1
//   sentences <TAB> N
//   doc_length <TAB> doc_id <TAB> text                       (N lines; id = order)
//   postings <TAB> M
//   token <TAB> id:tf id:tf ...                              (M lines)

#include <algorithm>
#include <charconv>
#include <string>

#include "kgap/error.hpp"
#include "kgap/retrieval.hpp"

namespace kgap::retrieval {

namespace {

constexpr std::string_view kTupleMagic = "kgap-tuple-index";
constexpr std::string_view kTextMagic = "kgap-text-index";
constexpr int kFormatVersion = 1;

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '\\':
            out += "\\\\";
            break;
        case '\t':
            out += "\\t";
            break;
        case '\n':
            out += "\\n";
            break;
        default:
            out.push_back(c);
        }
    }
    return out;
}

std::string unescape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\' || i + 1 >= s.size()) {
            out.push_back(s[i]);
            continue;
        }
        char n = s[++i];
        out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n);
    }
    return out;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename Int>
Int parse_int(std::string_view s, std::size_t line) {
    Int v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw IngestError("bad integer '" + std::string(s) + "' in index", line);
    return v;
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::string line() {
        std::string l;
        if (!std::getline(in_, l)) throw IngestError("truncated index file", line_ + 1);
        ++line_;
        return l;
    }

    std::size_t header(std::string_view keyword) {
        auto l = line();
        auto cols = split(l, '\t');
        if (cols.size() != 2 || cols[0] != keyword)
            throw IngestError("expected '" + std::string(keyword) + "' section", line_);
        return parse_int<std::size_t>(cols[1], line_);
    }

    std::size_t number() const { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

void check_magic(Reader& r, std::string_view magic) {
    auto version = r.header(magic);
    if (version != kFormatVersion)
        throw IngestError("unsupported " + std::string(magic) + " version " + std::to_string(version), 1);
}

template <typename Map>
std::vector<const typename Map::value_type*> sorted_entries(const Map& map) {
    std::vector<const typename Map::value_type*> out;
    out.reserve(map.size());
    for (const auto& kv : map) out.push_back(&kv);
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->first < b->first; });
    return out;
}

void write_id_postings(std::ostream& out, std::string_view keyword,
                       const std::unordered_map<std::string, std::vector<DocId>>& postings) {
    out << keyword << '\t' << postings.size() << '\n';
    for (const auto* kv : sorted_entries(postings)) {
        out << kv->first << '\t';
        for (std::size_t i = 0; i < kv->second.size(); ++i) out << (i ? " " : "") << kv->second[i];
        out << '\n';
    }
}

void read_id_postings(Reader& r, std::string_view keyword, std::unordered_map<std::string, std::vector<DocId>>& postings) {
    auto count = r.header(keyword);
    for (std::size_t i = 0; i < count; ++i) {
        auto l = r.line();
        auto cols = split(l, '\t');
        if (cols.size() != 2) throw IngestError("bad posting line", r.number());
        auto& list = postings[std::string(cols[0])];
        for (auto id : split(cols[1], ' ')) list.push_back(parse_int<DocId>(id, r.number()));
    }
}

}  // namespace

void TupleIndex::save(std::ostream& out) const {
    out << kTupleMagic << '\t' << kFormatVersion << '\n';
    out << "tuples\t" << tuples_.size() << '\n';
    for (const auto& t : tuples_)
        out << escape(t.subject) << '\t' << escape(t.relation) << '\t' << escape(t.object) << '\t'
            << escape(t.source_id) << '\n';
    write_id_postings(out, "subject-postings", subject_postings_);
    write_id_postings(out, "object-postings", object_postings_);
}

TupleIndex TupleIndex::load(std::istream& in) {
    Reader r(in);
    check_magic(r, kTupleMagic);
    TupleIndex index;
    auto n = r.header("tuples");
    index.tuples_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto l = r.line();
        auto cols = split(l, '\t');
        if (cols.size() != 4) throw IngestError("bad tuple line", r.number());
        index.tuples_.push_back({unescape(cols[0]), unescape(cols[1]), unescape(cols[2]), unescape(cols[3])});
    }
    read_id_postings(r, "subject-postings", index.subject_postings_);
    read_id_postings(r, "object-postings", index.object_postings_);
    index.derive_tokens();
    index.check_invariants();
    return index;
}

void TextIndex::save(std::ostream& out) const {
    out << kTextMagic << '\t' << kFormatVersion << '\n';
    out << "sentences\t" << sentences_.size() << '\n';
    for (std::size_t i = 0; i < sentences_.size(); ++i)
        out << doc_lengths_[i] << '\t' << escape(sentences_[i].doc_id) << '\t' << escape(sentences_[i].text) << '\n';
    out << "postings\t" << postings_.size() << '\n';
    for (const auto* kv : sorted_entries(postings_)) {
        out << kv->first << '\t';
        for (std::size_t i = 0; i < kv->second.size(); ++i)
            out << (i ? " " : "") << kv->second[i].doc << ':' << kv->second[i].tf;
        out << '\n';
    }
}

TextIndex TextIndex::load(std::istream& in) {
    Reader r(in);
    check_magic(r, kTextMagic);
    TextIndex index;
    auto n = r.header("sentences");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto l = r.line();
        auto cols = split(l, '\t');
        if (cols.size() != 3) throw IngestError("bad sentence line", r.number());
        auto len = parse_int<std::uint32_t>(cols[0], r.number());
        index.doc_lengths_.push_back(len);
        total += len;
        index.sentences_.push_back({unescape(cols[2]), unescape(cols[1])});
    }
    if (n > 0) index.avg_doc_len_ = total / static_cast<double>(n);
    auto m = r.header("postings");
    for (std::size_t i = 0; i < m; ++i) {
        auto l = r.line();
        auto cols = split(l, '\t');
        if (cols.size() != 2) throw IngestError("bad posting line", r.number());
        auto& list = index.postings_[std::string(cols[0])];
        for (auto entry : split(cols[1], ' ')) {
            auto colon = entry.find(':');
            if (colon == std::string_view::npos) throw IngestError("bad posting entry", r.number());
            list.push_back({parse_int<DocId>(entry.substr(0, colon), r.number()),
                            parse_int<std::uint32_t>(entry.substr(colon + 1), r.number())});
        }
    }
    index.check_invariants();
    return index;
}

}  // namespace kgap::retrieval
