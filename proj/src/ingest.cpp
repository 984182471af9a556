#include "kgap/ingest.hpp"

#include <zlib.h>

#include <cctype>

#include "kgap/error.hpp"

namespace kgap {

std::string_view origin_name(Origin o) {
    switch (o) {
    case Origin::tuple:
        return "tuple";
    case Origin::corpus:
        return "corpus";
    case Origin::backoff:
        return "backoff";
    }
    return "unknown";
}

struct LineReader::Impl {
    std::istream* stream = nullptr;
    gzFile gz = nullptr;
    std::string path;
    std::string pending;  // bytes read from gz not yet returned

    ~Impl() {
        if (gz != nullptr) gzclose(gz);
    }

    bool read_gz_line(std::string& line) {
        line.clear();
        for (;;) {
            if (auto nl = pending.find('\n'); nl != std::string::npos) {
                line.append(pending, 0, nl);
                pending.erase(0, nl + 1);
                return true;
            }
            line += pending;
            pending.clear();
            char buf[1 << 16];
            int n = gzread(gz, buf, sizeof(buf));
            if (n < 0) {
                int err = 0;
                const char* msg = gzerror(gz, &err);
                throw IngestError("read failure in " + path + ": " + msg);
            }
            if (n == 0) return !line.empty();
            pending.assign(buf, static_cast<std::size_t>(n));
        }
    }
};

LineReader::LineReader(std::istream& in) : impl_(std::make_unique<Impl>()) { impl_->stream = &in; }

LineReader::LineReader(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
LineReader::LineReader(LineReader&&) noexcept = default;
LineReader& LineReader::operator=(LineReader&&) noexcept = default;
LineReader::~LineReader() = default;

LineReader LineReader::open(const std::string& path) {
    auto impl = std::make_unique<Impl>();
    impl->path = path;
    // gzopen reads uncompressed files transparently
    impl->gz = gzopen(path.c_str(), "rb");
    if (impl->gz == nullptr) throw IngestError("cannot open " + path);
    return LineReader(std::move(impl));
}

bool LineReader::next(std::string& line) {
    bool ok = false;
    if (impl_->gz != nullptr) {
        ok = impl_->read_gz_line(line);
    } else {
        ok = static_cast<bool>(std::getline(*impl_->stream, line));
        if (!ok && impl_->stream->bad()) throw IngestError("stream read failure", line_number_ + 1);
    }
    if (!ok) return false;
    ++line_number_;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    return true;
}

namespace {

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

constexpr std::size_t kMaxWarnings = 20;

}  // namespace

std::string english_concept_text(std::string_view uri) {
    constexpr std::string_view prefix = "/c/en/";
    if (!uri.starts_with(prefix)) return {};
    auto rest = uri.substr(prefix.size());
    rest = rest.substr(0, rest.find('/'));
    std::string text(rest);
    for (auto& c : text)
        if (c == '_') c = ' ';
    return trim(text);
}

AssertionStats parse_assertions(LineReader& in, const std::function<void(KnowledgeTuple)>& sink) {
    AssertionStats stats;
    std::string line;
    auto malformed = [&](const std::string& reason) {
        ++stats.malformed;
        if (stats.warnings.size() < kMaxWarnings)
            stats.warnings.push_back("line " + std::to_string(in.line_number()) + ": " + reason);
    };

    while (in.next(line)) {
        if (line.empty()) continue;
        ++stats.rows;
        auto cols = split_tabs(line);
        if (cols.size() != 5) {
            malformed("expected 5 columns, found " + std::to_string(cols.size()));
            continue;
        }
        auto relation = cols[1];
        auto start = cols[2];
        auto end = cols[3];
        if (!relation.starts_with("/r/") || relation.size() <= 3) {
            malformed("bad relation URI");
            continue;
        }
        if (!start.starts_with("/c/") || !end.starts_with("/c/")) {
            malformed("bad concept URI");
            continue;
        }
        if (!start.starts_with("/c/en/") || !end.starts_with("/c/en/")) {
            ++stats.non_english;
            continue;
        }
        KnowledgeTuple t{english_concept_text(start), std::string(relation), english_concept_text(end),
                         std::string(cols[0])};
        if (t.subject.empty() || t.object.empty()) {
            malformed("empty concept text");
            continue;
        }
        ++stats.kept;
        sink(std::move(t));
    }
    return stats;
}

std::vector<KnowledgeTuple> parse_assertions(LineReader& in, AssertionStats* stats) {
    std::vector<KnowledgeTuple> out;
    auto s = parse_assertions(in, [&](KnowledgeTuple t) { out.push_back(std::move(t)); });
    if (stats != nullptr) *stats = std::move(s);
    return out;
}

std::string split_relation(std::string_view relation) {
    auto name = relation.substr(relation.rfind('/') + 1);
    std::string out;
    for (std::size_t i = 0; i < name.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(name[i]);
        if (c == '_') {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
            continue;
        }
        if (std::isupper(c) && !out.empty() && out.back() != ' ') out.push_back(' ');
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

KnowledgeSentence tuple_to_sentence(const KnowledgeTuple& t) {
    std::string joined = t.subject + " is " + split_relation(t.relation) + " " + t.object;

    // drop any "is" that directly follows another "is"
    std::string text;
    std::string_view rest = joined;
    bool prev_is = false;
    while (!rest.empty()) {
        auto sp = rest.find(' ');
        auto word = rest.substr(0, sp);
        rest = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp + 1);
        if (word.empty()) continue;
        bool is_word = word == "is" || word == "Is" || word == "IS";
        if (is_word && prev_is) continue;
        prev_is = is_word;
        if (!text.empty()) text.push_back(' ');
        text += word;
    }
    return {std::move(text), Origin::tuple, t.source_id};
}

CorpusStats load_corpus(LineReader& in, const std::function<void(CorpusSentence)>& sink) {
    CorpusStats stats;
    std::string line;
    while (in.next(line)) {
        ++stats.lines;
        auto text = trim(line);
        if (text.empty()) {
            ++stats.blank;
            continue;
        }
        sink({std::move(text), std::to_string(stats.kept)});
        ++stats.kept;
    }
    return stats;
}

std::vector<CorpusSentence> load_corpus(LineReader& in, CorpusStats* stats) {
    std::vector<CorpusSentence> out;
    auto s = load_corpus(in, [&](CorpusSentence c) { out.push_back(std::move(c)); });
    if (stats != nullptr) *stats = s;
    return out;
}

}  // namespace kgap
