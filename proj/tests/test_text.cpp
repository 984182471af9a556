#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kgap/text.hpp"

using namespace kgap::text;

namespace {

std::vector<std::string> texts(const TokenSequence& toks) {
    std::vector<std::string> out;
    for (const auto& t : toks) out.push_back(t.text);
    return out;
}

ContentTokenSet set_of(std::vector<std::string> v) { return ContentTokenSet(std::move(v)); }

}  // namespace

TEST_CASE("tokenize splits whitespace and detaches edge punctuation") {
    CHECK(texts(tokenize("Metal lets heat travel through.")) ==
          std::vector<std::string>{"Metal", "lets", "heat", "travel", "through", "."});
    CHECK(tokenize("").empty());
    CHECK(tokenize("   \t\n ").empty());
    CHECK(texts(tokenize("belt-buckle is shiny")) == std::vector<std::string>{"belt-buckle", "is", "shiny"});
    CHECK(texts(tokenize("(\"quoted\"), don't")) ==
          std::vector<std::string>{"(", "\"", "quoted", "\"", ")", ",", "don't"});
    CHECK(texts(tokenize("...")) == std::vector<std::string>{".", ".", "."});
}

TEST_CASE("token offsets index the source") {
    std::string s = "  The sun's (light) energy!";
    auto toks = tokenize(s);
    std::size_t prev_end = 0;
    for (const auto& t : toks) {
        CHECK(t.start >= prev_end);
        CHECK(t.end > t.start);
        CHECK(s.substr(t.start, t.end - t.start) == t.text);
        prev_end = t.end;
    }
    CHECK(toks.front().start == 2);
}

TEST_CASE("detokenize reproduces the source (property)") {
    std::mt19937 rng(5);
    const std::string alphabet = "abcXYZ019 .,;:!?'\"()-   \t";
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        int n = std::uniform_int_distribution<int>(0, 40)(rng);
        for (int i = 0; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
        // gaps are rendered as spaces, so compare against the tab-free form
        std::string spaced = s;
        for (auto& c : spaced)
            if (c == '\t') c = ' ';
        auto toks = tokenize(s);
        CHECK(detokenize(toks, s.size()) == spaced);
        for (const auto& t : toks) CHECK(s.substr(t.start, t.end - t.start) == t.text);
    }
}

TEST_CASE("porter_stem matches the NLTK original-algorithm reference") {
    std::ifstream in(KGAP_TEST_DATA "/porter_reference.tsv");
    REQUIRE(in);
    std::string line;
    std::size_t checked = 0, mismatched = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        auto word = line.substr(0, tab);
        auto expect = line.substr(tab + 1);
        auto got = porter_stem(word);
        if (got != expect) {
            ++mismatched;
            if (mismatched <= 10) MESSAGE(word << ": got " << got << ", expected " << expect);
        }
        ++checked;
    }
    CHECK(checked > 10000);
    CHECK(mismatched == 0);
}

TEST_CASE("porter_stem hand cases") {
    CHECK(porter_stem("caresses") == "caress");
    CHECK(porter_stem("ponies") == "poni");
    CHECK(porter_stem("relational") == "relat");
    CHECK(porter_stem("conditional") == "condit");
    CHECK(porter_stem("electrical") == "electr");
    CHECK(porter_stem("energy") == "energi");
    CHECK(porter_stem("a") == "a");
}

TEST_CASE("builtin stopword list") {
    const auto& sw = StopwordList::builtin();
    CHECK(sw.size() >= 140);
    CHECK(sw.size() <= 160);
    for (const char* w : {"a", "the", "of", "in", "is", "what", "which", "an"}) CHECK(sw.contains(w));
    // negations must stay visible to the sentence filter
    for (const char* w : {"not", "no", "never", "steel", "makes", "best"}) CHECK_FALSE(sw.contains(w));
}

TEST_CASE("stopword file parsing") {
    std::istringstream in("# header\n\nfoo\n  bar  \n# baz\nqux # trailing\n");
    auto sw = StopwordList::parse(in);
    CHECK(sw.contains("foo"));
    CHECK(sw.contains("bar"));
    CHECK(sw.contains("qux"));
    CHECK_FALSE(sw.contains("baz"));
    CHECK(sw.size() == 3);
    CHECK(StopwordList::from_file(PROJECT_STOPWORDS).size() == StopwordList::builtin().size());
}

TEST_CASE("content_tokens examples") {
    CHECK(content_tokens("a steel spoon in a cafeteria") == set_of({"cafeteria", "spoon", "steel"}));
    CHECK(content_tokens("the the a of").empty());
    CHECK(content_tokens("Evaporation evaporated") == set_of({"evapor"}));
    CHECK(content_tokens("Metal, metals; METAL!") == set_of({"metal"}));
    CHECK(content_tokens("the sun's light") == set_of({"light", "sun"}));
}

TEST_CASE("content_tokens invariants and idempotence (property)") {
    const auto& sw = StopwordList::builtin();
    std::ifstream in(KGAP_TEST_DATA "/porter_reference.tsv");
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') vocab.push_back(line.substr(0, line.find('\t')));
    REQUIRE(vocab.size() > 1000);

    std::mt19937 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string s;
        int n = std::uniform_int_distribution<int>(1, 12)(rng);
        for (int i = 0; i < n; ++i) s += vocab[rng() % vocab.size()] + (rng() % 5 == 0 ? ", " : " ");
        auto once = content_tokens(s);
        for (const auto& t : once) {
            CHECK(to_lower(t) == t);
            CHECK_FALSE(sw.contains(t));
        }
        CHECK(content_tokens(once.joined()) == once);
    }
}

TEST_CASE("coverage") {
    CHECK(coverage(set_of({"x", "y"}), set_of({"x", "y", "z"})) == 1.0);
    CHECK(coverage(set_of({"x", "y"}), set_of({"z"})) == 0.0);
    CHECK(coverage(set_of({}), set_of({"z"})) == 1.0);

    auto fact = content_tokens("a light bulb converts electrical energy into light energy when it is turned on");
    CHECK(fact == set_of({"bulb", "convert", "electr", "energi", "light", "turn"}));
    auto stem = content_tokens("A light bulb turns on when it receives energy from");
    CHECK(coverage(fact, stem) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("coverage properties") {
    std::mt19937 rng(3);
    std::vector<std::string> pool{"a1", "b2", "c3", "d4", "e5", "f6", "g7"};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::string> a, b, bigger;
        for (const auto& p : pool) {
            if (rng() % 2) a.push_back(p);
            bool in_b = rng() % 2;
            if (in_b) b.push_back(p);
            if (in_b || rng() % 2) bigger.push_back(p);
        }
        auto A = set_of(a), B = set_of(b), Big = set_of(bigger);
        if (!A.empty()) CHECK(coverage(A, A) == 1.0);
        CHECK(coverage(A, Big) >= coverage(A, B));
        CHECK(coverage(A, B) >= 0.0);
        CHECK(coverage(A, B) <= 1.0);
    }
}
