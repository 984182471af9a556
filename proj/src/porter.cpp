// Porter, M.F. "An algorithm for suffix stripping", Program 14(3), 1980.
// Rules follow the published algorithm, not the later C release (which
// changed ABLI->ABLE into BLI->BLE and added LOGI->LOG).

#include <array>
#include <string>
#include <string_view>

#include "kgap/text.hpp"

namespace kgap::text {

namespace {

class Stemmer {
public:
    explicit Stemmer(std::string_view word) : w_(word) {}

    std::string run() {
        if (w_.empty()) return w_;
        step1a();
        step1b();
        step1c();
        step2();
        step3();
        step4();
        step5a();
        step5b();
        return w_;
    }

private:
    std::string w_;

    bool consonant(std::size_t i) const {
        switch (w_[i]) {
        case 'a':
        case 'e':
        case 'i':
        case 'o':
        case 'u':
            return false;
        case 'y':
            return i == 0 ? true : !consonant(i - 1);
        default:
            return true;
        }
    }

    // m() of the prefix w_[0, len)
    int measure(std::size_t len) const {
        int m = 0;
        std::size_t i = 0;
        while (i < len && consonant(i)) ++i;
        while (i < len) {
            while (i < len && !consonant(i)) ++i;
            if (i >= len) break;
            while (i < len && consonant(i)) ++i;
            ++m;
        }
        return m;
    }

    bool has_vowel(std::size_t len) const {
        for (std::size_t i = 0; i < len; ++i)
            if (!consonant(i)) return true;
        return false;
    }

    bool double_consonant(std::size_t len) const {
        return len >= 2 && w_[len - 1] == w_[len - 2] && consonant(len - 1);
    }

    // *o: stem ends cvc, the final c not w, x or y
    bool cvc(std::size_t len) const {
        if (len < 3) return false;
        if (!consonant(len - 1) || consonant(len - 2) || !consonant(len - 3)) return false;
        char c = w_[len - 1];
        return c != 'w' && c != 'x' && c != 'y';
    }

    bool ends(std::string_view suffix) const {
        return w_.size() >= suffix.size() && std::string_view(w_).substr(w_.size() - suffix.size()) == suffix;
    }

    std::size_t stem_len(std::string_view suffix) const { return w_.size() - suffix.size(); }

    void replace_suffix(std::string_view suffix, std::string_view repl) {
        w_.resize(stem_len(suffix));
        w_ += repl;
    }

    struct Rule {
        std::string_view suffix;
        std::string_view repl;
    };

    // Longest matching suffix wins; if its condition fails nothing else is tried.
    template <std::size_t N, typename Cond>
    void apply_rules(const std::array<Rule, N>& rules, Cond cond) {
        const Rule* best = nullptr;
        for (const auto& r : rules)
            if (ends(r.suffix) && (best == nullptr || r.suffix.size() > best->suffix.size())) best = &r;
        if (best != nullptr && cond(stem_len(best->suffix), best->suffix))
            replace_suffix(best->suffix, best->repl);
    }

    void step1a() {
        if (ends("sses")) {
            replace_suffix("sses", "ss");
        } else if (ends("ies")) {
            replace_suffix("ies", "i");
        } else if (ends("ss")) {
            // unchanged
        } else if (ends("s")) {
            replace_suffix("s", "");
        }
    }

    void step1b() {
        bool trimmed = false;
        if (ends("eed")) {
            if (measure(stem_len("eed")) > 0) replace_suffix("eed", "ee");
            return;
        }
        if (ends("ed") && has_vowel(stem_len("ed"))) {
            replace_suffix("ed", "");
            trimmed = true;
        } else if (ends("ing") && has_vowel(stem_len("ing"))) {
            replace_suffix("ing", "");
            trimmed = true;
        }
        if (!trimmed) return;

        if (ends("at")) {
            w_ += 'e';
        } else if (ends("bl")) {
            w_ += 'e';
        } else if (ends("iz")) {
            w_ += 'e';
        } else if (double_consonant(w_.size())) {
            char c = w_.back();
            if (c != 'l' && c != 's' && c != 'z') w_.pop_back();
        } else if (measure(w_.size()) == 1 && cvc(w_.size())) {
            w_ += 'e';
        }
    }

    void step1c() {
        if (ends("y") && has_vowel(stem_len("y"))) w_.back() = 'i';
    }

    void step2() {
        static constexpr std::array<Rule, 20> rules{{
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},   {"anci", "ance"},
            {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},     {"entli", "ent"},
            {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
            {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
            {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
        }};
        apply_rules(rules, [this](std::size_t len, std::string_view) { return measure(len) > 0; });
    }

    void step3() {
        static constexpr std::array<Rule, 7> rules{{
            {"icate", "ic"},
            {"ative", ""},
            {"alize", "al"},
            {"iciti", "ic"},
            {"ical", "ic"},
            {"ful", ""},
            {"ness", ""},
        }};
        apply_rules(rules, [this](std::size_t len, std::string_view) { return measure(len) > 0; });
    }

    void step4() {
        static constexpr std::array<Rule, 19> rules{{
            {"al", ""},  {"ance", ""}, {"ence", ""}, {"er", ""},  {"ic", ""},   {"able", ""}, {"ible", ""},
            {"ant", ""}, {"ement", ""}, {"ment", ""}, {"ent", ""}, {"ion", ""}, {"ou", ""},   {"ism", ""},
            {"ate", ""}, {"iti", ""},  {"ous", ""},  {"ive", ""}, {"ize", ""},
        }};
        apply_rules(rules, [this](std::size_t len, std::string_view suffix) {
            if (measure(len) <= 1) return false;
            if (suffix == "ion") return len > 0 && (w_[len - 1] == 's' || w_[len - 1] == 't');
            return true;
        });
    }

    void step5a() {
        if (!ends("e")) return;
        std::size_t len = stem_len("e");
        int m = measure(len);
        if (m > 1 || (m == 1 && !cvc(len))) w_.pop_back();
    }

    void step5b() {
        if (measure(w_.size()) > 1 && double_consonant(w_.size()) && w_.back() == 'l') w_.pop_back();
    }
};

}  // namespace

std::string porter_stem(std::string_view word) { return Stemmer(word).run(); }

}  // namespace kgap::text
