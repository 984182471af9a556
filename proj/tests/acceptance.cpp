#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "kgap/ingest.hpp"
#include "kgap/qa_data.hpp"
#include "kgap/retrieval.hpp"
#include "kgap/span.hpp"
#include "kgap/training.hpp"
#include "model_oracle.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace kgap;
using TD = ad::Tensor<double>;

namespace {

const std::string data_dir = KGAP_TEST_DATA;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %d %s (%.2fs) %s\n", o.pass ? "PASS" : "FAIL", id, name, secs, o.detail.c_str());
    std::fflush(stdout);
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

Outcome retrieval_equivalence() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> k_dist(1, 10);
    std::size_t queries = 0, mismatches = 0, tuple_hits = 0, text_hits = 0;
    const std::size_t sizes[4][2] = {{250, 125}, {500, 250}, {750, 375}, {1000, 500}};
    for (const auto& sz : sizes) {
        auto kb = oracle::random_kb(rng, sz[0], sz[1]);
        auto tuples = retrieval::TupleIndex::build(kb.tuples);
        std::vector<CorpusSentence> sents;
        for (const auto& s : kb.sentences) sents.push_back({s, ""});
        auto text = retrieval::TextIndex::build(sents);
        for (int q = 0; q < 50; ++q, ++queries) {
            auto span = oracle::random_phrase(rng, 1, 3);
            auto choice = oracle::random_phrase(rng, 1, 2);
            auto k = k_dist(rng);
            auto got_t = retrieval::search_tuples(tuples, span, choice, k);
            auto got_x = retrieval::search_text(text, span, choice, k);
            if (got_t != oracle::search_tuples(kb.tuples, span, choice, k)) ++mismatches;
            if (got_x != oracle::search_text(kb.sentences, span, choice, k)) ++mismatches;
            tuple_hits += got_t.size();
            text_hits += got_x.size();
        }
    }
    double secs = elapsed(t0);
    bool ok = mismatches == 0 && queries == 200 && tuple_hits > 0 && text_hits > 0 && secs < 30.0;
    return {ok, fmt("queries=%.0f mismatches=%.0f tuple_hits=%.0f text_hits=%.0f", double(queries), double(mismatches),
                    double(tuple_hits), double(text_hits))};
}

Outcome sentencization() {
    std::size_t total = 0, wrong = 0;
    if (tuple_to_sentence({"belt buckle", "/r/MadeOf", "metal", ""}).text != "belt buckle is made of metal") ++wrong;
    ++total;
    std::ifstream in(data_dir + "/sentencization.tsv");
    if (!in) return {false, "missing sentencization.tsv"};
    std::string line;
    std::size_t fixtures = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, '\t')) cols.push_back(c);
        if (cols.size() != 4) return {false, "bad fixture line: " + line};
        if (tuple_to_sentence({cols[0], cols[1], cols[2], ""}).text != cols[3]) ++wrong;
        ++fixtures;
        ++total;
    }
    return {wrong == 0 && fixtures == 20, fmt("fixtures=%.0f wrong=%.0f", double(fixtures), double(wrong))};
}

Outcome span_equivalence() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(515);
    std::size_t mismatches = 0, present = 0;
    for (int trial = 0; trial < 500; ++trial) {
        auto [stem, fact] = oracle::random_stem_and_fact(rng, 30);
        Question q{"q", stem, {{"A", "one"}, {"B", "two"}, {"C", "three"}, {"D", "four"}}, "A"};
        auto got = span::heuristic_span(q, fact, {0.6});
        auto want = oracle::heuristic_span(stem, fact, 0.6);
        if (got.has_value() != want.has_value() || (got && got->text != *want)) ++mismatches;
        present += got.has_value();
    }
    double secs = elapsed(t0);
    return {mismatches == 0 && secs < 10.0, fmt("pairs=500 mismatches=%.0f with_span=%.0f", double(mismatches), double(present))};
}

Outcome gradient_fidelity() {
    auto t0 = std::chrono::steady_clock::now();
    auto r = train::model_grad_check(train::micro_config(), {});
    double secs = elapsed(t0);
    return {r.max_rel_error <= 1e-4 && secs < 60.0,
            fmt("max_rel_error=%.3g checked=%.0f", r.max_rel_error, double(r.checked)) + " worst=" + r.worst_param};
}

Outcome loss_identities() {
    ad::Rng rng(5);
    // uniform scores
    double uniform;
    {
        ad::Tape<double> tape;
        uniform = train::qa_loss(tape.constant(TD(1, 4, 0.3)), 1).value().item();
    }
    bool ln4 = std::abs(uniform - std::log(4.0)) <= 1e-9;

    // masked positions: zero analytic gradient, finite difference probe
    auto scores = ad::uniform_tensor<double>(1, 4, 1.0, rng);
    std::vector<bool> target(17, false);
    target[2] = target[11] = true;
    const std::size_t gold = 1;
    ad::ParameterSet<double> params;
    auto& logits = params.add("logits", ad::uniform_tensor<double>(4, 17, 2.0, rng));
    auto loss_at = [&](const TD& l) {
        ad::Tape<double> tape;
        return train::total_loss(tape.constant(scores), tape.constant(l), gold, target, 1.0).value().item();
    };
    params.zero_grad();
    {
        ad::Tape<double> tape;
        tape.backward(train::total_loss(tape.constant(scores), tape.param(logits), gold, target, 1.0));
    }
    double worst_grad = 0.0, worst_fd = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        if (j == gold) continue;
        for (std::size_t k = 0; k < 17; ++k) {
            if (target[k]) continue;
            worst_grad = std::max(worst_grad, std::abs(logits.grad(j, k)));
            TD up = logits.value, down = logits.value;
            up(j, k) += 1e-3;
            down(j, k) -= 1e-3;
            worst_fd = std::max(worst_fd, std::abs((loss_at(up) - loss_at(down)) / 2e-3));
        }
    }
    bool masked = worst_grad == 0.0 && worst_fd <= 1e-12;

    // lambda = 0
    bool exact = true;
    for (int trial = 0; trial < 50; ++trial) {
        auto s = ad::uniform_tensor<double>(1, 4, 3.0, rng);
        auto l = ad::uniform_tensor<double>(4, 17, 3.0, rng);
        std::vector<bool> t(17, false);
        t[rng() % 17] = true;
        std::size_t g = rng() % 4;
        ad::Tape<double> tape;
        auto sv = tape.constant(s);
        double q = train::qa_loss(sv, g).value().item();
        double total = train::total_loss(sv, tape.constant(l), g, t, 0.0).value().item();
        exact = exact && total == q;
    }
    return {ln4 && masked && exact, fmt("|qa-ln4|=%.3g masked_grad=%.3g masked_fd=%.3g lambda0_exact=%.0f",
                                        std::abs(uniform - std::log(4.0)), worst_grad, worst_fd, exact ? 1.0 : 0.0)};
}

Outcome synthetic_overfit() {
    auto t0 = std::chrono::steady_clock::now();
    auto cfg = train::micro_config();
    auto set = synthetic::make_overfit_set(cfg);
    model::GapModel model(cfg);
    auto params = model.init_params<double>(13, set.embeddings);
    train::TrainOptions opt;
    opt.config.lr = 0.01;
    opt.config.batch_size = 1;
    opt.config.max_epochs = 200;
    opt.config.patience = 1000;
    opt.seed = 13;
    auto result = train::train<double>(model, std::move(params), set.embeddings, set.examples, set.examples, opt);
    auto& p = result.final_params;
    std::size_t correct = 0;
    double min_prob = 1.0;
    for (const auto& ex : set.examples) {
        auto a = model.answer(p, set.embeddings, ex.input);
        correct += a.predicted == ex.gold;
        for (std::size_t k = 0; k < ex.relations.size(); ++k)
            if (ex.relations[k])
                min_prob = std::min(min_prob, 1.0 / (1.0 + std::exp(-a.choices[ex.gold].relation_logits[k])));
    }
    double acc = static_cast<double>(correct) / static_cast<double>(set.examples.size());
    double secs = elapsed(t0);
    return {acc == 1.0 && min_prob >= 0.9 && secs < 300.0,
            fmt("train_accuracy=%.3f min_gold_relation_prob=%.4f epochs=%.0f", acc, min_prob, double(result.log.size()))};
}

Outcome protocol_arithmetic() {
    std::vector<double> injected{1, 2, 3};
    auto s = train::evaluate_multiseed({0, 1, 2}, [&](std::uint64_t i) { return injected[i]; }, 2);
    return {s.mean == 2.0 && std::abs(s.sigma - 0.8165) <= 1e-4, fmt("mean=%.6f sigma=%.6f", s.mean, s.sigma)};
}

Outcome choice_equivariance() {
    std::mt19937_64 rng(808);
    auto cfg = train::micro_config();
    cfg.freeze_embeddings = true;
    model::GapModel model(cfg);
    ad::Rng erng(9);
    std::vector<std::string> words;
    for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
    EmbeddingTable emb(words, ad::uniform_tensor<float>(20, cfg.embed_dim, 1.0, erng));
    auto params = model.init_params<double>(21, emb);
    std::vector<std::size_t> order{0, 1, 2, 3};
    std::size_t bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto in = model_oracle::random_input(rng, 20);
        std::shuffle(order.begin(), order.end(), rng);
        auto base = model.answer(params, emb, in);
        auto perm = model.answer(params, emb, model_oracle::permute(in, order));
        bool ok = true;
        for (std::size_t i = 0; i < 4; ++i) {
            ok = ok && perm.choices[i].total == base.choices[order[i]].total;
            ok = ok && perm.choices[i].score_f == base.choices[order[i]].score_f;
            ok = ok && perm.choices[i].score_r == base.choices[order[i]].score_r;
            ok = ok && perm.choices[i].relation_logits == base.choices[order[i]].relation_logits;
        }
        std::size_t ties = 0;
        for (const auto& c : base.choices) ties += c.total == base.choices[base.predicted].total;
        if (ties == 1) ok = ok && order[perm.predicted] == base.predicted;
        bad += !ok;
    }
    return {bad == 0, fmt("inputs=100 violations=%.0f", double(bad))};
}

bool stats_match(const KgdStats& s, std::size_t questions, std::size_t pairs, double spans, double rels) {
    return s.questions == questions && s.question_facts == pairs && std::round(s.avg_spans * 100) == std::round(spans * 100) &&
           std::round(s.avg_relations * 100) == std::round(rels * 100);
}

Outcome dataset_validation(const char* full) {
    auto micro = load_kgd_file(data_dir + "/kgd_micro.jsonl");
    const auto& s = micro.stats;
    bool ok = micro.errors.empty() && s.questions == 20 && s.question_facts == 25 && s.avg_spans == 29.0 / 25.0 &&
              s.avg_relations == 50.0 / 25.0;
    std::string detail = fmt("micro=%.0f/%.0f/%.2f/%.2f", double(s.questions), double(s.question_facts), s.avg_spans,
                             s.avg_relations);
    if (full) {
        auto f = load_kgd_file(full);
        bool full_ok = stats_match(f.stats, 1151, 1531, 1.43, 3.31);
        ok = ok && full_ok;
        detail += fmt(" full=%.0f/%.0f/%.2f/%.2f", double(f.stats.questions), double(f.stats.question_facts),
                      f.stats.avg_spans, f.stats.avg_relations);
    } else {
        detail += " full=not supplied";
    }
    return {ok, detail};
}

}  // namespace

// Optional argument: path to the full KGD train file.
int main(int argc, char** argv) {
    const char* full_kgd = argc > 1 ? argv[1] : nullptr;
    report(1, "retrieval oracle equivalence", retrieval_equivalence);
    report(2, "sentencization", sentencization);
    report(3, "heuristic span oracle equivalence", span_equivalence);
    report(4, "gradient fidelity", gradient_fidelity);
    report(5, "loss identities", loss_identities);
    report(6, "synthetic overfit", synthetic_overfit);
    report(7, "protocol arithmetic", protocol_arithmetic);
    report(8, "choice equivariance", choice_equivariance);
    report(9, "dataset validation", [&] { return dataset_validation(full_kgd); });
    return failures == 0 ? 0 : 1;
}
