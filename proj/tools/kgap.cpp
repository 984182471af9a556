// kgap: ingest knowledge sources, retrieve evidence, annotate spans, train
// and evaluate the gap QA model.
//
// Exit codes: 0 success, 1 validation or usage error, 2 I/O error,
// 3 numeric failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgap/checkpoint.hpp"
#include "kgap/ingest.hpp"
#include "kgap/pipeline.hpp"
#include "kgap/retrieval.hpp"
#include "kgap/span.hpp"
#include "kgap/training.hpp"
#include "run_manifest.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace kgap;

namespace {

constexpr double kGradTolerance = 1e-4;

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw IngestError("cannot write " + p.string());
    return out;
}

train::RunConfig load_config(const std::string& path, train::RunConfig base = {}) {
    if (path.empty()) return base;
    return train::load_run_config(path, std::move(base));
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    std::string conceptnet, corpus, out, config;
};

int cmd_ingest(const IngestArgs& a) {
    cli::RunManifest manifest("ingest");
    auto cfg = load_config(a.config);
    manifest.set_config(a.config);
    manifest.add_input("conceptnet", a.conceptnet);
    manifest.add_input("corpus", a.corpus);

    auto tuple_reader = LineReader::open(a.conceptnet);
    AssertionStats tstats;
    auto tuples = parse_assertions(tuple_reader, &tstats);
    for (const auto& w : tstats.warnings) std::cerr << "warning: " << a.conceptnet << ": " << w << '\n';

    auto corpus_reader = LineReader::open(a.corpus);
    CorpusStats cstats;
    auto sentences = load_corpus(corpus_reader, &cstats);
    if (sentences.empty()) std::cerr << "warning: corpus " << a.corpus << " has no sentences\n";
    std::size_t clean = 0;
    for (const auto& s : sentences)
        if (retrieval::clean_sentence(s.text, cfg.retrieval.clean)) ++clean;

    auto tix = retrieval::TupleIndex::build(std::move(tuples));
    auto xix = retrieval::TextIndex::build(std::move(sentences));

    fs::path out(a.out);
    fs::create_directories(out);
    {
        auto f = open_out(out / "tuples.idx");
        tix.save(f);
    }
    {
        auto f = open_out(out / "text.idx");
        xix.save(f);
    }
    json stats{{"conceptnet",
                {{"rows", tstats.rows},
                 {"kept", tstats.kept},
                 {"skipped_non_english", tstats.non_english},
                 {"skipped_malformed", tstats.malformed}}},
               {"corpus",
                {{"lines", cstats.lines},
                 {"kept", cstats.kept},
                 {"blank", cstats.blank},
                 {"clean", clean},
                 {"filtered", cstats.kept - clean}}}};
    open_out(out / "stats.json") << stats.dump(2) << '\n';

    for (const char* f : {"tuples.idx", "text.idx", "stats.json"}) manifest.add_output((out / f).string());
    manifest.write(out / "manifest.json");

    std::cout << "tuples: " << tstats.kept << " kept, " << tstats.non_english << " non-English, " << tstats.malformed
              << " malformed\n"
              << "sentences: " << cstats.kept << " kept (" << clean << " clean, " << cstats.kept - clean
              << " filtered), " << cstats.blank << " blank lines\n";
    return 0;
}

struct Indices {
    retrieval::TupleIndex tuples;
    retrieval::TextIndex text;
};

Indices load_indices(const std::string& dir) {
    fs::path d(dir);
    auto open = [&](const char* name) {
        std::ifstream in(d / name);
        if (!in) throw IngestError("cannot open index file " + (d / name).string());
        return in;
    };
    auto t = open("tuples.idx");
    auto x = open("text.idx");
    return {retrieval::TupleIndex::load(t), retrieval::TextIndex::load(x)};
}

// -------------------------------------------------------------- retrieve

struct RetrieveArgs {
    std::string index, span, choice, config, manifest;
    std::size_t k = 5;
};

int cmd_retrieve(const RetrieveArgs& a) {
    cli::RunManifest manifest("retrieve");
    auto cfg = load_config(a.config);
    manifest.set_config(a.config);
    manifest.add_input("index", a.index);
    if (a.k < 1) throw ValidationError("--k must be at least 1");
    cfg.retrieval.tuple_k = cfg.retrieval.text_k = a.k;

    auto idx = load_indices(a.index);
    auto kb = retrieval::assemble_kb(a.span, a.choice, idx.tuples, idx.text, cfg.retrieval);
    for (std::size_t i = 0; i < kb.size(); ++i) {
        const auto& s = kb.sentences[i];
        json rec{{"span", a.span},
                 {"choice", a.choice},
                 {"origin", std::string(origin_name(s.origin))},
                 {"text", s.text},
                 {"score", kb.scores[i]}};
        std::cout << rec.dump() << '\n';
    }
    manifest.set("records", kb.size());
    if (a.manifest.empty())
        std::cerr << manifest.to_json().dump() << '\n';
    else
        manifest.write(a.manifest);
    return 0;
}

// -------------------------------------------------------- annotate-spans

struct AnnotateArgs {
    std::string questions, out, config;
};

int cmd_annotate(const AnnotateArgs& a) {
    cli::RunManifest manifest("annotate-spans");
    auto cfg = load_config(a.config);
    manifest.set_config(a.config);
    manifest.add_input("questions", a.questions);

    auto loaded = load_questions_file(a.questions);
    for (const auto& e : loaded.errors) std::cerr << a.questions << ": line " << e.line << ": " << e.reason << '\n';
    if (loaded.records.empty() && !loaded.errors.empty())
        throw ValidationError("all " + std::to_string(loaded.errors.size()) + " lines failed validation");

    auto out = open_out(a.out);
    std::size_t with_fact = 0, annotated = 0;
    for (const auto& r : loaded.records) {
        if (!r.fact) continue;
        ++with_fact;
        auto s = span::heuristic_span(r.question, *r.fact, cfg.spans);
        if (!s) continue;
        ++annotated;
        write_span_sidecar(out, SidecarSpan{r.question.id, *r.fact, s->text});
    }
    out.close();

    json stats{{"questions", loaded.records.size()},
               {"with_fact", with_fact},
               {"annotated", annotated},
               {"ineligible", with_fact - annotated},
               {"invalid_lines", loaded.errors.size()}};
    manifest.add_output(a.out);
    manifest.set("stats", stats);
    manifest.write(a.out + ".manifest.json");
    std::cout << "questions: " << loaded.records.size() << ", with fact: " << with_fact
              << ", annotated: " << annotated << ", ineligible: " << with_fact - annotated
              << ", invalid lines: " << loaded.errors.size() << '\n';
    return 0;
}

// ------------------------------------------------------ train / evaluate

struct ExperimentArgs {
    std::string kgd, qa_only, spans, index, vectors, config, dev, test, out = "runs", checkpoint;
    std::size_t seeds = 5;
    std::uint64_t seed = 13;
    std::size_t jobs = 1;
};

struct Split {
    std::vector<train::TextExample> text;
    std::vector<train::TrainingExample> examples;
};

std::vector<QuestionRecord> load_question_split(const std::string& path, const char* role) {
    auto loaded = load_questions_file(path);
    for (const auto& e : loaded.errors) std::cerr << path << ": line " << e.line << ": " << e.reason << '\n';
    if (loaded.records.empty()) throw ValidationError(std::string(role) + " file " + path + " has no valid questions");
    return std::move(loaded.records);
}

void write_vocab(const fs::path& p, const EmbeddingTable& e) {
    auto out = open_out(p);
    for (const auto& t : e.tokens()) out << t << '\n';
}

std::vector<std::string> read_vocab(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IngestError("cannot open " + p.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

template <typename T>
double write_predictions(const model::GapModel& model, ad::ParameterSet<T>& params, const EmbeddingTable& emb,
                         const Split& split, const fs::path& path) {
    auto out = open_out(path);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < split.examples.size(); ++i) {
        const auto& ex = split.examples[i];
        const auto& tx = split.text[i];
        auto ans = model.answer(params, emb, ex.input);
        if (ans.predicted == ex.gold) ++correct;
        json scores = json::array(), probs = json::array();
        for (const auto& c : ans.choices) {
            scores.push_back(c.total);
            json row = json::array();
            for (double l : c.relation_logits) row.push_back(1.0 / (1.0 + std::exp(-l)));
            probs.push_back(row);
        }
        json rec{{"question_id", ex.question_id},
                 {"scores", scores},
                 {"predicted_label", tx.question.choices[ans.predicted].label},
                 {"relation_probs", probs},
                 {"span", tx.span},
                 {"top_evidence", tx.kbs[ans.predicted].sentences.front().text}};
        out << rec.dump() << '\n';
    }
    return split.examples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(split.examples.size());
}

void write_report(const fs::path& dir, const std::string& split_name, const std::vector<std::uint64_t>& seeds,
                  const train::SeedSummary& s) {
    std::ostringstream text;
    text << "split: " << split_name << '\n';
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", 100.0 * s.values[i]);
        text << "seed " << seeds[i] << ": " << buf << '\n';
    }
    text << "accuracy (" << seeds.size() << " seed" << (seeds.size() == 1 ? "" : "s")
         << "): " << train::format_report(s) << '\n';
    open_out(dir / "report.txt") << text.str();
    json j{{"split", split_name}, {"seeds", seeds}, {"accuracies", s.values}, {"mean", s.mean}, {"sigma", s.sigma}};
    open_out(dir / "report.json") << j.dump(2) << '\n';
    std::cout << text.str();
}

template <typename T>
int run_experiment(const ExperimentArgs& a, bool evaluate, const train::RunConfig& cfg,
                   const std::vector<std::uint64_t>& seeds, cli::RunManifest& manifest) {
    const fs::path out(a.out);
    auto idx = load_indices(a.index);
    pipeline::Retrievers r{&idx.tuples, &idx.text, cfg.retrieval};

    pipeline::SpanTable spans;
    if (!a.spans.empty()) spans = pipeline::SpanTable(load_span_sidecar_file(a.spans));

    Split train_split, dev_split, test_split;
    if (!a.kgd.empty()) {
        auto kgd = load_kgd_file(a.kgd);
        for (const auto& e : kgd.errors) std::cerr << a.kgd << ": line " << e.line << ": " << e.reason << '\n';
        train_split.text = pipeline::from_kgd(kgd.examples, r);
    }
    if (!a.qa_only.empty()) {
        pipeline::SpanStats ss;
        auto extra =
            pipeline::from_questions(load_question_split(a.qa_only, "qa-only"), spans, cfg.spans, r, &ss);
        std::cerr << "qa-only spans: " << ss.sidecar << " sidecar, " << ss.heuristic << " heuristic, "
                  << ss.whole_fact << " whole fact\n";
        train_split.text.insert(train_split.text.end(), extra.begin(), extra.end());
    }
    if (!a.dev.empty()) dev_split.text = pipeline::from_questions(load_question_split(a.dev, "dev"), spans, cfg.spans, r);
    if (evaluate)
        test_split.text = pipeline::from_questions(load_question_split(a.test, "test"), spans, cfg.spans, r);

    if (a.checkpoint.empty()) {
        if (train_split.text.empty()) throw ValidationError("no training examples: give --kgd and/or --qa-only");
        if (dev_split.text.empty()) throw ValidationError("--dev is required for training");
    }

    model::ModelConfig mcfg = cfg.model;
    model::GapModel model(mcfg);
    const auto n_rel = mcfg.n_relations;

    // Pre-trained checkpoint: evaluate only.
    if (!a.checkpoint.empty()) {
        auto params = ad::load_checkpoint<T>(a.checkpoint);
        EmbeddingTable emb;
        if (auto* table = params.find("embedding.table")) {
            emb = EmbeddingTable(read_vocab(fs::path(a.checkpoint) / "vocab.txt"), table->value.template cast<float>());
        } else {
            if (a.vectors.empty()) throw ValidationError("--vectors is required: checkpoint has no embedding.table");
            std::unordered_set<std::string> vocab;
            for (const auto& ex : test_split.text) train::collect_vocabulary(ex, vocab);
            emb = EmbeddingTable::load_file(a.vectors, &vocab);
        }
        test_split.examples = pipeline::to_training(test_split.text, emb, n_rel);
        double acc = write_predictions(model, params, emb, test_split, out / "predictions.jsonl");
        manifest.add_input("checkpoint", a.checkpoint);
        manifest.add_output((out / "predictions.jsonl").string());
        write_report(out, "test", {params.seed()}, train::summarize({acc}));
        return 0;
    }

    std::unordered_set<std::string> vocab;
    for (const auto* s : {&train_split, &dev_split, &test_split})
        for (const auto& ex : s->text) train::collect_vocabulary(ex, vocab);
    auto emb = EmbeddingTable::load_file(a.vectors, &vocab);
    std::cerr << "vectors: " << emb.size() << " of " << vocab.size() << " surface forms found\n";
    train_split.examples = pipeline::to_training(train_split.text, emb, n_rel);
    dev_split.examples = pipeline::to_training(dev_split.text, emb, n_rel);
    test_split.examples = pipeline::to_training(test_split.text, emb, n_rel);

    std::mutex out_mu;
    auto run_seed = [&](std::uint64_t seed) {
        fs::path dir = out / ("seed-" + std::to_string(seed));
        fs::create_directories(dir);
        auto log = open_out(dir / "train_log.jsonl");
        train::TrainOptions opts;
        opts.config = cfg.train;
        opts.lambda = mcfg.lambda;
        opts.seed = seed;
        opts.log = &log;
        auto result = train::train<T>(model, model.template init_params<T>(seed, emb), emb, train_split.examples,
                                      dev_split.examples, opts);
        ad::save_checkpoint(dir / "checkpoint", result.best_params,
                            {{"seed", std::to_string(seed)},
                             {"precision", cfg.train.precision},
                             {"best_epoch", std::to_string(result.best_epoch)},
                             {"dev_accuracy", std::to_string(result.best_dev_accuracy)}});
        write_vocab(dir / "checkpoint" / "vocab.txt", emb);
        double value = result.best_dev_accuracy;
        if (evaluate) value = write_predictions(model, result.best_params, emb, test_split, dir / "predictions.jsonl");
        std::lock_guard lock(out_mu);
        std::cerr << "seed " << seed << ": best dev " << result.best_dev_accuracy << " at epoch " << result.best_epoch
                  << (result.early_stopped ? " (early stop)" : "") << '\n';
        return value;
    };
    auto summary = train::evaluate_multiseed(seeds, run_seed, a.jobs);
    for (auto s : seeds) manifest.add_output((out / ("seed-" + std::to_string(s))).string());
    write_report(out, evaluate ? "test" : "dev", seeds, summary);
    return 0;
}

int cmd_experiment(const ExperimentArgs& a, bool evaluate) {
    cli::RunManifest manifest(evaluate ? "evaluate" : "train");
    if (a.seeds < 1) throw ValidationError("--seeds must be at least 1");
    if (a.jobs < 1) throw ValidationError("--jobs must be at least 1");
    if (evaluate && a.test.empty()) throw ValidationError("--test is required for evaluate");
    if (a.checkpoint.empty() && a.vectors.empty()) throw ValidationError("--vectors is required");

    auto cfg = load_config(a.config);
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < a.seeds; ++i) seeds.push_back(a.seed + i);
    cfg.train.seeds = seeds;
    cfg.train.validate();

    manifest.set_config(a.config);
    manifest.set_seeds(seeds);
    for (const auto& [role, path] : std::initializer_list<std::pair<const char*, const std::string*>>{
             {"kgd", &a.kgd}, {"qa_only", &a.qa_only}, {"spans", &a.spans}, {"index", &a.index},
             {"vectors", &a.vectors}, {"dev", &a.dev}, {"test", &a.test}})
        if (!path->empty()) manifest.add_input(role, *path);
    manifest.set("precision", cfg.train.precision);

    int rc = cfg.train.precision == "float64" ? run_experiment<double>(a, evaluate, cfg, seeds, manifest)
                                              : run_experiment<float>(a, evaluate, cfg, seeds, manifest);
    manifest.add_output((fs::path(a.out) / "report.txt").string());
    manifest.write(fs::path(a.out) / "manifest.json");
    return rc;
}

// ------------------------------------------------------------- gradcheck

struct GradcheckArgs {
    std::string config, manifest;
    bool inject = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    cli::RunManifest manifest("gradcheck");
    train::RunConfig base;
    base.model = train::micro_config();
    auto cfg = load_config(a.config, base);
    manifest.set_config(a.config);

    ad::GradCheckOptions opts;
    if (a.inject)
        opts.corrupt_analytic = [](ad::ParameterSet<double>& ps) {
            for (std::size_t i = 0; i < ps.size(); ++i)
                if (ps[i].name == "rel_out.w") ps[i].grad[0] += 1.0;
        };
    auto report = train::model_grad_check(cfg.model, train::MicroSetup{}, opts);
    bool pass = report.max_rel_error <= kGradTolerance;

    std::printf("precision: float64 (forced for gradient checks)\n");
    std::printf("parameters checked: %zu\n", report.checked);
    std::printf("max relative error: %.3e (tolerance %.0e)\n", report.max_rel_error, kGradTolerance);
    std::printf("worst: %s[%zu] analytic %.9g numeric %.9g\n", report.worst_param.c_str(), report.worst_index,
                report.worst_analytic, report.worst_numeric);
    std::printf("%s\n", pass ? "PASS" : "FAIL");
    std::fflush(stdout);
    if (!pass) std::cerr << "gradient check failed at parameter " << report.worst_param << '\n';

    manifest.set("precision", "float64");
    manifest.set("max_rel_error", report.max_rel_error);
    manifest.set("worst_param", report.worst_param);
    manifest.set("pass", pass);
    if (a.manifest.empty())
        std::cerr << manifest.to_json().dump() << '\n';
    else
        manifest.write(a.manifest);
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-gap guided multiple-choice QA: ingestion, retrieval, span annotation, training."};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Parse ConceptNet assertions and a corpus into indices");
    c_ingest->add_option("--conceptnet", ingest.conceptnet, "ConceptNet assertion TSV (optionally gzipped)")->required();
    c_ingest->add_option("--corpus", ingest.corpus, "Corpus text, one sentence per line")->required();
    c_ingest->add_option("--out", ingest.out, "Output directory for indices and stats")->required();
    c_ingest->add_option("--config", ingest.config, "key=value config (sentence filter settings)");

    RetrieveArgs retrieve;
    auto* c_retrieve = app.add_subcommand("retrieve", "Print the evidence set for one span and choice as JSONL");
    c_retrieve->add_option("--index", retrieve.index, "Directory written by ingest")->required();
    c_retrieve->add_option("--span", retrieve.span, "Key span")->required();
    c_retrieve->add_option("--choice", retrieve.choice, "Answer choice")->required();
    c_retrieve->add_option("--k", retrieve.k, "Top-k for tuple and text search")->capture_default_str();
    c_retrieve->add_option("--config", retrieve.config, "key=value config");
    c_retrieve->add_option("--manifest", retrieve.manifest, "Write the run manifest here instead of stderr");

    AnnotateArgs annotate;
    auto* c_annotate = app.add_subcommand("annotate-spans", "Heuristic key spans for question+fact JSONL");
    c_annotate->add_option("--questions", annotate.questions, "Question JSONL with facts")->required();
    c_annotate->add_option("--out", annotate.out, "Span sidecar JSONL to write")->required();
    c_annotate->add_option("--config", annotate.config, "key=value config (min_coverage)");

    ExperimentArgs exp;
    auto add_experiment = [&](const char* name, const char* desc) {
        auto* c = app.add_subcommand(name, desc);
        c->add_option("--kgd", exp.kgd, "KGD JSONL with spans and relations (full supervision)");
        c->add_option("--qa-only", exp.qa_only, "Question JSONL with facts (QA loss only)");
        c->add_option("--spans", exp.spans, "Span sidecar JSONL for question-only data");
        c->add_option("--index", exp.index, "Directory written by ingest")->required();
        c->add_option("--vectors", exp.vectors, "Word vectors, token then floats per line");
        c->add_option("--config", exp.config, "key=value config");
        c->add_option("--dev", exp.dev, "Dev question JSONL used for early stopping");
        c->add_option("--seeds", exp.seeds, "Number of seeds, starting at --seed")->capture_default_str();
        c->add_option("--seed", exp.seed, "Base random seed")->capture_default_str();
        c->add_option("--jobs", exp.jobs, "Seeds trained in parallel")->capture_default_str();
        c->add_option("--out", exp.out, "Output directory")->capture_default_str();
        return c;
    };
    auto* c_train = add_experiment("train", "Train one model per seed; report dev accuracy mean ± σ");
    auto* c_eval = add_experiment("evaluate", "Train per seed and report test accuracy mean ± σ");
    c_eval->add_option("--test", exp.test, "Test question JSONL")->required();
    c_eval->add_option("--checkpoint", exp.checkpoint, "Evaluate this checkpoint instead of training");

    GradcheckArgs grad;
    auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient check of the micro-config model");
    c_grad->add_option("--config", grad.config, "key=value overrides of the micro config");
    c_grad->add_option("--manifest", grad.manifest, "Write the run manifest here instead of stderr");
    c_grad->add_flag("--inject-grad-error", grad.inject)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (c_ingest->parsed()) return cmd_ingest(ingest);
        if (c_retrieve->parsed()) return cmd_retrieve(retrieve);
        if (c_annotate->parsed()) return cmd_annotate(annotate);
        if (c_train->parsed()) return cmd_experiment(exp, false);
        if (c_eval->parsed()) return cmd_experiment(exp, true);
        if (c_grad->parsed()) return cmd_gradcheck(grad);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const IngestError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
