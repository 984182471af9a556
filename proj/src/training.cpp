#include "kgap/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace kgap::train {

using namespace kgap::ad;

template <typename T>
Var<T> qa_loss(Var<T> scores, std::size_t gold) {
    if (scores.rows() != 1 || gold >= scores.cols())
        throw ContractViolation("qa_loss: gold index " + std::to_string(gold) + " outside scores " +
                                scores.value().shape_string());
    return scale(pick(log_softmax(scores, 1), 0, gold), T(-1));
}

template <typename T>
Var<T> relation_loss(Var<T> logits, std::size_t gold, const std::vector<bool>& target) {
    auto& tape = *logits.tape;
    if (std::none_of(target.begin(), target.end(), [](bool b) { return b; })) return tape.constant(Tensor<T>::scalar(0));
    if (target.size() != logits.cols() || gold >= logits.rows())
        throw ContractViolation("relation_loss: target/gold do not fit logits " + logits.value().shape_string());

    std::vector<T> gold_targets(target.begin(), target.end());
    std::vector<bool> all(target.size(), true);
    auto loss = bce_with_logits(slice_rows(logits, gold, gold + 1), gold_targets, all);
    std::vector<T> zeros(target.size(), T(0));
    for (std::size_t j = 0; j < logits.rows(); ++j) {
        if (j == gold) continue;
        loss = add(loss, bce_with_logits(slice_rows(logits, j, j + 1), zeros, target));
    }
    return loss;
}

template <typename T>
Var<T> total_loss(Var<T> scores, Var<T> logits, std::size_t gold, const std::vector<bool>& target, double lambda) {
    return add(qa_loss(scores, gold), scale(relation_loss(logits, gold, target), static_cast<T>(lambda)));
}

std::vector<std::string> model_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : text::tokenize(text)) out.push_back(std::move(t.text));
    if (out.empty()) out.emplace_back();
    return out;
}

std::vector<retrieval::EvidenceSet> retrieve_kbs(const Question& q, std::string_view span,
                                                 const retrieval::TupleIndex& tuples,
                                                 const retrieval::TextIndex& text,
                                                 const retrieval::RetrievalConfig& config) {
    std::vector<retrieval::EvidenceSet> kbs;
    for (const auto& c : q.choices) kbs.push_back(retrieval::assemble_kb(span, c.text, tuples, text, config));
    return kbs;
}

void collect_vocabulary(const TextExample& ex, std::unordered_set<std::string>& vocab) {
    auto add = [&](std::string_view s) {
        for (auto& t : model_tokens(s)) {
            vocab.insert(text::to_lower(t));
            vocab.insert(std::move(t));
        }
    };
    add(ex.question.stem);
    add(ex.fact);
    add(ex.span);
    for (const auto& c : ex.question.choices) add(c.text);
    for (const auto& kb : ex.kbs)
        for (const auto& s : kb.sentences) add(s.text);
}

TrainingExample to_training_example(const TextExample& ex, const EmbeddingTable& embeddings,
                                    std::size_t n_relations) {
    auto ids = [&](std::string_view s) { return embeddings.ids_of(model_tokens(s)); };
    TrainingExample out;
    out.question_id = ex.question.id;
    out.gold = ex.question.gold_index();
    out.input.stem = ids(ex.question.stem);
    out.input.fact = ids(ex.fact);
    out.input.span = ids(ex.span);
    for (const auto& c : ex.question.choices) out.input.choices.push_back(ids(c.text));
    if (ex.kbs.size() != ex.question.choices.size()) throw ContractViolation("one evidence set per choice required");
    for (const auto& kb : ex.kbs) {
        if (kb.empty()) throw ContractViolation("empty evidence set for question " + ex.question.id);
        std::vector<std::vector<int>> sentences;
        for (const auto& s : kb.sentences) sentences.push_back(ids(s.text));
        out.input.kb.push_back(std::move(sentences));
    }
    out.supervision = ex.relations.empty() ? Supervision::qa_only : ex.supervision;
    if (out.supervision == Supervision::full) {
        out.relations.assign(n_relations, false);
        for (auto r : ex.relations) {
            if (r >= n_relations) throw ContractViolation("relation index out of range");
            out.relations[r] = true;
        }
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ValidationError("lr must be positive");
    if (patience < 1) throw ValidationError("patience must be at least 1");
    if (max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
    if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    auto sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ValidationError("seeds must be distinct");
    if (precision != "float32" && precision != "float64")
        throw ValidationError("precision must be float32 or float64, got '" + precision + "'");
}

PlateauSchedule::Action PlateauSchedule::observe(double dev_accuracy) {
    if (dev_accuracy > best_) {
        best_ = dev_accuracy;
        stale_ = 0;
        halvings_ = 0;
        return Action::improved;
    }
    if (++stale_ < patience_) return Action::waited;
    if (halvings_ >= max_halvings_) return Action::stop;
    lr_ /= 2.0;
    ++halvings_;
    stale_ = 0;
    return Action::halved;
}

std::string to_jsonl(const EpochLog& e) {
    nlohmann::json j{{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss}, {"dev_accuracy", e.dev_accuracy}};
    return j.dump();
}

namespace {

template <typename T>
std::string parameter_norms(const ParameterSet<T>& params) {
    std::ostringstream os;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double sq = 0;
        for (auto v : params[i].value.data()) sq += static_cast<double>(v) * v;
        os << (i ? ", " : "") << params[i].name << "=" << std::sqrt(sq);
    }
    return os.str();
}

}  // namespace

template <typename T>
double accuracy(const GapModel& model, ParameterSet<T>& params, const EmbeddingTable& embeddings,
                const std::vector<TrainingExample>& examples) {
    if (examples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& ex : examples)
        if (model.answer(params, embeddings, ex.input).predicted == ex.gold) ++correct;
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

template <typename T>
TrainResult<T> train(const GapModel& model, ParameterSet<T> params, const EmbeddingTable& embeddings,
                     const std::vector<TrainingExample>& train_set, const std::vector<TrainingExample>& dev_set,
                     const TrainOptions& options) {
    const auto& cfg = options.config;
    cfg.validate();
    if (train_set.empty()) throw ContractViolation("training set is empty");
    if (dev_set.empty()) throw ContractViolation("dev set is empty");

    Rng shuffle_rng(options.seed);
    Rng dropout_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    DropoutContext ctx{true, &dropout_rng};
    Adam<T> adam(params, AdamConfig{cfg.lr});
    PlateauSchedule schedule(cfg.lr, cfg.patience, cfg.max_halvings);

    TrainResult<T> result;
    result.best_params = params;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        adam.set_lr(schedule.lr());
        double loss_sum = 0.0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            ++batch_no;
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const T inv = T(1) / static_cast<T>(end - start);
            params.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                const auto& ex = train_set[order[b]];
                Tape<T> tape;
                auto fwd = model.forward(tape, params, embeddings, ex.input, ctx);
                auto loss = total_loss(fwd.scores, fwd.relation_logits, ex.gold, ex.relations, options.lambda);
                double value = loss.value().item();
                if (!std::isfinite(value))
                    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(batch_no) + " (question " + ex.question_id +
                                       "); parameter norms: " + parameter_norms(params));
                loss_sum += value;
                tape.backward(scale(loss, inv));
            }
            adam.step(params);
            if (!params.all_finite())
                throw NumericError("non-finite parameters after epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_no) + "; parameter norms: " + parameter_norms(params));
        }

        EpochLog entry{epoch, schedule.lr(), loss_sum / static_cast<double>(train_set.size()),
                       accuracy(model, params, embeddings, dev_set)};
        result.log.push_back(entry);
        if (options.log != nullptr) *options.log << to_jsonl(entry) << '\n';

        auto action = schedule.observe(entry.dev_accuracy);
        if (action == PlateauSchedule::Action::improved) {
            result.best_params = params;
            result.best_dev_accuracy = entry.dev_accuracy;
            result.best_epoch = epoch;
        } else if (action == PlateauSchedule::Action::stop) {
            result.early_stopped = true;
            break;
        }
    }
    result.final_params = std::move(params);
    return result;
}

SeedSummary summarize(std::vector<double> values) {
    SeedSummary s;
    s.values = std::move(values);
    if (s.values.empty()) throw ContractViolation("no per-seed results to summarize");
    const double n = static_cast<double>(s.values.size());
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    double sq = 0.0;
    for (double v : s.values) sq += (v - s.mean) * (v - s.mean);
    s.sigma = std::sqrt(sq / n);
    return s;
}

SeedSummary evaluate_multiseed(const std::vector<std::uint64_t>& seeds,
                               const std::function<double(std::uint64_t)>& run, std::size_t jobs) {
    if (seeds.empty()) throw ContractViolation("evaluate_multiseed needs at least one seed");
    std::vector<double> results(seeds.size());
    jobs = std::clamp<std::size_t>(jobs, 1, seeds.size());
    if (jobs == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) results[i] = run(seeds[i]);
        return summarize(std::move(results));
    }

    std::vector<std::exception_ptr> errors(seeds.size());
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t i = w; i < seeds.size(); i += jobs) {
                try {
                    results[i] = run(seeds[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return summarize(std::move(results));
}

std::string format_report(const SeedSummary& s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f", 100.0 * s.mean, 100.0 * s.sigma);
    return buf;
}

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
    N out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ValidationError("config key '" + key + "': cannot parse '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace

RunConfig parse_run_config(std::istream& in, RunConfig base) {
    RunConfig rc = std::move(base);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string v = trim(line.substr(eq + 1));
        auto size = [&] { return parse_number<std::size_t>(key, v); };
        auto real = [&] { return parse_number<double>(key, v); };

        if (key == "embed_dim") rc.model.embed_dim = size();
        else if (key == "h_enc") rc.model.h_enc = size();
        else if (key == "h_rel") rc.model.h_rel = size();
        else if (key == "ff_hidden") rc.model.ff_hidden = size();
        else if (key == "ff_dropout") rc.model.ff_dropout = real();
        else if (key == "var_dropout") rc.model.var_dropout = real();
        else if (key == "lambda") rc.model.lambda = real();
        else if (key == "freeze_embeddings") rc.model.freeze_embeddings = parse_bool(key, v);
        else if (key == "lr") rc.train.lr = real();
        else if (key == "patience") rc.train.patience = size();
        else if (key == "max_halvings") rc.train.max_halvings = size();
        else if (key == "max_epochs") rc.train.max_epochs = size();
        else if (key == "batch_size") rc.train.batch_size = size();
        else if (key == "precision") rc.train.precision = v;
        else if (key == "tuple_k") rc.retrieval.tuple_k = size();
        else if (key == "text_k") rc.retrieval.text_k = size();
        else if (key == "excluded_relations") rc.retrieval.excluded_relations = split_list(v);
        else if (key == "max_sentence_length") rc.retrieval.clean.max_length = size();
        else if (key == "negations") rc.retrieval.clean.negations = split_list(v);
        else if (key == "bm25_k1") rc.retrieval.bm25.k1 = real();
        else if (key == "bm25_b") rc.retrieval.bm25.b = real();
        else if (key == "min_coverage") rc.spans.min_coverage = real();
        else throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    rc.model.validate();
    rc.train.validate();
    if (rc.retrieval.tuple_k < 1 || rc.retrieval.text_k < 1) throw ValidationError("tuple_k and text_k must be >= 1");
    return rc;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open config " + path);
    return parse_run_config(in, std::move(base));
}

ModelConfig micro_config() {
    ModelConfig c;
    c.embed_dim = 8;
    c.h_enc = 8;
    c.h_rel = 8;
    c.ff_hidden = 8;
    c.ff_dropout = 0.0;
    c.var_dropout = 0.0;
    c.freeze_embeddings = false;
    return c;
}

MicroProblem make_micro_problem(const ModelConfig& config, const MicroSetup& setup) {
    Rng rng(setup.seed);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < setup.vocab; ++i) words.push_back("w" + std::to_string(i));
    auto table = uniform_tensor<float>(setup.vocab, config.embed_dim, 1.0, rng);
    MicroProblem p{EmbeddingTable(words, std::move(table)), {}};

    std::uniform_int_distribution<int> word(0, static_cast<int>(setup.vocab) - 1);
    std::uniform_int_distribution<int> len(2, 5);
    auto seq = [&] {
        std::vector<int> s(static_cast<std::size_t>(len(rng)));
        for (auto& id : s) id = word(rng);
        return s;
    };
    auto& in = p.example.input;
    in.stem = seq();
    in.fact = seq();
    in.span = seq();
    for (std::size_t c = 0; c < config.n_choices; ++c) {
        in.choices.push_back(seq());
        std::vector<std::vector<int>> kb;
        for (std::size_t k = 0; k < setup.kb_sentences; ++k) kb.push_back(seq());
        in.kb.push_back(std::move(kb));
    }
    p.example.question_id = "micro";
    p.example.gold = 1;
    p.example.relations.assign(config.n_relations, false);
    p.example.relations[2] = true;
    p.example.relations[5] = true;
    return p;
}

GradCheckReport model_grad_check(const ModelConfig& config, const MicroSetup& setup,
                                 const GradCheckOptions& options) {
    ModelConfig c = config;
    c.ff_dropout = 0.0;
    c.var_dropout = 0.0;
    GapModel model(c);
    auto problem = make_micro_problem(c, setup);
    auto params = model.init_params<double>(setup.seed, problem.embeddings);
    LossFn loss = [&](Tape<double>& tape, ParameterSet<double>& ps) {
        auto fwd = model.forward(tape, ps, problem.embeddings, problem.example.input, DropoutContext{});
        return total_loss(fwd.scores, fwd.relation_logits, problem.example.gold, problem.example.relations, c.lambda);
    };
    return grad_check(loss, params, options);
}

#define KGAP_TRAIN_INSTANTIATE(T)                                                                                   \
    template Var<T> qa_loss<T>(Var<T>, std::size_t);                                                               \
    template Var<T> relation_loss<T>(Var<T>, std::size_t, const std::vector<bool>&);                               \
    template Var<T> total_loss<T>(Var<T>, Var<T>, std::size_t, const std::vector<bool>&, double);                  \
    template double accuracy<T>(const GapModel&, ParameterSet<T>&, const EmbeddingTable&,                          \
                                const std::vector<TrainingExample>&);                                              \
    template TrainResult<T> train<T>(const GapModel&, ParameterSet<T>, const EmbeddingTable&,                      \
                                     const std::vector<TrainingExample>&, const std::vector<TrainingExample>&,     \
                                     const TrainOptions&);

KGAP_TRAIN_INSTANTIATE(float)
KGAP_TRAIN_INSTANTIATE(double)

}  // namespace kgap::train
