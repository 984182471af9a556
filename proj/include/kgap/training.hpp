#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgap/model.hpp"
#include "kgap/optim.hpp"
#include "kgap/qa_data.hpp"
#include "kgap/retrieval.hpp"
#include "kgap/span.hpp"

namespace kgap::train {

using ad::ParameterSet;
using ad::Tape;
using ad::Var;
using model::GapModel;
using model::ModelConfig;
using model::ModelInput;

// -log softmax(scores)[gold] for a 1 x n score row.
template <typename T>
Var<T> qa_loss(Var<T> scores, std::size_t gold);

// Gold row: BCE against r* averaged over all positions. Every other row:
// BCE against 0 averaged over the positions where r* is set. Zero when r*
// is empty or all false.
template <typename T>
Var<T> relation_loss(Var<T> logits, std::size_t gold, const std::vector<bool>& target);

template <typename T>
Var<T> total_loss(Var<T> scores, Var<T> logits, std::size_t gold, const std::vector<bool>& target, double lambda);

enum class Supervision { full, qa_only };

struct TrainingExample {
    std::string question_id;
    ModelInput input;
    std::size_t gold = 0;
    std::vector<bool> relations;  // n-hot over the relation vocabulary; empty for qa_only
    Supervision supervision = Supervision::full;
};

// Examples before embedding lookup; evidence is retrieved per choice.
struct TextExample {
    Question question;
    std::string fact;
    std::string span;
    std::vector<retrieval::EvidenceSet> kbs;
    std::vector<std::size_t> relations;
    Supervision supervision = Supervision::full;
};

// Surface tokens fed to the encoder; an empty text becomes one unknown token.
std::vector<std::string> model_tokens(std::string_view text);

std::vector<retrieval::EvidenceSet> retrieve_kbs(const Question& q, std::string_view span,
                                                 const retrieval::TupleIndex& tuples,
                                                 const retrieval::TextIndex& text,
                                                 const retrieval::RetrievalConfig& config);

// Every surface token an example shows the model.
void collect_vocabulary(const TextExample& ex, std::unordered_set<std::string>& vocab);

TrainingExample to_training_example(const TextExample& ex, const EmbeddingTable& embeddings,
                                    std::size_t n_relations);

struct TrainConfig {
    double lr = 0.001;
    std::size_t patience = 5;
    std::size_t max_halvings = 3;
    std::size_t max_epochs = 100;
    std::size_t batch_size = 32;
    std::vector<std::uint64_t> seeds{13, 14, 15, 16, 17};
    std::string precision = "float32";

    void validate() const;
};

// Dev-accuracy plateau rule: after `patience` epochs without improvement the
// rate halves; once it has been halved `max_halvings` times since the last
// improvement, the next exhausted patience window stops training.
class PlateauSchedule {
public:
    PlateauSchedule(double lr, std::size_t patience, std::size_t max_halvings)
        : lr_(lr), patience_(patience), max_halvings_(max_halvings) {}

    enum class Action { improved, waited, halved, stop };

    Action observe(double dev_accuracy);
    double lr() const { return lr_; }
    std::size_t halvings() const { return halvings_; }
    std::size_t stale_epochs() const { return stale_; }
    double best() const { return best_; }

private:
    double lr_;
    std::size_t patience_;
    std::size_t max_halvings_;
    double best_ = -1.0;
    std::size_t stale_ = 0;
    std::size_t halvings_ = 0;
};

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double dev_accuracy = 0.0;
};

std::string to_jsonl(const EpochLog& e);

template <typename T>
struct TrainResult {
    ParameterSet<T> best_params;
    ParameterSet<T> final_params;
    double best_dev_accuracy = 0.0;
    std::size_t best_epoch = 0;
    std::vector<EpochLog> log;
    bool early_stopped = false;
};

struct TrainOptions {
    TrainConfig config;
    double lambda = 1.0;
    std::uint64_t seed = 13;
    std::ostream* log = nullptr;  // JSONL, one line per epoch
};

// Seeded shuffle, Adam, per-epoch dev accuracy, plateau halving and early
// stop; keeps the parameters with the best dev accuracy. A non-finite loss
// throws NumericError naming epoch, batch and parameter norms.
template <typename T>
TrainResult<T> train(const GapModel& model, ParameterSet<T> params, const EmbeddingTable& embeddings,
                     const std::vector<TrainingExample>& train_set, const std::vector<TrainingExample>& dev_set,
                     const TrainOptions& options);

template <typename T>
double accuracy(const GapModel& model, ParameterSet<T>& params, const EmbeddingTable& embeddings,
                const std::vector<TrainingExample>& examples);

struct SeedSummary {
    std::vector<double> values;
    double mean = 0.0;
    double sigma = 0.0;  // population standard deviation
};

SeedSummary summarize(std::vector<double> values);

// Runs `run(seed)` for each seed, on up to `jobs` threads, and summarizes
// the results in seed order.
SeedSummary evaluate_multiseed(const std::vector<std::uint64_t>& seeds,
                               const std::function<double(std::uint64_t)>& run, std::size_t jobs = 1);

// "64.41 ± 1.80" from fractions in [0,1].
std::string format_report(const SeedSummary& s);

// Flat key=value settings for model, training, retrieval and spans. '#'
// starts a comment; unknown keys are rejected.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    retrieval::RetrievalConfig retrieval;
    span::HeuristicOptions spans;
};

// Keys override the values in `base`.
RunConfig parse_run_config(std::istream& in, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});

// Encoder h=8, relation dim 8, 8-d vectors, no dropout.
ModelConfig micro_config();

struct MicroSetup {
    std::size_t vocab = 20;
    std::size_t kb_sentences = 2;
    std::uint64_t seed = 7;
};

// Random micro-scale vocabulary and full-supervision example for gradient checks.
struct MicroProblem {
    EmbeddingTable embeddings;
    TrainingExample example;
};
MicroProblem make_micro_problem(const ModelConfig& config, const MicroSetup& setup);

// Total loss gradient check at 64-bit with dropout off.
ad::GradCheckReport model_grad_check(const ModelConfig& config, const MicroSetup& setup,
                                     const ad::GradCheckOptions& options = {});

}  // namespace kgap::train
