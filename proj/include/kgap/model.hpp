#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kgap/embeddings.hpp"
#include "kgap/lstm.hpp"

namespace kgap::model {

using ad::DropoutContext;
using ad::ParameterSet;
using ad::Tape;
using ad::Tensor;
using ad::Var;

struct ModelConfig {
    std::size_t embed_dim = 300;
    std::size_t h_enc = 200;  // BiLSTM output width, h_enc/2 per direction
    std::size_t h_rel = 100;
    std::size_t ff_hidden = 200;
    double ff_dropout = 0.5;
    double var_dropout = 0.2;
    std::size_t n_relations = 17;
    std::size_t n_choices = 4;
    double lambda = 1.0;
    bool freeze_embeddings = true;

    // Throws ValidationError on zero sizes, odd h_enc or dropout outside [0,1).
    void validate() const;
};

// Two-layer scorer: relu(x W1 + b1) -> dropout -> W2 + b2.
class FeedForward {
public:
    FeedForward() = default;
    FeedForward(std::string prefix, std::size_t in, std::size_t hidden, std::size_t out, double dropout)
        : prefix_(std::move(prefix)), in_(in), hidden_(hidden), out_(out), dropout_(dropout) {}

    template <typename T>
    void init(ParameterSet<T>& params, ad::Rng& rng) const;
    template <typename T>
    Var<T> apply(Var<T> x, ParameterSet<T>& params, const DropoutContext& ctx) const;

    const std::string& prefix() const { return prefix_; }

private:
    std::string prefix_;
    std::size_t in_ = 0, hidden_ = 0, out_ = 0;
    double dropout_ = 0.0;
};

// Eq. 1: softmax over B positions of the column-wise max of A B^T, then
// the weighted sum of B rows. A: a x h, B: b x h, result 1 x h.
template <typename T>
Var<T> weighted_rep(Var<T> a_enc, Var<T> b_enc);

// [x - y ; x * y]
template <typename T>
Var<T> compose(Var<T> x, Var<T> y);

template <typename T>
Var<T> fact_relevance_score(Var<T> q_enc, Var<T> c_enc, Var<T> f_enc, const FeedForward& ff, ParameterSet<T>& params,
                            const DropoutContext& ctx);

// Mean over KB sentences of FF(compose(weighted_rep(span, k_j), weighted_rep(choice, k_j))).
template <typename T>
Var<T> relation_rep(Var<T> span_enc, Var<T> choice_enc, const std::vector<Var<T>>& kb_encs, const FeedForward& ff,
                    ParameterSet<T>& params, const DropoutContext& ctx);

// Affine map R -> logits with parameters <prefix>.w, <prefix>.b.
template <typename T>
Var<T> relation_logits(Var<T> r, ParameterSet<T>& params, const std::string& prefix);

template <typename T>
Var<T> relation_score(Var<T> q_enc, Var<T> f_enc, Var<T> r, const FeedForward& ff, ParameterSet<T>& params,
                      const DropoutContext& ctx);

// Token ids into the embedding table (-1 = out of vocabulary) for every
// text the model reads. kb[i] holds the evidence sentences for choice i.
struct ModelInput {
    std::vector<int> stem;
    std::vector<int> fact;
    std::vector<int> span;
    std::vector<std::vector<int>> choices;
    std::vector<std::vector<std::vector<int>>> kb;
};

template <typename T>
struct ForwardResult {
    Var<T> scores;           // 1 x n_choices, score_f + score_r
    Var<T> relation_logits;  // n_choices x n_relations
    std::vector<Var<T>> score_f;
    std::vector<Var<T>> score_r;
};

struct ChoiceScoreBundle {
    double score_f = 0.0;
    double score_r = 0.0;
    std::vector<double> relation_logits;
    double total = 0.0;
};

struct AnswerResult {
    std::vector<ChoiceScoreBundle> choices;
    std::size_t predicted = 0;  // first maximal total
};

std::size_t argmax_first(const std::vector<double>& values);

class GapModel {
public:
    explicit GapModel(ModelConfig config);

    const ModelConfig& config() const { return config_; }

    // Fresh parameters from `seed`. With unfrozen embeddings the table is
    // copied in as "embedding.table".
    template <typename T>
    ParameterSet<T> init_params(std::uint64_t seed, const EmbeddingTable& embeddings) const;

    template <typename T>
    ForwardResult<T> forward(Tape<T>& tape, ParameterSet<T>& params, const EmbeddingTable& embeddings,
                             const ModelInput& input, const DropoutContext& ctx) const;

    // Eval-mode forward pass.
    template <typename T>
    AnswerResult answer(ParameterSet<T>& params, const EmbeddingTable& embeddings, const ModelInput& input) const;

private:
    ModelConfig config_;
    ad::BiLstm encoder_;
    FeedForward ff_fact_;
    FeedForward ff_rel_;
    FeedForward ff_score_r_;

    template <typename T>
    Var<T> embed(Tape<T>& tape, ParameterSet<T>& params, const EmbeddingTable& embeddings,
                 const std::vector<int>& ids) const;
};

}  // namespace kgap::model
