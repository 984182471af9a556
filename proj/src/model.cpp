#include "kgap/model.hpp"

#include <cmath>

namespace kgap::model {

using namespace kgap::ad;

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ValidationError(std::string(name) + " must be positive");
    };
    positive(embed_dim, "embed_dim");
    positive(h_enc, "h_enc");
    positive(h_rel, "h_rel");
    positive(ff_hidden, "ff_hidden");
    positive(n_relations, "n_relations");
    positive(n_choices, "n_choices");
    if (h_enc % 2 != 0) throw ValidationError("h_enc must be even (two LSTM directions)");
    if (ff_dropout < 0.0 || ff_dropout >= 1.0) throw ValidationError("ff_dropout must lie in [0, 1)");
    if (var_dropout < 0.0 || var_dropout >= 1.0) throw ValidationError("var_dropout must lie in [0, 1)");
    if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
}

namespace {

double glorot(std::size_t in, std::size_t out) { return std::sqrt(6.0 / static_cast<double>(in + out)); }

}  // namespace

template <typename T>
void FeedForward::init(ParameterSet<T>& params, Rng& rng) const {
    params.add(prefix_ + ".w1", uniform_tensor<T>(in_, hidden_, glorot(in_, hidden_), rng));
    params.add(prefix_ + ".b1", Tensor<T>(1, hidden_));
    params.add(prefix_ + ".w2", uniform_tensor<T>(hidden_, out_, glorot(hidden_, out_), rng));
    params.add(prefix_ + ".b2", Tensor<T>(1, out_));
}

template <typename T>
Var<T> FeedForward::apply(Var<T> x, ParameterSet<T>& params, const DropoutContext& ctx) const {
    auto& tape = *x.tape;
    auto h = relu(add(matmul(x, tape.param(params.get(prefix_ + ".w1"))), tape.param(params.get(prefix_ + ".b1"))));
    if (ctx.training && dropout_ > 0.0) h = dropout(h, dropout_, true, *ctx.rng);
    return add(matmul(h, tape.param(params.get(prefix_ + ".w2"))), tape.param(params.get(prefix_ + ".b2")));
}

template <typename T>
Var<T> weighted_rep(Var<T> a_enc, Var<T> b_enc) {
    if (a_enc.rows() == 0 || b_enc.rows() == 0) throw ContractViolation("weighted_rep needs nonempty sequences");
    auto att = matmul(a_enc, transpose(b_enc));   // a x b
    auto normatt = softmax(max_reduce(att, 0), 1);  // 1 x b
    return matmul(normatt, b_enc);
}

template <typename T>
Var<T> compose(Var<T> x, Var<T> y) {
    return concat(std::vector<Var<T>>{sub(x, y), mul(x, y)}, 1);
}

template <typename T>
Var<T> fact_relevance_score(Var<T> q_enc, Var<T> c_enc, Var<T> f_enc, const FeedForward& ff, ParameterSet<T>& params,
                            const DropoutContext& ctx) {
    auto w_q = weighted_rep(q_enc, f_enc);
    auto w_c = weighted_rep(c_enc, f_enc);
    auto w_qc = scale(add(w_q, w_c), T(0.5));
    return ff.apply(compose(w_qc, mean_reduce(f_enc, 0)), params, ctx);
}

template <typename T>
Var<T> relation_rep(Var<T> span_enc, Var<T> choice_enc, const std::vector<Var<T>>& kb_encs, const FeedForward& ff,
                    ParameterSet<T>& params, const DropoutContext& ctx) {
    if (kb_encs.empty()) throw ContractViolation("relation_rep needs at least one KB sentence");
    std::vector<Var<T>> reps;
    reps.reserve(kb_encs.size());
    for (const auto& k : kb_encs)
        reps.push_back(ff.apply(compose(weighted_rep(span_enc, k), weighted_rep(choice_enc, k)), params, ctx));
    if (reps.size() == 1) return reps.front();
    return mean_reduce(concat(reps, 0), 0);
}

template <typename T>
Var<T> relation_logits(Var<T> r, ParameterSet<T>& params, const std::string& prefix) {
    auto& tape = *r.tape;
    return add(matmul(r, tape.param(params.get(prefix + ".w"))), tape.param(params.get(prefix + ".b")));
}

template <typename T>
Var<T> relation_score(Var<T> q_enc, Var<T> f_enc, Var<T> r, const FeedForward& ff, ParameterSet<T>& params,
                      const DropoutContext& ctx) {
    auto d = compose(max_reduce(q_enc, 0), max_reduce(f_enc, 0));
    return ff.apply(concat(std::vector<Var<T>>{d, r}, 1), params, ctx);
}

std::size_t argmax_first(const std::vector<double>& values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

GapModel::GapModel(ModelConfig config) : config_(config) {
    config_.validate();
    const auto& c = config_;
    encoder_ = BiLstm("encoder", c.embed_dim, c.h_enc / 2, c.var_dropout);
    ff_fact_ = FeedForward("ff_fact", 2 * c.h_enc, c.ff_hidden, 1, c.ff_dropout);
    ff_rel_ = FeedForward("ff_rel", 2 * c.h_enc, c.ff_hidden, c.h_rel, c.ff_dropout);
    ff_score_r_ = FeedForward("ff_score_r", 2 * c.h_enc + c.h_rel, c.ff_hidden, 1, c.ff_dropout);
}

template <typename T>
ParameterSet<T> GapModel::init_params(std::uint64_t seed, const EmbeddingTable& embeddings) const {
    if (embeddings.dim() != config_.embed_dim && embeddings.size() > 0)
        throw ValidationError("word vectors have dimension " + std::to_string(embeddings.dim()) + ", model expects " +
                              std::to_string(config_.embed_dim));
    ParameterSet<T> params(seed);
    Rng rng(seed);
    encoder_.init(params, rng);
    ff_fact_.init(params, rng);
    ff_rel_.init(params, rng);
    params.add("rel_out.w", uniform_tensor<T>(config_.h_rel, config_.n_relations,
                                              glorot(config_.h_rel, config_.n_relations), rng));
    params.add("rel_out.b", Tensor<T>(1, config_.n_relations));
    ff_score_r_.init(params, rng);
    if (!config_.freeze_embeddings) params.add("embedding.table", embeddings.matrix().template cast<T>());
    return params;
}

template <typename T>
Var<T> GapModel::embed(Tape<T>& tape, ParameterSet<T>& params, const EmbeddingTable& embeddings,
                       const std::vector<int>& ids) const {
    if (config_.freeze_embeddings) {
        if (embeddings.size() == 0) return tape.constant(Tensor<T>(ids.size(), config_.embed_dim));
        return tape.constant(embeddings.rows<T>(ids));
    }
    return embedding_lookup(tape.param(params.get("embedding.table")), ids);
}

template <typename T>
ForwardResult<T> GapModel::forward(Tape<T>& tape, ParameterSet<T>& params, const EmbeddingTable& embeddings,
                                   const ModelInput& input, const DropoutContext& ctx) const {
    const std::size_t n = config_.n_choices;
    if (input.choices.size() != n || input.kb.size() != n)
        throw ContractViolation("model input needs " + std::to_string(n) + " choices and KBs");
    if (ctx.training && ctx.rng == nullptr) throw ContractViolation("training forward pass needs an rng");

    auto encode = [&](const std::vector<int>& ids) {
        return encoder_.encode(embed(tape, params, embeddings, ids), params, ctx);
    };
    auto q_enc = encode(input.stem);
    auto f_enc = encode(input.fact);
    auto s_enc = encode(input.span);

    ForwardResult<T> out;
    std::vector<Var<T>> totals;
    std::vector<Var<T>> logits;
    for (std::size_t i = 0; i < n; ++i) {
        auto c_enc = encode(input.choices[i]);
        std::vector<Var<T>> kb_encs;
        for (const auto& k : input.kb[i]) kb_encs.push_back(encode(k));

        auto sf = fact_relevance_score(q_enc, c_enc, f_enc, ff_fact_, params, ctx);
        auto r = relation_rep(s_enc, c_enc, kb_encs, ff_rel_, params, ctx);
        logits.push_back(relation_logits(r, params, std::string("rel_out")));
        auto sr = relation_score(q_enc, f_enc, r, ff_score_r_, params, ctx);
        out.score_f.push_back(sf);
        out.score_r.push_back(sr);
        totals.push_back(add(sf, sr));
    }
    out.scores = concat(totals, 1);
    out.relation_logits = concat(logits, 0);
    return out;
}

template <typename T>
AnswerResult GapModel::answer(ParameterSet<T>& params, const EmbeddingTable& embeddings,
                              const ModelInput& input) const {
    Tape<T> tape;
    auto fwd = forward(tape, params, embeddings, input, DropoutContext{});
    AnswerResult res;
    std::vector<double> totals;
    const auto& logits = fwd.relation_logits.value();
    for (std::size_t i = 0; i < config_.n_choices; ++i) {
        ChoiceScoreBundle b;
        b.score_f = fwd.score_f[i].value().item();
        b.score_r = fwd.score_r[i].value().item();
        b.total = fwd.scores.value()[i];
        for (std::size_t k = 0; k < logits.cols(); ++k) b.relation_logits.push_back(logits(i, k));
        totals.push_back(b.total);
        res.choices.push_back(std::move(b));
    }
    res.predicted = argmax_first(totals);
    return res;
}

#define KGAP_MODEL_INSTANTIATE(T)                                                                                    \
    template void FeedForward::init<T>(ParameterSet<T>&, Rng&) const;                                               \
    template Var<T> FeedForward::apply<T>(Var<T>, ParameterSet<T>&, const DropoutContext&) const;                   \
    template Var<T> weighted_rep<T>(Var<T>, Var<T>);                                                                \
    template Var<T> compose<T>(Var<T>, Var<T>);                                                                     \
    template Var<T> fact_relevance_score<T>(Var<T>, Var<T>, Var<T>, const FeedForward&, ParameterSet<T>&,           \
                                            const DropoutContext&);                                                 \
    template Var<T> relation_rep<T>(Var<T>, Var<T>, const std::vector<Var<T>>&, const FeedForward&,                 \
                                    ParameterSet<T>&, const DropoutContext&);                                       \
    template Var<T> relation_logits<T>(Var<T>, ParameterSet<T>&, const std::string&);                               \
    template Var<T> relation_score<T>(Var<T>, Var<T>, Var<T>, const FeedForward&, ParameterSet<T>&,                 \
                                      const DropoutContext&);                                                       \
    template ParameterSet<T> GapModel::init_params<T>(std::uint64_t, const EmbeddingTable&) const;                  \
    template ForwardResult<T> GapModel::forward<T>(Tape<T>&, ParameterSet<T>&, const EmbeddingTable&,               \
                                                   const ModelInput&, const DropoutContext&) const;                 \
    template AnswerResult GapModel::answer<T>(ParameterSet<T>&, const EmbeddingTable&, const ModelInput&) const;

KGAP_MODEL_INSTANTIATE(float)
KGAP_MODEL_INSTANTIATE(double)

}  // namespace kgap::model
