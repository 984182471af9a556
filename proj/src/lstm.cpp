#include "kgap/lstm.hpp"

#include <cmath>

namespace kgap::ad {

template <typename T>
void BiLstm::init(ParameterSet<T>& params, Rng& rng) const {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (const char* dir : {"fwd", "bwd"}) {
        std::string base = prefix_ + "." + dir;
        params.add(base + ".w_ih", uniform_tensor<T>(input_dim_, 4 * hidden_, bound, rng));
        params.add(base + ".w_hh", uniform_tensor<T>(hidden_, 4 * hidden_, bound, rng));
        Tensor<T> bias(1, 4 * hidden_);
        for (std::size_t j = hidden_; j < 2 * hidden_; ++j) bias[j] = T(1);
        params.add(base + ".bias", std::move(bias));
    }
}

template <typename T>
Var<T> BiLstm::run_direction(Var<T> inputs, ParameterSet<T>& params, const std::string& dir, bool reverse,
                             const DropoutContext& ctx) const {
    auto& tape = *inputs.tape;
    const std::string base = prefix_ + "." + dir;
    auto w_ih = tape.param(params.get(base + ".w_ih"));
    auto w_hh = tape.param(params.get(base + ".w_hh"));
    auto bias = tape.param(params.get(base + ".bias"));
    const std::size_t m = inputs.rows();
    const std::size_t H = hidden_;
    const bool drop = ctx.training && dropout_ > 0.0;

    Var<T> x = inputs;
    if (drop) x = mul(x, tape.constant(dropout_mask<T>(1, input_dim_, dropout_, *ctx.rng)));
    auto projected = add(matmul(x, w_ih), bias);  // m x 4H

    Var<T> h_mask{};
    if (drop) h_mask = tape.constant(dropout_mask<T>(1, H, dropout_, *ctx.rng));

    auto h = tape.constant(Tensor<T>(1, H));
    auto c = tape.constant(Tensor<T>(1, H));
    std::vector<Var<T>> outputs(m);
    for (std::size_t step = 0; step < m; ++step) {
        std::size_t t = reverse ? m - 1 - step : step;
        auto h_in = drop ? mul(h, h_mask) : h;
        auto gates = add(slice_rows(projected, t, t + 1), matmul(h_in, w_hh));
        auto i = sigmoid(slice_cols(gates, 0, H));
        auto f = sigmoid(slice_cols(gates, H, 2 * H));
        auto g = tanh(slice_cols(gates, 2 * H, 3 * H));
        auto o = sigmoid(slice_cols(gates, 3 * H, 4 * H));
        c = add(mul(f, c), mul(i, g));
        h = mul(o, tanh(c));
        outputs[t] = h;
    }
    return concat(outputs, 0);
}

template <typename T>
Var<T> BiLstm::encode(Var<T> inputs, ParameterSet<T>& params, const DropoutContext& ctx) const {
    if (inputs.rows() == 0) throw ContractViolation("BiLSTM input sequence is empty");
    if (inputs.cols() != input_dim_)
        throw DimensionError("BiLSTM expects input width " + std::to_string(input_dim_) + ", got " +
                             inputs.value().shape_string());
    auto fwd = run_direction(inputs, params, "fwd", false, ctx);
    auto bwd = run_direction(inputs, params, "bwd", true, ctx);
    return concat(std::vector<Var<T>>{fwd, bwd}, 1);
}

template void BiLstm::init<float>(ParameterSet<float>&, Rng&) const;
template void BiLstm::init<double>(ParameterSet<double>&, Rng&) const;
template Var<float> BiLstm::encode<float>(Var<float>, ParameterSet<float>&, const DropoutContext&) const;
template Var<double> BiLstm::encode<double>(Var<double>, ParameterSet<double>&, const DropoutContext&) const;

}  // namespace kgap::ad
