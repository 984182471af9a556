#pragma once

#include <string>

#include "kgap/autodiff.hpp"

namespace kgap::ad {

struct DropoutContext {
    bool training = false;
    Rng* rng = nullptr;
};

// Bidirectional LSTM. Each direction owns
//   <prefix>.<dir>.w_ih   input_dim x 4H
//   <prefix>.<dir>.w_hh   H x 4H
//   <prefix>.<dir>.bias   1 x 4H
// with gate blocks ordered input, forget, candidate, output. Output rows are
// [forward_t ; backward_t], width 2H.
//
// Variational dropout: in training mode one mask per sequence and direction
// is drawn for the inputs and one for the recurrent state, and reused at
// every timestep.
class BiLstm {
public:
    BiLstm() = default;
    BiLstm(std::string prefix, std::size_t input_dim, std::size_t hidden_per_direction, double dropout)
        : prefix_(std::move(prefix)), input_dim_(input_dim), hidden_(hidden_per_direction), dropout_(dropout) {}

    // Registers parameters: weights U(-1/sqrt(H), 1/sqrt(H)), forget bias 1.
    template <typename T>
    void init(ParameterSet<T>& params, Rng& rng) const;

    // inputs: m x input_dim, m >= 1. Returns m x 2H.
    template <typename T>
    Var<T> encode(Var<T> inputs, ParameterSet<T>& params, const DropoutContext& ctx) const;

    std::size_t input_dim() const { return input_dim_; }
    std::size_t hidden_per_direction() const { return hidden_; }
    std::size_t output_dim() const { return 2 * hidden_; }
    double dropout() const { return dropout_; }
    const std::string& prefix() const { return prefix_; }

private:
    std::string prefix_;
    std::size_t input_dim_ = 0;
    std::size_t hidden_ = 0;
    double dropout_ = 0.0;

    template <typename T>
    Var<T> run_direction(Var<T> inputs, ParameterSet<T>& params, const std::string& dir, bool reverse,
                         const DropoutContext& ctx) const;
};

}  // namespace kgap::ad
