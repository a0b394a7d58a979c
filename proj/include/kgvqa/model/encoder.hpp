#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "kgvqa/autodiff/param_store.hpp"
#include "kgvqa/autodiff/tape.hpp"
#include "kgvqa/graph/types.hpp"

namespace kgvqa::model {

/// Indices of an affine map x W^T + b inside a ParamStore.
struct LinearRef {
    std::size_t weight = 0;
    std::optional<std::size_t> bias;
};

LinearRef add_linear(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias,
                     std::mt19937_64& rng);
ad::Var apply(ad::Tape& tape, const ad::ParamStore& store, const LinearRef& ref, ad::Var x);

/// Single-layer LSTM; gate blocks are ordered input, forget, cell, output.
struct LstmRef {
    std::size_t input_weight = 0;   // 4H x D
    std::size_t hidden_weight = 0;  // 4H x H
    std::size_t bias = 0;           // 1 x 4H
    std::size_t hidden = 0;
};

LstmRef add_lstm(ad::ParamStore& store, const std::string& prefix, std::size_t input_dim, std::size_t hidden,
                 std::mt19937_64& rng);

/// Final hidden state (1 x H) after reading the question tokens in order.
ad::Var encode_sequence(ad::Tape& tape, const ad::ParamStore& store, const LstmRef& lstm,
                        const graph::Question& question);

}  // namespace kgvqa::model
