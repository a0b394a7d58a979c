#include "kgvqa/model/encoder.hpp"

#include "kgvqa/error.hpp"

namespace kgvqa::model {

LinearRef add_linear(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias,
                     std::mt19937_64& rng) {
    LinearRef ref;
    ref.weight = store.add_uniform(name + ".weight", {out, in}, in, rng);
    if (bias) ref.bias = store.add_uniform(name + ".bias", {1, out}, in, rng);
    return ref;
}

ad::Var apply(ad::Tape& tape, const ad::ParamStore& store, const LinearRef& ref, ad::Var x) {
    std::optional<ad::Var> b;
    if (ref.bias) b = tape.param(store, *ref.bias);
    return ad::linear(x, tape.param(store, ref.weight), b);
}

LstmRef add_lstm(ad::ParamStore& store, const std::string& prefix, std::size_t input_dim, std::size_t hidden,
                 std::mt19937_64& rng) {
    LstmRef ref;
    ref.hidden = hidden;
    ref.input_weight = store.add_uniform(prefix + ".w_ih", {4 * hidden, input_dim}, hidden, rng);
    ref.hidden_weight = store.add_uniform(prefix + ".w_hh", {4 * hidden, hidden}, hidden, rng);
    ref.bias = store.add_uniform(prefix + ".bias", {1, 4 * hidden}, hidden, rng);
    return ref;
}

ad::Var encode_sequence(ad::Tape& tape, const ad::ParamStore& store, const LstmRef& lstm,
                        const graph::Question& question) {
    const auto n = question.tokens.size();
    if (n == 0) throw Error(ErrorCode::kPrecondition, "encode_question: empty question");
    const auto d = question.embedding_dim;
    if (store[lstm.input_weight].cols() != d) {
        throw Error(ErrorCode::kShapeMismatch, "encode_question: token embeddings of width " + std::to_string(d) +
                                                   " do not match encoder input width " +
                                                   std::to_string(store[lstm.input_weight].cols()));
    }
    const auto H = lstm.hidden;
    ad::Var x = tape.constant(n, d, question.token_embeddings);
    ad::Var w_hh = tape.param(store, lstm.hidden_weight);
    // Input contributions for all time steps in one product.
    ad::Var xin = ad::linear(x, tape.param(store, lstm.input_weight), tape.param(store, lstm.bias));

    ad::Var h = tape.zeros(1, H);
    ad::Var c = tape.zeros(1, H);
    for (std::uint32_t t = 0; t < n; ++t) {
        const std::uint32_t row[] = {t};
        ad::Var z = ad::add(ad::gather_rows(xin, row), ad::matmul_nt(h, w_hh));
        ad::Var i = ad::sigmoid(ad::slice_cols(z, 0, H));
        ad::Var f = ad::sigmoid(ad::slice_cols(z, H, H));
        ad::Var g = ad::tanh(ad::slice_cols(z, 2 * H, H));
        ad::Var o = ad::sigmoid(ad::slice_cols(z, 3 * H, H));
        c = ad::add(ad::mul(f, c), ad::mul(i, g));
        h = ad::mul(o, ad::tanh(c));
    }
    return h;
}

}  // namespace kgvqa::model
