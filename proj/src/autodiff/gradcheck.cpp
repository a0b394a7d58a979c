#include "kgvqa/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kgvqa/error.hpp"

namespace kgvqa::ad {

namespace {

double eval_loss(const LossClosure& forward) {
    Tape tape;
    const double v = forward(tape).item();
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "gradient_check: loss is not finite");
    return v;
}

}  // namespace

GradCheckResult gradient_check(const LossClosure& forward, ParamStore& params, const GradCheckOptions& options) {
    if (!(options.epsilon > 0.0)) throw Error(ErrorCode::kPrecondition, "gradient_check: epsilon must be positive");

    params.zero_grad();
    {
        Tape tape;
        Var loss = forward(tape);
        if (!std::isfinite(loss.item())) throw Error(ErrorCode::kNonFinite, "gradient_check: loss is not finite");
        tape.backward(loss);
        tape.accumulate_grads(params);
    }

    std::mt19937_64 rng(options.seed);
    GradCheckResult result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = params[p];
        std::vector<std::size_t> coords(t.size());
        std::iota(coords.begin(), coords.end(), 0);
        if (options.samples_per_param > 0 && coords.size() > options.samples_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.samples_per_param);
        }
        for (auto c : coords) {
            const double original = t.values[c];
            t.values[c] = original + options.epsilon;
            const double up = eval_loss(forward);
            t.values[c] = original - options.epsilon;
            const double down = eval_loss(forward);
            t.values[c] = original;

            const double numeric = (up - down) / (2.0 * options.epsilon);
            const double analytic = t.grad[c];
            const double err =
                std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
            ++result.coordinates_checked;
            if (err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_param = params.name(p);
                result.worst_index = c;
            }
        }
    }
    return result;
}

}  // namespace kgvqa::ad
