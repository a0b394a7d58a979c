#include "kgvqa/autodiff/param_store.hpp"

#include <cmath>

#include "kgvqa/error.hpp"

namespace kgvqa::ad {

std::size_t ParamStore::add_uniform(const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in,
                                    std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in == 0 ? 1 : fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto n = shape_numel(shape);
    std::vector<double> values(n);
    for (auto& v : values) v = dist(rng);
    return add(name, Tensor(std::move(shape), std::move(values), true));
}

std::size_t ParamStore::add(const std::string& name, Tensor tensor) {
    if (by_name_.contains(name)) throw Error(ErrorCode::kInvalidArgument, "param store: duplicate name '" + name + "'");
    tensor.requires_grad = true;
    tensor.zero_grad();
    by_name_.emplace(name, entries_.size());
    entries_.push_back({name, std::move(tensor)});
    return entries_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

std::size_t ParamStore::index(const std::string& name) const {
    auto i = find(name);
    if (!i) throw Error(ErrorCode::kInvalidArgument, "param store: unknown parameter '" + name + "'");
    return *i;
}

std::size_t ParamStore::num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

}  // namespace kgvqa::ad
