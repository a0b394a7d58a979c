#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgvqa/autodiff/tensor.hpp"

namespace kgvqa::ad {

/// Named trainable parameters in insertion order. Every entry requires grad.
class ParamStore {
   public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    /// Adds a parameter initialized uniformly in [-sqrt(6/fan_in), sqrt(6/fan_in)].
    std::size_t add_uniform(const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in,
                            std::mt19937_64& rng);
    std::size_t add(const std::string& name, Tensor tensor);

    std::optional<std::size_t> find(const std::string& name) const;
    std::size_t index(const std::string& name) const;

    Tensor& operator[](std::size_t i) { return entries_[i].tensor; }
    const Tensor& operator[](std::size_t i) const { return entries_[i].tensor; }
    Tensor& operator[](const std::string& name) { return entries_[index(name)].tensor; }
    const Tensor& operator[](const std::string& name) const { return entries_[index(name)].tensor; }

    const std::string& name(std::size_t i) const { return entries_[i].name; }
    std::size_t size() const { return entries_.size(); }
    std::size_t num_scalars() const;

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    void zero_grad();

   private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

}  // namespace kgvqa::ad
