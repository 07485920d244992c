#pragma once

// Named parameter store with deterministic initialization. Parameter names
// are the checkpoint keys, so creation order must not matter: everything is
// kept in a sorted map and initialized from a per-name seed.

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "spotlight/numerics/gradcheck.hpp"
#include "spotlight/numerics/tensor.hpp"

namespace spotlight::model {

enum class Init { Normal, Zero, One };

template <typename S>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  // Creates (or returns, if the shape matches) a trainable tensor. Normal
  // init draws N(0, 1/fan_in) from a stream keyed by (store seed, name) so
  // the same architecture always initializes identically. Fan-in scaling
  // keeps activation magnitudes comparable across widths; a fixed small
  // std would shrink the attention value/output path quadratically and
  // starve downstream consumers of input signal at small d_model.
  num::Tensor<S>& add(const std::string& name, std::vector<int> shape, Init init) {
    auto it = params_.find(name);
    if (it != params_.end()) {
      if (it->second.shape != shape) {
        throw num::ShapeError("parameter '" + name + "' redefined with shape " +
                              num::shape_str(shape) + ", was " +
                              num::shape_str(it->second.shape));
      }
      return it->second;
    }
    num::Tensor<S> t = num::Tensor<S>::zeros(shape, /*requires_grad=*/true);
    if (init == Init::Normal) {
      std::mt19937_64 rng(seed_ ^ name_hash(name));
      const double fan_in = static_cast<double>(shape.front());
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(fan_in));
      for (auto& v : *t.data) v = static_cast<S>(dist(rng));
    } else if (init == Init::One) {
      std::fill(t.data->begin(), t.data->end(), S(1));
    }
    return params_.emplace(name, std::move(t)).first->second;
  }

  num::Tensor<S>& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) {
      throw num::ShapeError("parameter '" + name + "' does not exist");
    }
    return it->second;
  }
  const num::Tensor<S>& get(const std::string& name) const {
    return const_cast<ParamStore*>(this)->get(name);
  }
  bool has(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }

  // Name-sorted view (std::map iteration order) for optimizers/checkpoints.
  std::vector<num::NamedParam<S>> named() const {
    std::vector<num::NamedParam<S>> out;
    out.reserve(params_.size());
    for (const auto& [name, tensor] : params_) out.push_back({name, tensor});
    return out;
  }

  void zero_grads() {
    for (auto& [name, tensor] : params_) tensor.zero_grad();
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t name_hash(const std::string& name) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    for (unsigned char c : name) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  std::uint64_t seed_;
  std::map<std::string, num::Tensor<S>> params_;
};

}  // namespace spotlight::model
