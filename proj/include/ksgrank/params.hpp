#pragma once

#include "ksgrank/rng.hpp"
#include "ksgrank/tape.hpp"
#include "ksgrank/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ksgrank::num {

// Named trainable tensors in registration order. Order matters: the
// optimizer walks parameters in this order, which keeps updates
// bit-reproducible run to run.
class ParameterSet {
 public:
  Tensor& create(const std::string& name, std::vector<std::size_t> shape);
  // Glorot-style uniform init over (rows, cols); biases should use create().
  Tensor& create_glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng);

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t total_values() const;

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }

  void save(const std::filesystem::path& path, const std::string& config_echo) const;
  static ParameterSet load(const std::filesystem::path& path, std::string* config_echo = nullptr);

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Tensor> values_;
  std::uint64_t seed_ = 0;
};

// Per-parameter gradients accumulated over a batch.
struct GradMap {
  std::unordered_map<std::string, Tensor> grads;

  void add(const std::string& name, const Tensor& g);
  const Tensor* find(const std::string& name) const;
  void clear() { grads.clear(); }
};

// Binds parameters onto one tape as gradient-tracked leaves, at most once
// per name, so repeated uses share a node and gradients accumulate.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ParameterSet& params) : tape_(&tape), params_(&params) {}

  Var operator[](const std::string& name);

  // after tape.backward(): fold the bound leaves' gradients into `out`
  void collect_grads(GradMap& out) const;

 private:
  Tape* tape_;
  const ParameterSet* params_;
  std::vector<std::pair<std::string, Var>> bound_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Textbook Adam with bias correction. Parameters without a gradient
  // entry are left untouched. Throws on non-finite gradients.
  void step(ParameterSet& params, const GradMap& grads);

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, std::pair<Tensor, Tensor>> moments_;
};

}  // namespace ksgrank::num
