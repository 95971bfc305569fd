#include "ksgrank/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ksgrank::num {

namespace {
constexpr char kMagic[8] = {'K', 'S', 'G', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  auto n = read_pod<std::uint64_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}
}  // namespace

Tensor& ParameterSet::create(const std::string& name, std::vector<std::size_t> shape) {
  if (has(name)) throw std::invalid_argument("parameter already registered: " + name);
  index_[name] = names_.size();
  names_.push_back(name);
  values_.emplace_back(std::move(shape));
  return values_.back();
}

Tensor& ParameterSet::create_glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor& t = create(name, {rows, cols});
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

Tensor& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return values_[it->second];
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return values_[it->second];
}

std::size_t ParameterSet::total_values() const {
  std::size_t n = 0;
  for (const auto& t : values_) n += t.size();
  return n;
}

void ParameterSet::save(const std::filesystem::path& path, const std::string& config_echo) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, 1);  // format version
  write_pod<std::uint64_t>(os, seed_);
  write_string(os, config_echo);
  write_pod<std::uint64_t>(os, names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i) {
    write_string(os, names_[i]);
    const Tensor& t = values_[i];
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

ParameterSet ParameterSet::load(const std::filesystem::path& path, std::string* config_echo) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const auto version = read_pod<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  ParameterSet ps;
  ps.seed_ = read_pod<std::uint64_t>(is);
  std::string echo = read_string(is);
  if (config_echo) *config_echo = echo;
  const auto count = read_pod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(is);
    const auto rank = read_pod<std::uint32_t>(is);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = read_pod<std::uint64_t>(is);
    Tensor& t = ps.create(name, shape);
    is.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data for " + name);
  }
  return ps;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.names_ != b.names_) return false;
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    if (!a.values_[i].same_shape(b.values_[i])) return false;
    if (a.values_[i].data() != b.values_[i].data()) return false;
  }
  return true;
}

void GradMap::add(const std::string& name, const Tensor& g) {
  auto it = grads.find(name);
  if (it == grads.end()) {
    grads.emplace(name, g);
    return;
  }
  Tensor& acc = it->second;
  if (!acc.same_shape(g)) throw std::invalid_argument("gradient shape mismatch for " + name);
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

const Tensor* GradMap::find(const std::string& name) const {
  auto it = grads.find(name);
  return it == grads.end() ? nullptr : &it->second;
}

Var ParamBinding::operator[](const std::string& name) {
  auto it = lookup_.find(name);
  if (it != lookup_.end()) return bound_[it->second].second;
  Var v = tape_->input(params_->get(name));
  lookup_[name] = bound_.size();
  bound_.emplace_back(name, v);
  return v;
}

void ParamBinding::collect_grads(GradMap& out) const {
  for (const auto& [name, var] : bound_) out.add(name, tape_->grad(var.id));
}

void AdamState::step(ParameterSet& params, const GradMap& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const std::string& name : params.names()) {
    const Tensor* g = grads.find(name);
    if (!g) continue;
    Tensor& p = params.get(name);
    if (!p.same_shape(*g)) throw std::invalid_argument("adam: gradient shape mismatch for " + name);
    for (std::size_t i = 0; i < g->size(); ++i)
      if (!std::isfinite((*g)[i]))
        throw std::runtime_error("adam: non-finite gradient for parameter " + name);
    auto [it, fresh] = moments_.try_emplace(name, Tensor(p.shape()), Tensor(p.shape()));
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * (*g)[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * (*g)[i] * (*g)[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace ksgrank::num
