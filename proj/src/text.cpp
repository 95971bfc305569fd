#include "ksgrank/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ksgrank {

QuestionGraph build_question_graph(const QuestionRecord& rec) {
  if (rec.tokens.empty()) throw std::invalid_argument("build_question_graph: no tokens");
  QuestionGraph qg;
  qg.tokens = rec.tokens;
  qg.graph.n = rec.tokens.size();
  if (!rec.dependency_edges.empty()) {
    std::set<std::pair<int, int>> uniq(rec.dependency_edges.begin(), rec.dependency_edges.end());
    qg.graph.edges.assign(uniq.begin(), uniq.end());
  } else {
    for (std::size_t i = 0; i + 1 < rec.tokens.size(); ++i)
      qg.graph.edges.emplace_back(static_cast<int>(i), static_cast<int>(i + 1));
  }
  return qg;
}

NameMap NameMap::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("entity names: cannot open " + path.string());
  NameMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("entity names: line " + std::to_string(lineno) + ": expected 2 fields");
    map.names_[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return map;
}

const std::string& NameMap::surface(const std::string& entity) const {
  auto it = names_.find(entity);
  return it == names_.end() ? entity : it->second;
}

namespace {
std::vector<std::string> split_on(const std::string& s, auto is_sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_sep(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}
}  // namespace

std::vector<std::string> relation_tokens(const std::string& relation) {
  return split_on(relation, [](char c) { return c == '.' || c == '_'; });
}

std::vector<std::string> surface_tokens(const std::string& surface) {
  return split_on(surface, [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

GraphizedSubKsg graphize_subksg(const SubKsg& s, const KnowledgeGraph& g, const NameMap& names) {
  if (s.edges.empty()) throw std::invalid_argument("graphize_subksg: sub-KSG has no edges");
  GraphizedSubKsg out;
  std::unordered_map<EntityId, int> entity_node;
  auto entity_index = [&](EntityId e) {
    auto it = entity_node.find(e);
    if (it != entity_node.end()) return it->second;
    const int idx = static_cast<int>(out.node_tokens.size());
    entity_node.emplace(e, idx);
    out.node_tokens.push_back(surface_tokens(names.surface(g.entities.name(e))));
    out.node_entity.push_back(e);
    return idx;
  };
  for (const Triple& t : s.edges) {
    const int si = entity_index(t.subject);
    const int ri = static_cast<int>(out.node_tokens.size());
    out.node_tokens.push_back(relation_tokens(g.relations.name(t.relation)));
    out.node_entity.push_back(-1);
    const int oi = entity_index(t.object);
    out.graph.edges.emplace_back(si, ri);
    out.graph.edges.emplace_back(ri, oi);
  }
  out.graph.n = out.node_tokens.size();
  return out;
}

std::vector<std::string> linearize_subksg(const SubKsg& s, const KnowledgeGraph& g, const NameMap& names) {
  if (s.nodes.empty()) throw std::invalid_argument("linearize_subksg: empty sub-KSG");
  std::vector<std::string> seq;
  for (const Triple& t : s.edges) {
    auto subj = surface_tokens(names.surface(g.entities.name(t.subject)));
    auto rel = relation_tokens(g.relations.name(t.relation));
    auto obj = surface_tokens(names.surface(g.entities.name(t.object)));
    seq.insert(seq.end(), subj.begin(), subj.end());
    seq.insert(seq.end(), rel.begin(), rel.end());
    seq.insert(seq.end(), obj.begin(), obj.end());
  }
  return seq;
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& token) const {
  auto it = vocab_.find(token);
  if (it == vocab_.end()) return std::nullopt;
  return it->second;
}

num::Tensor EmbeddingTable::embed_tokens(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("embed_tokens: empty token list");
  num::Tensor out({1, dim_});
  for (const std::string& tok : tokens) {
    if (auto idx = find(tok)) {
      for (std::size_t j = 0; j < dim_; ++j) out(0, j) += matrix_(*idx, j);
    }
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (std::size_t j = 0; j < dim_; ++j) out(0, j) *= inv;
  return out;
}

num::Tensor EmbeddingTable::embed_nodes(const std::vector<std::vector<std::string>>& node_tokens) const {
  num::Tensor out({node_tokens.size(), dim_});
  for (std::size_t i = 0; i < node_tokens.size(); ++i) {
    if (node_tokens[i].empty()) continue;  // nameless node stays zero
    const num::Tensor row = embed_tokens(node_tokens[i]);
    for (std::size_t j = 0; j < dim_; ++j) out(i, j) = row(0, j);
  }
  return out;
}

num::Tensor EmbeddingTable::embed_token_rows(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("embed_token_rows: empty token list");
  num::Tensor out({tokens.size(), dim_});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (auto idx = find(tokens[i])) {
      for (std::size_t j = 0; j < dim_; ++j) out(i, j) = matrix_(*idx, j);
    }
  }
  return out;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path,
                                    const std::set<std::string>* vocab_filter) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("embeddings: cannot open " + path.string());
  EmbeddingTable table;
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> vec;
    double v;
    while (ls >> v) vec.push_back(v);
    if (table.dim_ == 0) {
      if (vec.empty())
        throw std::runtime_error("embeddings: line " + std::to_string(lineno) + ": no values");
      table.dim_ = vec.size();
    } else if (vec.size() != table.dim_) {
      throw std::runtime_error("embeddings: line " + std::to_string(lineno) + ": expected " +
                               std::to_string(table.dim_) + " values, got " + std::to_string(vec.size()));
    }
    if (vocab_filter && !vocab_filter->count(token)) continue;
    if (table.vocab_.count(token)) continue;  // first occurrence wins
    table.vocab_[token] = table.tokens_.size();
    table.tokens_.push_back(token);
    values.insert(values.end(), vec.begin(), vec.end());
  }
  table.matrix_ = num::Tensor::matrix(table.tokens_.size(), table.dim_ == 0 ? 1 : table.dim_,
                                      std::move(values));
  if (table.dim_ == 0) table.dim_ = 1;  // empty file edge case
  return table;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("embeddings: cannot open for writing " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    os << tokens_[i];
    for (std::size_t j = 0; j < dim_; ++j) {
      std::snprintf(buf, sizeof(buf), " %.17g", matrix_(i, j));
      os << buf;
    }
    os << '\n';
  }
}

EmbeddingTable EmbeddingTable::random(const std::vector<std::string>& vocab, std::size_t dim,
                                      num::Rng& rng) {
  EmbeddingTable table;
  table.dim_ = dim;
  table.matrix_ = num::Tensor({vocab.size(), dim});
  for (const std::string& tok : vocab) {
    if (table.vocab_.count(tok)) continue;
    table.vocab_[tok] = table.tokens_.size();
    table.tokens_.push_back(tok);
  }
  table.matrix_ = num::Tensor({table.tokens_.size(), dim});
  for (std::size_t i = 0; i < table.matrix_.size(); ++i) table.matrix_[i] = rng.uniform(-1.0, 1.0);
  return table;
}

}  // namespace ksgrank
