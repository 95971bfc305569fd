#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace ksgrank::synth {

struct SynthSpec {
  std::uint64_t seed = 20240907;
  std::size_t entities = 200;
  std::size_t questions = 50;
  std::size_t embedding_dim = 24;
};

struct SynthDataset {
  std::string triples_tsv;
  std::string questions_jsonl;
  std::string entity_names_tsv;
  std::string embeddings_txt;
};

// Deterministic toy corpus: a ~200-node knowledge graph, 50 questions whose
// answers mostly sit inside 2-hop partitions of their topic entity, display
// names, and a matching random embedding file.
SynthDataset generate(const SynthSpec& spec = {});

void write(const SynthDataset& ds, const std::filesystem::path& dir);

}  // namespace ksgrank::synth
