#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "swt/corpus_io.hpp"

namespace swt {

struct SynthConfig {
  std::size_t n_groups = 20;
  std::size_t group_size = 100;
  std::size_t dim = 64;
  std::size_t signal_dims = 32;
  double signal_strength = 1.0;  // mean offset on signal dims
  double noise_sigma = 0.5;
  std::size_t taxonomy_depth = 3;
  double test_fraction = 0.0;
  std::uint64_t seed = 1;
  // When set, each taxonomy node owns a slice of signal dims and a sense's
  // signal set is the union along its root path, so senses close in the
  // taxonomy share more structure.
  bool taxonomy_aligned = false;
  std::string pos = "n";

  void validate() const;
};

struct PlantedTruth {
  std::map<std::string, std::vector<std::size_t>> signal_dims;  // sorted indices per sense
};

struct SynthCorpus {
  EmbeddingSet train;  // labeled
  EmbeddingSet test;   // unlabeled; empty when test_fraction yields no test members
  GoldKey gold;        // labels of `test`
  SenseInventory inventory;
  Taxonomy taxonomy;
  PlantedTruth truth;
};

// Each sense's members are signal_strength on its signal dims plus
// N(0, noise_sigma^2) on every dim. Senses are split over lemmas spanning 2-4
// senses each, and are the leaves of a balanced taxonomy of the given depth.
// The last floor(test_fraction * group_size) members of each sense form the
// test split.
SynthCorpus generate_synthetic(const SynthConfig& config);

/// Fraction of the floor(p * D) lowest-weight dims that are not signal dims.
/// An empty selection scores 1.
double recovery_score(std::span<const double> w, std::span<const std::size_t> signal_dims, double p);

void write_truth(std::ostream& out, const PlantedTruth& truth);
PlantedTruth read_truth(std::istream& in);

/// Writes train.jsonl, test.jsonl + gold.key (when a test split exists),
/// inventory.tsv, taxonomy.tsv and truth.json into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SynthCorpus& corpus,
                     EmbeddingFormat format = EmbeddingFormat::Jsonl);

}  // namespace swt
