#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swt/corpus_io.hpp"

namespace swt {

/// Cosine distance 1 - cos(a, b); a zero vector has cos 0 with anything.
double cosine_distance(std::span<const float> a, std::span<const float> b);
double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct SenseCentroidIndex {
  struct Entry {
    std::string sense_id;
    Vector centroid;
    bool zero = false;
  };
  std::map<LemmaKey, std::vector<Entry>> entries;  // entries sorted by sense_id
};

struct LemmaOccurrenceIndex {
  struct Occurrence {
    Vector vector;
    std::string sense_id;
  };
  std::map<LemmaKey, std::vector<Occurrence>> entries;  // training order

  const std::vector<Occurrence>* find(const std::string& lemma, const std::string& pos) const;
  std::size_t count(const std::string& lemma, const std::string& pos) const;
};

SenseCentroidIndex build_sense_index(const EmbeddingSet& set);
LemmaOccurrenceIndex build_word_index(const EmbeddingSet& set);

enum class PredictionSource { Knn, Fallback, Mfs, None };
std::string to_string(PredictionSource s);

struct Prediction {
  std::string instance_id;
  std::optional<std::string> sense_id;
  PredictionSource source = PredictionSource::None;
};

struct KnnConfig {
  enum class KRule { Fixed, WordRule };
  KRule k_rule = KRule::WordRule;
  std::size_t k = 5;  // fixed k, or the cap of the word rule
  bool fallback = true;
};

/// k = min(occurrences, cap) under the word rule, min(occurrences, k) when fixed.
std::size_t effective_k(const KnnConfig& config, std::size_t occurrences);

/// Nearest sense centroid (k = 1); equidistant centroids resolve to the lower sense id.
Prediction predict_sense_knn(std::span<const float> query, const std::string& lemma, const std::string& pos,
                             const SenseCentroidIndex& index, const SenseInventory& inventory,
                             bool fallback);

// Majority vote over the k nearest training occurrences of the lemma. A vote
// tie goes to whichever tied label has the single nearest neighbour. When
// `mask` is given, query and occurrences are both multiplied by it first.
Prediction predict_word_knn(std::span<const float> query, const std::string& lemma, const std::string& pos,
                            const LemmaOccurrenceIndex& index, const SenseInventory& inventory,
                            const KnnConfig& config,
                            std::optional<std::span<const std::uint8_t>> mask = std::nullopt);

/// Most frequent training sense; count ties resolved by inventory order, then sense id.
Prediction predict_mfs(const std::string& lemma, const std::string& pos, const LemmaOccurrenceIndex& index,
                       const SenseInventory& inventory, bool fallback);

/// First inventory sense, or NONE when the lemma is not in the inventory.
Prediction fallback_prediction(const std::string& lemma, const std::string& pos,
                               const SenseInventory& inventory, bool fallback);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t attempted = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

struct EvalReport {
  Scores overall;
  std::map<std::string, Scores> per_dataset;  // dataset = instance id prefix before the first '.'
};

EvalReport evaluate_f1(std::span<const Prediction> predictions, const GoldKey& gold);

enum class WsdMethod { WordFallback, Word, SenseFallback, Sense, Mfs };
WsdMethod parse_method(const std::string& name);
std::string to_string(WsdMethod m);

/// Runs one baseline over every record of `test`.
std::vector<Prediction> run_wsd(WsdMethod method, const EmbeddingSet& train, const EmbeddingSet& test,
                                const SenseInventory& inventory);

/// `instance_id sense_id` lines; NONE predictions omitted.
void write_predictions(std::ostream& out, std::span<const Prediction> predictions);

// Report rows in TSV: method, dataset, P, R, F1. The "all" row comes first.
void write_report_header(std::ostream& out);
void write_report_rows(std::ostream& out, const std::string& method, const EvalReport& report);

}  // namespace swt
