#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swt/corpus_io.hpp"
#include "swt/trainer.hpp"
#include "swt/wsd.hpp"

namespace swt {

struct MaskRule {
  enum class Kind { Percentile, Absolute };
  Kind kind = Kind::Percentile;
  double value = 0.05;

  static MaskRule percentile(double p) { return {Kind::Percentile, p}; }
  static MaskRule absolute(double tau) { return {Kind::Absolute, tau}; }
  /// "p=0.05" or "tau=0.5".
  static MaskRule parse(const std::string& text);
  std::string to_string() const;
};

struct ThresholdMask {
  std::string sense_id;
  std::vector<std::uint8_t> bits;  // 1 = kept, 0 = masked
  MaskRule rule;
  std::size_t n_masked = 0;

  std::size_t dim() const { return bits.size(); }
  std::vector<std::size_t> zero_indices() const;
};

/// Zeros the floor(p * D) lowest-weight dims; equal weights are taken lower index first.
ThresholdMask percentile_mask(std::span<const double> w, double p, std::string sense_id = {});
/// Zeros every dim with w_d < tau.
ThresholdMask absolute_mask(std::span<const double> w, double tau, std::string sense_id = {});
ThresholdMask derive_mask(std::span<const double> w, const MaskRule& rule, std::string sense_id = {});

/// Keeps exactly the dims the input mask discards.
ThresholdMask complement(const ThresholdMask& mask);

Vector apply_mask(std::span<const float> v, std::span<const std::uint8_t> bits);

using MaskStore = std::map<std::string, ThresholdMask>;

MaskStore build_masks(const WeightStore& weights, const MaskRule& rule);

// jsonl, one line per sense:
// {"sense":"...","rule":"p=0.05","dim":D,"bits_zero":[...]}
void write_masks(std::ostream& out, const MaskStore& masks);
MaskStore read_masks(std::istream& in);
MaskStore load_masks(const std::filesystem::path& path);

struct MaskSelection {
  std::string instance_id;
  std::optional<std::string> chosen_sense;  // empty: no usable candidate, caller falls back
  double d = 0.0;
  std::vector<std::pair<std::string, double>> per_sense;  // in candidate order
  std::size_t zero_query_warnings = 0;
};

// Tries the mask of each candidate sense on the query and on every training
// occurrence of the lemma, scoring d = sum of cosine distances from the masked
// query to its k nearest masked occurrences (k capped at the occurrence
// count). Candidates without a mask are skipped. The smallest d wins; ties go
// to inventory order, then sense id.
MaskSelection select_mask_for_token(std::span<const float> query, const std::string& lemma,
                                    const std::string& pos, const std::vector<std::string>& candidate_senses,
                                    const MaskStore& masks, const LemmaOccurrenceIndex& neighbors,
                                    std::size_t k, const SenseInventory* inventory = nullptr);

/// Senses of the lemma attested in training, ordered by inventory position then sense id.
std::vector<std::string> attested_senses(const std::string& lemma, const std::string& pos,
                                         const LemmaOccurrenceIndex& neighbors,
                                         const SenseInventory* inventory = nullptr);

struct MaskedWsdResult {
  std::vector<Prediction> original;
  std::vector<Prediction> masked;          // word KNN re-run in the selected masked space
  std::vector<Prediction> selected_sense;  // the selecting sense itself
  std::vector<MaskSelection> selections;
  double mean_n_masked = 0.0;
};

// Word-based KNN with fallback on the original vectors, then again with the
// per-token selected mask.
MaskedWsdResult run_masked_wsd(const EmbeddingSet& train, const EmbeddingSet& test,
                               const SenseInventory& inventory, const MaskStore& masks);

}  // namespace swt
