#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swt/corpus_io.hpp"
#include "swt/error.hpp"
#include "swt/masker.hpp"
#include "swt/trainer.hpp"

namespace swt {

struct GroupCosine {
  std::string sense_id;
  std::size_t size = 0;
  double mean_cosine = 0.0;
};

struct WithinGroupCosine {
  std::vector<GroupCosine> groups;
  double overall_mean = 0.0;  // mean of the per-group means
  std::vector<Diagnostic> diagnostics;
};

// Mean pairwise cosine per group. When `masks` is given, each group's vectors
// are multiplied by its sense's mask first; groups without a mask are skipped.
WithinGroupCosine within_group_cosine(const std::vector<SenseGroup>& groups, const MaskStore* masks = nullptr);

Vector sense_centroid(const SenseGroup& group, const ThresholdMask* mask = nullptr);

/// 1 / (1 + shortest undirected path length); 0 for disconnected senses.
double path_similarity(const Taxonomy& taxonomy, const std::string& a, const std::string& b);

/// Pearson correlation of averaged ranks. Throws for n < 3 or constant input.
double spearman(std::span<const double> xs, std::span<const double> ys);
/// Average ranks, 1-based; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

struct CorrelationReport {
  std::string model_id;
  std::size_t dim = 0;
  int layer = 0;
  double n_masked = 0.0;  // mean zeros per retained group
  double rho_original = 0.0;
  double rho_masked = 0.0;
  double cos_original = 0.0;  // mean within-group cosine, unmasked
  double cos_masked = 0.0;
  std::size_t groups_used = 0;
  std::size_t pairs_used = 0;
  std::size_t cross_pos_pairs_excluded = 0;
  std::vector<Diagnostic> diagnostics;
};

// Retains groups with size > min_size that have weights and a taxonomy node,
// then correlates pairwise path similarity with pairwise centroid cosine,
// once for original centroids and once for masked ones. Pairs whose groups
// carry different POS tags are excluded.
CorrelationReport correlation_report(const EmbeddingSet& set, const std::vector<SenseGroup>& groups,
                                     const WeightStore& weights, const Taxonomy& taxonomy,
                                     const MaskRule& rule, std::size_t min_size = 100);

void write_correlation_report(std::ostream& out, const CorrelationReport& report);

struct ProjectedPoint {
  std::string instance_id;
  std::string sense_id;
  double x = 0.0;
  double y = 0.0;
};

struct ProjectionOutput {
  std::vector<ProjectedPoint> points;
  std::vector<std::vector<double>> directions;  // unit length, first nonzero coordinate positive
  std::vector<double> eigenvalues;
};

// Fisher LDA: top generalized eigendirections of (S_W + ridge*I)^-1 S_B,
// found by deflated power iteration on the whitened between-class scatter.
// Coordinates are projections of the centered vectors.
ProjectionOutput lda_project(const std::vector<SenseGroup>& groups, std::size_t out_dim = 2,
                             double ridge = 1e-6, const MaskStore* masks = nullptr);

void write_projection(std::ostream& out, const ProjectionOutput& projection);

struct DiscardedPair {
  std::string instance_a;
  std::string instance_b;
  std::string sense_a;
  std::string sense_b;
  double cosine = 0.0;

  bool same_sense() const { return sense_a == sense_b; }
};

struct DiscardedProbe {
  std::vector<DiscardedPair> top;  // by descending cosine
  double mean_within = 0.0;        // over all same-sense pairs
  double mean_across = 0.0;        // over all cross-sense pairs
  std::size_t pairs = 0;
  std::vector<Diagnostic> diagnostics;
};

// Keeps only each record's discarded dims (complement of its sense's mask) and
// ranks every pair of records by cosine.
DiscardedProbe inspect_discarded(const std::vector<SenseGroup>& groups, const MaskStore& masks,
                                 std::size_t top_k = 100);

void write_discarded(std::ostream& out, const DiscardedProbe& probe);

}  // namespace swt
