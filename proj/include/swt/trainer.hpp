#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swt/corpus_io.hpp"
#include "swt/error.hpp"
#include "swt/random.hpp"

namespace swt {

enum class Objective { Sum, Mean };
enum class SignConvention { Corrected, Literal };
// Standard: w += lr * grad / (eps + sqrt(gti)).
// Literal:  w = (w + lr * grad) / (eps + sqrt(gti)), kept for comparison only.
enum class UpdateRule { Standard, Literal };

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 500;
  int explore_epochs = 100;
  double alpha = 0.1;
  double mask_fraction = 0.05;
  double l1 = 1e-4;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  Objective objective = Objective::Sum;
  SignConvention sign = SignConvention::Corrected;
  UpdateRule update = UpdateRule::Standard;
  double init_weight = 0.5;

  void validate() const;
  /// Zeros per step mask: max(1, floor(mask_fraction * dim)), capped at dim.
  std::size_t mask_count(std::size_t dim) const;
};

/// floor(fraction * n), tolerant of decimal fractions like 0.29 * 100 landing just below an integer.
std::size_t floor_fraction(double fraction, std::size_t n);

std::string to_string(Objective o);
std::string to_string(SignConvention s);
std::string to_string(UpdateRule u);
Objective parse_objective(const std::string& s);
SignConvention parse_sign(const std::string& s);
UpdateRule parse_update(const std::string& s);

struct WeightState {
  std::string sense_id;
  std::vector<double> w;
  std::vector<double> gti;
  int epochs_run = 0;
  TrainConfig config;
  double s_pre = 0.0;

  std::size_t dim() const { return w.size(); }
};

struct StepMask {
  std::vector<std::uint8_t> bits;           // 1 = keep, 0 = masked
  std::vector<std::size_t> zero_positions;  // sorted

  static StepMask from_zeros(std::size_t dim, std::vector<std::size_t> zeros);
};

struct SimilarityResult {
  double value = 0.0;
  std::size_t zero_pairs = 0;  // pairs involving a zero vector, scored as cos = 0
};

/// Sum or mean of cosine similarity over unordered pairs. Throws on fewer than two vectors.
SimilarityResult pairwise_similarity(std::span<const Vector> vectors, Objective objective);

StepMask generate_mask_uniform(std::size_t dim, std::size_t count, Rng& rng);

// With probability alpha this is generate_mask_uniform. Otherwise dims are
// drawn without replacement with probability proportional to
// (max(w) - w_d + 1e-6), so high-weight dims are masked less often.
StepMask generate_mask_policy(std::span<const double> w, std::size_t count, double alpha, Rng& rng);

/// One l1 + AdaGrad update from the similarity observed under `mask`.
WeightState sgd_step(WeightState state, const StepMask& mask, double s_cur);

// Masked pairwise similarity for one group, computed from a cached Gram
// matrix so each epoch costs O(pairs * masked dims) instead of O(pairs * D).
class GroupSimilarity {
 public:
  explicit GroupSimilarity(std::span<const Vector> vectors);

  SimilarityResult evaluate(const StepMask& mask, Objective objective) const;
  SimilarityResult unmasked(Objective objective) const;
  std::size_t size() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> rows_;   // n x dim, row-major
  std::vector<double> gram_;   // n x n, row-major
};

using EpochObserver = std::function<void(const WeightState&, const StepMask&, double s_cur)>;

// Trains one sense group. Groups with fewer than two members, or whose
// training hits a non-finite update, yield nullopt and a diagnostic.
std::optional<WeightState> train_group(const SenseGroup& group, const TrainConfig& config,
                                       std::vector<Diagnostic>* diagnostics = nullptr,
                                       const EpochObserver& observer = {});

/// Per-group seed: config.seed XOR fnv1a64(sense_id).
std::uint64_t group_seed(std::uint64_t seed, const std::string& sense_id);

using WeightStore = std::map<std::string, WeightState>;

struct TrainResult {
  WeightStore weights;
  std::vector<Diagnostic> diagnostics;  // sorted by sense id
};

/// threads == 0 uses the hardware concurrency. Output does not depend on it.
TrainResult train_all(const std::vector<SenseGroup>& groups, const TrainConfig& config,
                      unsigned threads = 1);

void write_weights(std::ostream& out, const WeightStore& store);
WeightStore read_weights(std::istream& in);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace swt
