#include "swt/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "swt/file_util.hpp"

namespace swt {

using json = nlohmann::json;

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double finish(double sum, std::size_t n, Objective objective) {
  if (objective == Objective::Sum) return sum;
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("learning rate must be > 0");
  if (epochs < 0) throw Error("epochs must be >= 0");
  if (explore_epochs < 0 || explore_epochs > epochs) throw Error("explore_epochs must be in [0, epochs]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must be in [0, 1]");
  if (!(mask_fraction > 0.0 && mask_fraction <= 1.0)) throw Error("mask_fraction must be in (0, 1]");
  if (!(l1 >= 0.0)) throw Error("l1 coefficient must be >= 0");
  if (!(epsilon > 0.0)) throw Error("epsilon must be > 0");
  if (!std::isfinite(init_weight)) throw Error("init_weight must be finite");
}

std::size_t floor_fraction(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

std::size_t TrainConfig::mask_count(std::size_t dim) const {
  const auto n = floor_fraction(mask_fraction, dim);
  return std::min(dim, std::max<std::size_t>(1, n));
}

std::string to_string(Objective o) { return o == Objective::Sum ? "sum" : "mean"; }
std::string to_string(SignConvention s) { return s == SignConvention::Corrected ? "corrected" : "literal"; }
std::string to_string(UpdateRule u) { return u == UpdateRule::Standard ? "standard" : "literal"; }

Objective parse_objective(const std::string& s) {
  if (s == "sum") return Objective::Sum;
  if (s == "mean") return Objective::Mean;
  throw Error("unknown objective: " + s);
}

SignConvention parse_sign(const std::string& s) {
  if (s == "corrected") return SignConvention::Corrected;
  if (s == "literal") return SignConvention::Literal;
  throw Error("unknown sign convention: " + s);
}

UpdateRule parse_update(const std::string& s) {
  if (s == "standard") return UpdateRule::Standard;
  if (s == "literal") return UpdateRule::Literal;
  throw Error("unknown update rule: " + s);
}

StepMask StepMask::from_zeros(std::size_t dim, std::vector<std::size_t> zeros) {
  StepMask m;
  std::sort(zeros.begin(), zeros.end());
  if (std::adjacent_find(zeros.begin(), zeros.end()) != zeros.end()) throw Error("duplicate mask position");
  if (!zeros.empty() && zeros.back() >= dim) throw Error("mask position out of range");
  m.bits.assign(dim, 1);
  for (auto z : zeros) m.bits[z] = 0;
  m.zero_positions = std::move(zeros);
  return m;
}

SimilarityResult pairwise_similarity(std::span<const Vector> vectors, Objective objective) {
  const std::size_t n = vectors.size();
  if (n < 2) throw Error("degenerate group: pairwise similarity needs at least 2 vectors");
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(dot(vectors[i], vectors[i]));
  SimilarityResult r;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (vectors[i].size() != vectors[j].size()) throw Error("vector length mismatch");
      if (norms[i] == 0.0 || norms[j] == 0.0) {
        ++r.zero_pairs;
        continue;
      }
      r.value += dot(vectors[i], vectors[j]) / (norms[i] * norms[j]);
    }
  }
  r.value = finish(r.value, n, objective);
  return r;
}

StepMask generate_mask_uniform(std::size_t dim, std::size_t count, Rng& rng) {
  if (count > dim) throw Error("mask count exceeds dimension");
  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> idx(dim);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + uniform_index(rng, dim - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return StepMask::from_zeros(dim, std::move(idx));
}

StepMask generate_mask_policy(std::span<const double> w, std::size_t count, double alpha, Rng& rng) {
  const std::size_t dim = w.size();
  if (count > dim) throw Error("mask count exceeds dimension");
  if (uniform01(rng) < alpha) return generate_mask_uniform(dim, count, rng);

  constexpr double kDelta = 1e-6;
  const double w_max = dim ? *std::max_element(w.begin(), w.end()) : 0.0;
  std::vector<double> p(dim);
  for (std::size_t d = 0; d < dim; ++d) p[d] = w_max - w[d] + kDelta;

  std::vector<std::size_t> zeros;
  zeros.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = dim;
    std::size_t last_open = dim;
    for (std::size_t d = 0; d < dim; ++d) {
      if (p[d] <= 0.0) continue;
      last_open = d;
      acc += p[d];
      if (target < acc) {
        pick = d;
        break;
      }
    }
    if (pick == dim) pick = last_open;  // rounding left target at the very end
    zeros.push_back(pick);
    p[pick] = 0.0;
  }
  return StepMask::from_zeros(dim, std::move(zeros));
}

WeightState sgd_step(WeightState state, const StepMask& mask, double s_cur) {
  const std::size_t dim = state.w.size();
  if (mask.bits.size() != dim || state.gti.size() != dim) throw Error("sgd_step: dimension mismatch");
  if (!std::isfinite(s_cur)) throw Error("sgd_step: non-finite similarity");
  const auto& cfg = state.config;
  const double drop = state.s_pre - s_cur;
  for (std::size_t d = 0; d < dim; ++d) {
    const double masked = mask.bits[d] ? 0.0 : 1.0;  // 1 - mask
    const double feedback = cfg.sign == SignConvention::Corrected ? drop * masked : -drop * masked;
    const double grad = feedback - cfg.l1 * sign(state.w[d]);
    if (!std::isfinite(grad)) throw Error("non-finite gradient in sense '" + state.sense_id + "'");
    state.gti[d] += grad * grad;
    const double denom = cfg.epsilon + std::sqrt(state.gti[d]);
    if (cfg.update == UpdateRule::Standard) {
      state.w[d] += cfg.learning_rate * grad / denom;
    } else {
      state.w[d] = (state.w[d] + cfg.learning_rate * grad) / denom;
    }
    if (!std::isfinite(state.w[d])) throw Error("non-finite weight in sense '" + state.sense_id + "'");
  }
  ++state.epochs_run;
  return state;
}

GroupSimilarity::GroupSimilarity(std::span<const Vector> vectors)
    : n_(vectors.size()), dim_(vectors.empty() ? 0 : vectors.front().size()) {
  rows_.resize(n_ * dim_);
  for (std::size_t i = 0; i < n_; ++i) {
    if (vectors[i].size() != dim_) throw Error("vector length mismatch");
    std::copy(vectors[i].begin(), vectors[i].end(), rows_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
  }
  gram_.assign(n_ * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const double* a = &rows_[i * dim_];
    for (std::size_t j = i; j < n_; ++j) {
      const double* b = &rows_[j * dim_];
      double s = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) s += a[d] * b[d];
      gram_[i * n_ + j] = gram_[j * n_ + i] = s;
    }
  }
}

SimilarityResult GroupSimilarity::unmasked(Objective objective) const {
  StepMask none;
  none.bits.assign(dim_, 1);
  return evaluate(none, objective);
}

SimilarityResult GroupSimilarity::evaluate(const StepMask& mask, Objective objective) const {
  if (n_ < 2) throw Error("degenerate group: pairwise similarity needs at least 2 vectors");
  if (mask.bits.size() != dim_) throw Error("mask length mismatch");
  const auto& zeros = mask.zero_positions;
  // Masked squared norms are summed directly over kept dims so a vector whose
  // support is fully masked comes out exactly zero.
  std::vector<double> norms(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double* a = &rows_[i * dim_];
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      if (mask.bits[d]) s += a[d] * a[d];
    }
    norms[i] = std::sqrt(s);
  }
  SimilarityResult r;
  for (std::size_t i = 0; i < n_; ++i) {
    const double* a = &rows_[i * dim_];
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (norms[i] == 0.0 || norms[j] == 0.0) {
        ++r.zero_pairs;
        continue;
      }
      const double* b = &rows_[j * dim_];
      double s = gram_[i * n_ + j];
      for (auto z : zeros) s -= a[z] * b[z];
      r.value += s / (norms[i] * norms[j]);
    }
  }
  r.value = finish(r.value, n_, objective);
  return r;
}

std::uint64_t group_seed(std::uint64_t seed, const std::string& sense_id) {
  return seed ^ fnv1a64(sense_id);
}

std::optional<WeightState> train_group(const SenseGroup& group, const TrainConfig& config,
                                       std::vector<Diagnostic>* diagnostics,
                                       const EpochObserver& observer) {
  auto report = [&](std::string message) {
    if (diagnostics) diagnostics->push_back({group.sense_id, std::move(message)});
  };
  if (group.size() < 2) {
    report("group has " + std::to_string(group.size()) + " member(s); at least 2 required");
    return std::nullopt;
  }
  config.validate();
  const auto vectors = group.vectors();
  const std::size_t dim = vectors.front().size();
  const GroupSimilarity similarity(vectors);
  const std::size_t count = config.mask_count(dim);

  WeightState state;
  state.sense_id = group.sense_id;
  state.w.assign(dim, config.init_weight);
  state.gti.assign(dim, 0.0);
  state.config = config;
  state.s_pre = similarity.unmasked(config.objective).value;

  Rng rng(group_seed(config.seed, group.sense_id));
  try {
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const StepMask mask = epoch < config.explore_epochs
                                ? generate_mask_uniform(dim, count, rng)
                                : generate_mask_policy(state.w, count, config.alpha, rng);
      const double s_cur = similarity.evaluate(mask, config.objective).value;
      state = sgd_step(std::move(state), mask, s_cur);
      if (observer) observer(state, mask, s_cur);
    }
  } catch (const Error& e) {
    report(std::string("training aborted: ") + e.what());
    return std::nullopt;
  }
  return state;
}

TrainResult train_all(const std::vector<SenseGroup>& groups, const TrainConfig& config,
                      unsigned threads) {
  config.validate();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, groups.size())));

  std::vector<std::optional<WeightState>> results(groups.size());
  std::vector<std::vector<Diagnostic>> diags(groups.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < groups.size(); i = next++) {
      results[i] = train_group(groups[i], config, &diags[i]);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  TrainResult out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (results[i]) out.weights.emplace(results[i]->sense_id, std::move(*results[i]));
    for (auto& d : diags[i]) out.diagnostics.push_back(std::move(d));
  }
  std::stable_sort(out.diagnostics.begin(), out.diagnostics.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.sense_id < b.sense_id; });
  return out;
}

namespace {

json config_to_json(const TrainConfig& c) {
  return json{{"lr", c.learning_rate},
              {"epochs", c.epochs},
              {"explore_epochs", c.explore_epochs},
              {"alpha", c.alpha},
              {"mask_fraction", c.mask_fraction},
              {"l1", c.l1},
              {"eps", c.epsilon},
              {"seed", c.seed},
              {"objective", to_string(c.objective)},
              {"sign", to_string(c.sign)},
              {"update", to_string(c.update)},
              {"init_weight", c.init_weight}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("lr", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.explore_epochs = j.value("explore_epochs", c.explore_epochs);
  c.alpha = j.value("alpha", c.alpha);
  c.mask_fraction = j.value("mask_fraction", c.mask_fraction);
  c.l1 = j.value("l1", c.l1);
  c.epsilon = j.value("eps", c.epsilon);
  c.seed = j.value("seed", c.seed);
  c.objective = parse_objective(j.value("objective", std::string("sum")));
  c.sign = parse_sign(j.value("sign", std::string("corrected")));
  c.update = parse_update(j.value("update", std::string("standard")));
  c.init_weight = j.value("init_weight", c.init_weight);
  return c;
}

}  // namespace

void write_weights(std::ostream& out, const WeightStore& store) {
  for (const auto& [sense, s] : store) {
    json j{{"sense", sense},       {"dim", s.w.size()},          {"w", s.w},         {"gti", s.gti},
           {"epochs", s.epochs_run}, {"s_pre", s.s_pre}, {"config", config_to_json(s.config)}};
    out << j.dump() << '\n';
  }
}

WeightStore read_weights(std::istream& in) {
  WeightStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      WeightState s;
      s.sense_id = j.at("sense").get<std::string>();
      s.w = j.at("w").get<std::vector<double>>();
      s.gti = j.at("gti").get<std::vector<double>>();
      s.epochs_run = j.value("epochs", 0);
      s.s_pre = j.value("s_pre", 0.0);
      if (j.contains("config")) s.config = config_from_json(j.at("config"));
      const auto dim = j.at("dim").get<std::size_t>();
      if (s.w.size() != dim || s.gti.size() != dim) throw Error("dimension mismatch");
      if (!store.emplace(s.sense_id, s).second) throw Error("duplicate sense '" + s.sense_id + "'");
    } catch (const json::exception& e) {
      throw Error("weights line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("weights line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

WeightStore load_weights(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_weights(in);
}

}  // namespace swt
