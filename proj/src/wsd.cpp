#include "swt/wsd.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include "swt/error.hpp"

namespace swt {

namespace {

std::vector<float> masked_copy(std::span<const float> v, std::optional<std::span<const std::uint8_t>> mask) {
  std::vector<float> out(v.begin(), v.end());
  if (mask) {
    if (mask->size() != v.size()) throw Error("mask length mismatch");
    for (std::size_t d = 0; d < out.size(); ++d) {
      if (!(*mask)[d]) out[d] = 0.0f;
    }
  }
  return out;
}

// Position of a sense in the inventory entry, or past-the-end when absent.
std::size_t inventory_rank(const std::vector<std::string>* senses, const std::string& sense) {
  if (!senses) return std::numeric_limits<std::size_t>::max();
  const auto it = std::find(senses->begin(), senses->end(), sense);
  return it == senses->end() ? std::numeric_limits<std::size_t>::max()
                             : static_cast<std::size_t>(it - senses->begin());
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error("vector length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  return 1.0 - cosine_similarity(a, b);
}

const std::vector<LemmaOccurrenceIndex::Occurrence>* LemmaOccurrenceIndex::find(
    const std::string& lemma, const std::string& pos) const {
  const auto it = entries.find({lemma, pos});
  return it == entries.end() ? nullptr : &it->second;
}

std::size_t LemmaOccurrenceIndex::count(const std::string& lemma, const std::string& pos) const {
  const auto* occ = find(lemma, pos);
  return occ ? occ->size() : 0;
}

SenseCentroidIndex build_sense_index(const EmbeddingSet& set) {
  std::map<LemmaKey, std::map<std::string, std::pair<std::vector<double>, std::size_t>>> sums;
  for (const auto& r : set.records) {
    if (!r.sense_id) continue;
    auto& [sum, n] = sums[{r.lemma, r.pos}][*r.sense_id];
    if (sum.empty()) sum.assign(set.dim, 0.0);
    for (std::size_t d = 0; d < set.dim; ++d) sum[d] += r.vector[d];
    ++n;
  }
  SenseCentroidIndex index;
  for (auto& [key, senses] : sums) {
    auto& entries = index.entries[key];
    for (auto& [sense, acc] : senses) {
      SenseCentroidIndex::Entry e;
      e.sense_id = sense;
      e.centroid.resize(set.dim);
      bool nonzero = false;
      for (std::size_t d = 0; d < set.dim; ++d) {
        e.centroid[d] = static_cast<float>(acc.first[d] / static_cast<double>(acc.second));
        nonzero = nonzero || e.centroid[d] != 0.0f;
      }
      e.zero = !nonzero;
      entries.push_back(std::move(e));
    }
  }
  return index;
}

LemmaOccurrenceIndex build_word_index(const EmbeddingSet& set) {
  LemmaOccurrenceIndex index;
  for (const auto& r : set.records) {
    if (!r.sense_id) continue;
    index.entries[{r.lemma, r.pos}].push_back({r.vector, *r.sense_id});
  }
  return index;
}

std::string to_string(PredictionSource s) {
  switch (s) {
    case PredictionSource::Knn: return "knn";
    case PredictionSource::Fallback: return "fallback";
    case PredictionSource::Mfs: return "mfs";
    case PredictionSource::None: return "none";
  }
  return "none";
}

std::size_t effective_k(const KnnConfig& config, std::size_t occurrences) {
  return std::min(occurrences, config.k);
}

Prediction fallback_prediction(const std::string& lemma, const std::string& pos,
                               const SenseInventory& inventory, bool fallback) {
  Prediction p;
  if (!fallback) return p;
  if (const auto* senses = inventory.find(lemma, pos); senses && !senses->empty()) {
    p.sense_id = senses->front();
    p.source = PredictionSource::Fallback;
  }
  return p;
}

Prediction predict_sense_knn(std::span<const float> query, const std::string& lemma, const std::string& pos,
                             const SenseCentroidIndex& index, const SenseInventory& inventory,
                             bool fallback) {
  const auto it = index.entries.find({lemma, pos});
  if (it == index.entries.end() || it->second.empty()) return fallback_prediction(lemma, pos, inventory, fallback);
  // Entries are sorted by sense id, so strict < keeps the lower id on ties.
  const SenseCentroidIndex::Entry* best = nullptr;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& e : it->second) {
    const double d = cosine_distance(query, e.centroid);
    if (!best || d < best_dist) {
      best = &e;
      best_dist = d;
    }
  }
  return {{}, best->sense_id, PredictionSource::Knn};
}

Prediction predict_word_knn(std::span<const float> query, const std::string& lemma, const std::string& pos,
                            const LemmaOccurrenceIndex& index, const SenseInventory& inventory,
                            const KnnConfig& config, std::optional<std::span<const std::uint8_t>> mask) {
  const auto* occ = index.find(lemma, pos);
  if (!occ || occ->empty()) return fallback_prediction(lemma, pos, inventory, config.fallback);

  const auto q = masked_copy(query, mask);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(occ->size());
  for (std::size_t i = 0; i < occ->size(); ++i) {
    const auto v = masked_copy((*occ)[i].vector, mask);
    dist.emplace_back(cosine_distance(q, v), i);
  }
  const std::size_t k = effective_k(config, occ->size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  // votes: label -> (count, rank of its nearest neighbour)
  std::map<std::string, std::pair<std::size_t, std::size_t>> votes;
  for (std::size_t r = 0; r < k; ++r) {
    auto [it, inserted] = votes.try_emplace((*occ)[dist[r].second].sense_id, 0, r);
    ++it->second.first;
  }
  const auto winner = std::min_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.second.second < b.second.second;
  });
  return {{}, winner->first, PredictionSource::Knn};
}

Prediction predict_mfs(const std::string& lemma, const std::string& pos, const LemmaOccurrenceIndex& index,
                       const SenseInventory& inventory, bool fallback) {
  const auto* occ = index.find(lemma, pos);
  if (!occ || occ->empty()) return fallback_prediction(lemma, pos, inventory, fallback);
  std::map<std::string, std::size_t> counts;
  for (const auto& o : *occ) ++counts[o.sense_id];
  const auto* senses = inventory.find(lemma, pos);
  const auto best = std::min_element(counts.begin(), counts.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    const auto ra = inventory_rank(senses, a.first), rb = inventory_rank(senses, b.first);
    if (ra != rb) return ra < rb;
    return a.first < b.first;
  });
  return {{}, best->first, PredictionSource::Mfs};
}

namespace {

void finalize(Scores& s) {
  s.precision = s.attempted ? static_cast<double>(s.correct) / static_cast<double>(s.attempted) : 0.0;
  s.recall = s.total ? static_cast<double>(s.correct) / static_cast<double>(s.total) : 0.0;
  const double pr = s.precision + s.recall;
  s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
}

std::string dataset_of(const std::string& instance_id) {
  const auto dot = instance_id.find('.');
  return dot == std::string::npos ? std::string("all") : instance_id.substr(0, dot);
}

}  // namespace

EvalReport evaluate_f1(std::span<const Prediction> predictions, const GoldKey& gold) {
  EvalReport report;
  for (const auto& [id, _] : gold) {
    ++report.overall.total;
    ++report.per_dataset[dataset_of(id)].total;
  }
  std::set<std::string> seen;
  for (const auto& p : predictions) {
    const auto g = gold.find(p.instance_id);
    if (g == gold.end()) throw Error("prediction for unknown instance '" + p.instance_id + "'");
    if (!seen.insert(p.instance_id).second) throw Error("duplicate prediction for '" + p.instance_id + "'");
    if (!p.sense_id) continue;
    auto& ds = report.per_dataset[dataset_of(p.instance_id)];
    ++report.overall.attempted;
    ++ds.attempted;
    if (*p.sense_id == g->second) {
      ++report.overall.correct;
      ++ds.correct;
    }
  }
  finalize(report.overall);
  for (auto& [_, s] : report.per_dataset) finalize(s);
  return report;
}

WsdMethod parse_method(const std::string& name) {
  if (name == "wf") return WsdMethod::WordFallback;
  if (name == "w") return WsdMethod::Word;
  if (name == "sf") return WsdMethod::SenseFallback;
  if (name == "s") return WsdMethod::Sense;
  if (name == "mfs") return WsdMethod::Mfs;
  throw Error("unknown wsd method: " + name);
}

std::string to_string(WsdMethod m) {
  switch (m) {
    case WsdMethod::WordFallback: return "wf";
    case WsdMethod::Word: return "w";
    case WsdMethod::SenseFallback: return "sf";
    case WsdMethod::Sense: return "s";
    case WsdMethod::Mfs: return "mfs";
  }
  return "wf";
}

std::vector<Prediction> run_wsd(WsdMethod method, const EmbeddingSet& train, const EmbeddingSet& test,
                                const SenseInventory& inventory) {
  if (train.dim != test.dim) throw Error("train and test dimensions differ");
  const bool sense_based = method == WsdMethod::SenseFallback || method == WsdMethod::Sense;
  const bool fallback =
      method == WsdMethod::WordFallback || method == WsdMethod::SenseFallback || method == WsdMethod::Mfs;
  SenseCentroidIndex sense_index;
  LemmaOccurrenceIndex word_index;
  if (sense_based) {
    sense_index = build_sense_index(train);
  } else {
    word_index = build_word_index(train);
  }
  KnnConfig knn;
  knn.fallback = fallback;

  std::vector<Prediction> out;
  out.reserve(test.records.size());
  for (const auto& r : test.records) {
    Prediction p;
    if (sense_based) {
      p = predict_sense_knn(r.vector, r.lemma, r.pos, sense_index, inventory, fallback);
    } else if (method == WsdMethod::Mfs) {
      p = predict_mfs(r.lemma, r.pos, word_index, inventory, fallback);
    } else {
      p = predict_word_knn(r.vector, r.lemma, r.pos, word_index, inventory, knn);
    }
    p.instance_id = r.instance_id;
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions(std::ostream& out, std::span<const Prediction> predictions) {
  for (const auto& p : predictions) {
    if (p.sense_id) out << p.instance_id << ' ' << *p.sense_id << '\n';
  }
}

void write_report_header(std::ostream& out) { out << "method\tdataset\tP\tR\tF1\n"; }

void write_report_rows(std::ostream& out, const std::string& method, const EvalReport& report) {
  const auto row = [&](const std::string& dataset, const Scores& s) {
    out << method << '\t' << dataset << std::fixed << std::setprecision(6) << '\t' << s.precision << '\t'
        << s.recall << '\t' << s.f1 << '\n';
    out << std::defaultfloat;
  };
  row("all", report.overall);
  for (const auto& [name, s] : report.per_dataset) {
    if (name != "all") row(name, s);
  }
}

}  // namespace swt
