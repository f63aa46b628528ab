#include "swt/masker.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "swt/error.hpp"
#include "swt/file_util.hpp"

namespace swt {

using json = nlohmann::json;

namespace {

std::string format_value(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void count_zeros(ThresholdMask& m) {
  m.n_masked = static_cast<std::size_t>(std::count(m.bits.begin(), m.bits.end(), 0));
}

}  // namespace

MaskRule MaskRule::parse(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw Error("mask rule must look like p=0.05 or tau=0.5: " + text);
  const auto key = text.substr(0, eq);
  double value;
  try {
    std::size_t used = 0;
    value = std::stod(text.substr(eq + 1), &used);
    if (used != text.size() - eq - 1) throw Error("trailing characters");
  } catch (const std::exception&) {
    throw Error("bad mask rule value: " + text);
  }
  if (key == "p") {
    if (!(value >= 0.0 && value <= 1.0)) throw Error("percentile must be in [0, 1]: " + text);
    return percentile(value);
  }
  if (key == "tau") return absolute(value);
  throw Error("unknown mask rule: " + text);
}

std::string MaskRule::to_string() const {
  return (kind == Kind::Percentile ? "p=" : "tau=") + format_value(value);
}

std::vector<std::size_t> ThresholdMask::zero_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < bits.size(); ++d) {
    if (!bits[d]) out.push_back(d);
  }
  return out;
}

ThresholdMask percentile_mask(std::span<const double> w, double p, std::string sense_id) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("percentile must be in [0, 1]");
  const std::size_t dim = w.size();
  const auto count = std::min(dim, floor_fraction(p, dim));
  std::vector<std::size_t> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] < w[b]; });
  ThresholdMask m{std::move(sense_id), std::vector<std::uint8_t>(dim, 1), MaskRule::percentile(p), 0};
  for (std::size_t i = 0; i < count; ++i) m.bits[order[i]] = 0;
  m.n_masked = count;
  return m;
}

ThresholdMask absolute_mask(std::span<const double> w, double tau, std::string sense_id) {
  ThresholdMask m{std::move(sense_id), std::vector<std::uint8_t>(w.size(), 1), MaskRule::absolute(tau), 0};
  for (std::size_t d = 0; d < w.size(); ++d) {
    if (w[d] < tau) m.bits[d] = 0;
  }
  count_zeros(m);
  return m;
}

ThresholdMask derive_mask(std::span<const double> w, const MaskRule& rule, std::string sense_id) {
  return rule.kind == MaskRule::Kind::Percentile ? percentile_mask(w, rule.value, std::move(sense_id))
                                                 : absolute_mask(w, rule.value, std::move(sense_id));
}

ThresholdMask complement(const ThresholdMask& mask) {
  ThresholdMask m = mask;
  for (auto& b : m.bits) b = b ? 0 : 1;
  count_zeros(m);
  return m;
}

Vector apply_mask(std::span<const float> v, std::span<const std::uint8_t> bits) {
  if (v.size() != bits.size()) throw Error("apply_mask: length mismatch");
  Vector out(v.size());
  for (std::size_t d = 0; d < v.size(); ++d) out[d] = bits[d] ? v[d] : 0.0f;
  return out;
}

MaskStore build_masks(const WeightStore& weights, const MaskRule& rule) {
  MaskStore out;
  for (const auto& [sense, state] : weights) out.emplace(sense, derive_mask(state.w, rule, sense));
  return out;
}

void write_masks(std::ostream& out, const MaskStore& masks) {
  for (const auto& [sense, m] : masks) {
    json j{{"sense", sense}, {"rule", m.rule.to_string()}, {"dim", m.dim()}, {"bits_zero", m.zero_indices()}};
    out << j.dump() << '\n';
  }
}

MaskStore read_masks(std::istream& in) {
  MaskStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      ThresholdMask m;
      m.sense_id = j.at("sense").get<std::string>();
      m.rule = MaskRule::parse(j.at("rule").get<std::string>());
      m.bits.assign(j.at("dim").get<std::size_t>(), 1);
      for (auto z : j.at("bits_zero").get<std::vector<std::size_t>>()) {
        if (z >= m.bits.size()) throw Error("zero index out of range");
        m.bits[z] = 0;
      }
      count_zeros(m);
      const auto sense = m.sense_id;
      if (!store.emplace(sense, std::move(m)).second) throw Error("duplicate sense '" + sense + "'");
    } catch (const json::exception& e) {
      throw Error("masks line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("masks line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

MaskStore load_masks(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_masks(in);
}

std::vector<std::string> attested_senses(const std::string& lemma, const std::string& pos,
                                         const LemmaOccurrenceIndex& neighbors,
                                         const SenseInventory* inventory) {
  std::set<std::string> seen;
  if (const auto* occ = neighbors.find(lemma, pos)) {
    for (const auto& o : *occ) seen.insert(o.sense_id);
  }
  std::vector<std::string> out;
  if (inventory) {
    if (const auto* listed = inventory->find(lemma, pos)) {
      for (const auto& s : *listed) {
        if (seen.erase(s)) out.push_back(s);
      }
    }
  }
  out.insert(out.end(), seen.begin(), seen.end());
  return out;
}

MaskSelection select_mask_for_token(std::span<const float> query, const std::string& lemma,
                                    const std::string& pos, const std::vector<std::string>& candidate_senses,
                                    const MaskStore& masks, const LemmaOccurrenceIndex& neighbors,
                                    std::size_t k, const SenseInventory* inventory) {
  MaskSelection sel;
  const auto* occ = neighbors.find(lemma, pos);
  if (!occ || occ->empty()) return sel;

  // Order candidates by inventory position, then id, so strict < keeps the first on ties.
  std::vector<std::string> ordered = candidate_senses;
  const auto* listed = inventory ? inventory->find(lemma, pos) : nullptr;
  const auto rank = [&](const std::string& s) {
    if (!listed) return std::numeric_limits<std::size_t>::max();
    const auto it = std::find(listed->begin(), listed->end(), s);
    return it == listed->end() ? std::numeric_limits<std::size_t>::max()
                               : static_cast<std::size_t>(it - listed->begin());
  };
  std::stable_sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
    const auto ra = rank(a), rb = rank(b);
    return ra != rb ? ra < rb : a < b;
  });
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

  const std::size_t kk = std::min(k, occ->size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& sense : ordered) {
    const auto m = masks.find(sense);
    if (m == masks.end()) continue;
    const auto q = apply_mask(query, m->second.bits);
    double d;
    if (std::all_of(q.begin(), q.end(), [](float x) { return x == 0.0f; })) {
      d = std::numeric_limits<double>::infinity();
      ++sel.zero_query_warnings;
    } else {
      std::vector<double> dist;
      dist.reserve(occ->size());
      for (const auto& o : *occ) dist.push_back(cosine_distance(q, apply_mask(o.vector, m->second.bits)));
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
      d = std::accumulate(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), 0.0);
    }
    sel.per_sense.emplace_back(sense, d);
    if (!sel.chosen_sense || d < best) {
      sel.chosen_sense = sense;
      best = d;
    }
  }
  sel.d = sel.chosen_sense ? best : 0.0;
  return sel;
}

MaskedWsdResult run_masked_wsd(const EmbeddingSet& train, const EmbeddingSet& test,
                               const SenseInventory& inventory, const MaskStore& masks) {
  if (train.dim != test.dim) throw Error("train and test dimensions differ");
  for (const auto& [sense, m] : masks) {
    if (m.dim() != train.dim) throw Error("mask for '" + sense + "' has wrong dimension");
  }
  const auto index = build_word_index(train);
  const KnnConfig knn;  // word rule, fallback on

  MaskedWsdResult out;
  std::size_t used_masks = 0;
  std::size_t masked_dims = 0;
  for (const auto& r : test.records) {
    auto original = predict_word_knn(r.vector, r.lemma, r.pos, index, inventory, knn);
    original.instance_id = r.instance_id;

    const auto candidates = attested_senses(r.lemma, r.pos, index, &inventory);
    const auto k = effective_k(knn, index.count(r.lemma, r.pos));
    auto sel = select_mask_for_token(r.vector, r.lemma, r.pos, candidates, masks, index, k, &inventory);
    sel.instance_id = r.instance_id;

    Prediction masked = original;
    Prediction chosen = original;
    if (sel.chosen_sense && std::isfinite(sel.d)) {
      const auto& m = masks.at(*sel.chosen_sense);
      masked = predict_word_knn(r.vector, r.lemma, r.pos, index, inventory, knn,
                                std::span<const std::uint8_t>(m.bits));
      masked.instance_id = r.instance_id;
      chosen.sense_id = sel.chosen_sense;
      chosen.source = PredictionSource::Knn;
      ++used_masks;
      masked_dims += m.n_masked;
    }
    out.original.push_back(std::move(original));
    out.masked.push_back(std::move(masked));
    out.selected_sense.push_back(std::move(chosen));
    out.selections.push_back(std::move(sel));
  }
  out.mean_n_masked = used_masks ? static_cast<double>(masked_dims) / static_cast<double>(used_masks) : 0.0;
  return out;
}

}  // namespace swt
