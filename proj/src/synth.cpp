#include "swt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

#include "swt/error.hpp"
#include "swt/file_util.hpp"
#include "swt/masker.hpp"
#include "swt/random.hpp"

namespace swt {

using json = nlohmann::json;

namespace {

std::vector<std::size_t> sample_dims(std::size_t dim, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(dim);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + uniform_index(rng, dim - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string zero_pad(std::size_t value, std::size_t width) {
  auto s = std::to_string(value);
  return s.size() < width ? std::string(width - s.size(), '0') + s : s;
}

std::size_t digits(std::size_t n) { return std::to_string(n == 0 ? 0 : n - 1).size(); }

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_groups < 2) throw Error("synth: need at least 2 groups");
  if (group_size < 2) throw Error("synth: group_size must be >= 2");
  if (dim == 0) throw Error("synth: dim must be positive");
  if (signal_dims > dim) throw Error("synth: signal_dims exceeds dim");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw Error("synth: test_fraction must be in [0, 1)");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error("synth: noise_sigma must be >= 0");
  if (!std::isfinite(signal_strength)) throw Error("synth: signal_strength must be finite");
  if (taxonomy_depth < 1) throw Error("synth: taxonomy_depth must be >= 1");
  const auto n_test = floor_fraction(test_fraction, group_size);
  if (n_test >= group_size) throw Error("synth: test split leaves no labeled members");
  if (noise_sigma == 0.0 && (signal_dims == 0 || signal_strength == 0.0)) {
    throw Error("synth: configuration produces zero vectors");
  }
  if (taxonomy_aligned && signal_dims < taxonomy_depth) {
    throw Error("synth: aligned taxonomy needs signal_dims >= taxonomy_depth");
  }
}

SynthCorpus generate_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  SynthCorpus out;
  const std::size_t n = config.n_groups;
  const std::size_t depth = config.taxonomy_depth;

  // Lemma partition: chunks of 2-4 consecutive senses, never leaving a single one.
  std::vector<std::size_t> lemma_of(n);
  std::vector<std::size_t> chunk_sizes;
  for (std::size_t start = 0; start < n;) {
    const std::size_t remaining = n - start;
    std::size_t take = remaining;
    if (remaining > 4) {
      take = 2 + uniform_index(rng, 3);
      if (remaining - take == 1) take = take < 4 ? take + 1 : take - 1;
    }
    for (std::size_t i = 0; i < take; ++i) lemma_of[start + i] = chunk_sizes.size();
    chunk_sizes.push_back(take);
    start += take;
  }
  std::vector<std::string> sense_ids(n);
  std::vector<std::string> lemmas(chunk_sizes.size());
  {
    const auto width = digits(chunk_sizes.size());
    std::vector<std::size_t> within(chunk_sizes.size(), 0);
    for (std::size_t l = 0; l < lemmas.size(); ++l) lemmas[l] = "w" + zero_pad(l, width);
    for (std::size_t s = 0; s < n; ++s) {
      const auto l = lemma_of[s];
      sense_ids[s] = lemmas[l] + "%" + std::to_string(++within[l]);
      out.inventory.entries[{lemmas[l], config.pos}].push_back(sense_ids[s]);
    }
  }

  // Balanced taxonomy: root "t0_0", internal levels 1..depth-1, senses as leaves.
  std::size_t branching = 2;
  while (ipow(branching, depth) < n) ++branching;
  const auto node_name = [&](std::size_t level, std::size_t leaf) {
    if (level == depth) return sense_ids[leaf];
    return "t" + std::to_string(level) + "_" + std::to_string(leaf / ipow(branching, depth - level));
  };
  std::vector<std::vector<std::string>> paths(n);  // non-root ancestors, top-down, ending in the sense
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t level = 1; level <= depth; ++level) {
      out.taxonomy.add_edge(node_name(level - 1, s), node_name(level, s));
      paths[s].push_back(node_name(level, s));
    }
  }

  // Signal dims.
  if (config.taxonomy_aligned) {
    const std::size_t per_level = config.signal_dims / depth;
    std::map<std::string, std::vector<std::size_t>> node_dims;
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t level = 0; level < depth; ++level) {
        const auto& node = paths[s][level];
        if (node_dims.count(node)) continue;
        const auto count = level + 1 == depth ? config.signal_dims - per_level * (depth - 1) : per_level;
        node_dims[node] = sample_dims(config.dim, count, rng);
      }
      std::set<std::size_t> dims;
      for (const auto& node : paths[s]) dims.insert(node_dims[node].begin(), node_dims[node].end());
      out.truth.signal_dims[sense_ids[s]] = {dims.begin(), dims.end()};
    }
  } else {
    for (std::size_t s = 0; s < n; ++s) out.truth.signal_dims[sense_ids[s]] = sample_dims(config.dim, config.signal_dims, rng);
  }

  // Members.
  const auto n_test = floor_fraction(config.test_fraction, config.group_size);
  const std::string model = "synth-d" + std::to_string(config.dim) + "-s" + std::to_string(config.seed);
  out.train.dim = out.test.dim = config.dim;
  out.train.model_id = out.test.model_id = model;
  const auto sense_width = digits(n);
  const auto member_width = digits(config.group_size);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& signal = out.truth.signal_dims[sense_ids[s]];
    for (std::size_t m = 0; m < config.group_size; ++m) {
      EmbeddingRecord r;
      r.instance_id = "synth.g" + zero_pad(s, sense_width) + ".m" + zero_pad(m, member_width);
      r.lemma = lemmas[lemma_of[s]];
      r.pos = config.pos;
      r.vector.assign(config.dim, 0.0f);
      for (auto d : signal) r.vector[d] = static_cast<float>(config.signal_strength);
      if (config.noise_sigma > 0.0) {
        for (auto& x : r.vector) x = static_cast<float>(x + config.noise_sigma * standard_normal(rng));
      }
      if (m + n_test >= config.group_size) {
        out.gold.emplace(r.instance_id, sense_ids[s]);
        out.test.records.push_back(std::move(r));
      } else {
        r.sense_id = sense_ids[s];
        out.train.records.push_back(std::move(r));
      }
    }
  }
  return out;
}

double recovery_score(std::span<const double> w, std::span<const std::size_t> signal_dims, double p) {
  const auto mask = percentile_mask(w, p);
  if (mask.n_masked == 0) return 1.0;
  const std::set<std::size_t> signal(signal_dims.begin(), signal_dims.end());
  std::size_t noise = 0;
  for (auto d : mask.zero_indices()) noise += signal.count(d) ? 0 : 1;
  return static_cast<double>(noise) / static_cast<double>(mask.n_masked);
}

void write_truth(std::ostream& out, const PlantedTruth& truth) {
  json arr = json::array();
  for (const auto& [sense, dims] : truth.signal_dims) arr.push_back({{"sense", sense}, {"signal_dims", dims}});
  out << arr.dump() << '\n';
}

PlantedTruth read_truth(std::istream& in) {
  PlantedTruth truth;
  try {
    const auto arr = json::parse(in);
    for (const auto& e : arr) {
      truth.signal_dims[e.at("sense").get<std::string>()] = e.at("signal_dims").get<std::vector<std::size_t>>();
    }
  } catch (const json::exception& e) {
    throw Error(std::string("truth file: ") + e.what());
  }
  return truth;
}

void write_synthetic(const std::filesystem::path& dir, const SynthCorpus& corpus, EmbeddingFormat format) {
  std::filesystem::create_directories(dir);
  const bool packed = format == EmbeddingFormat::Packed;
  const std::string ext = packed ? ".swte" : ".jsonl";
  write_embeddings(dir / ("train" + ext), corpus.train, format);
  if (!corpus.test.records.empty()) {
    write_embeddings(dir / ("test" + ext), corpus.test, format);
    write_atomically(dir / "gold.key", [&](std::ostream& o) { write_gold(o, corpus.gold); });
  }
  write_atomically(dir / "inventory.tsv", [&](std::ostream& o) { write_inventory(o, corpus.inventory); });
  write_atomically(dir / "taxonomy.tsv", [&](std::ostream& o) { write_taxonomy(o, corpus.taxonomy); });
  write_atomically(dir / "truth.json", [&](std::ostream& o) { write_truth(o, corpus.truth); });
}

}  // namespace swt
