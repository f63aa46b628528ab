#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "swt/analysis.hpp"
#include "swt/error.hpp"
#include "swt/random.hpp"
#include "swt/synth.hpp"
#include "swt/trainer.hpp"
#include "test_support.hpp"

using namespace swt;

TEST_CASE("generate_synthetic counts") {
  SynthConfig c;
  c.n_groups = 10;
  c.group_size = 50;
  const auto corpus = generate_synthetic(c);
  CHECK(corpus.train.records.size() == 500);
  CHECK(corpus.train.dim == 64);
  CHECK(corpus.test.records.empty());
  CHECK(corpus.truth.signal_dims.size() == 10);
  for (const auto& [sense, dims] : corpus.truth.signal_dims) {
    CHECK(dims.size() == 32);
    CHECK(std::is_sorted(dims.begin(), dims.end()));
    CHECK(corpus.taxonomy.has_node(sense));
  }
  const auto groups = group_by_sense(corpus.train);
  CHECK(groups.size() == 10);
  for (const auto& g : groups) CHECK(g.size() == 50);

  // every sense appears under exactly one lemma, and lemmas span 2-4 senses
  std::set<std::string> covered;
  for (const auto& [key, senses] : corpus.inventory.entries) {
    CHECK(senses.size() >= 2);
    CHECK(senses.size() <= 4);
    for (const auto& s : senses) CHECK(covered.insert(s).second);
  }
  CHECK(covered.size() == 10);
}

TEST_CASE("generate_synthetic test split") {
  SynthConfig c;
  c.n_groups = 6;
  c.group_size = 20;
  c.test_fraction = 0.25;
  const auto corpus = generate_synthetic(c);
  CHECK(corpus.train.records.size() == 6 * 15);
  CHECK(corpus.test.records.size() == 6 * 5);
  CHECK(corpus.gold.size() == 30);
  for (const auto& r : corpus.test.records) {
    CHECK_FALSE(r.sense_id);
    CHECK(corpus.gold.count(r.instance_id) == 1);
    CHECK(r.instance_id.find('.') != std::string::npos);
  }
}

TEST_CASE("generate_synthetic with sigma = 0 gives identical members") {
  SynthConfig c;
  c.n_groups = 5;
  c.group_size = 10;
  c.noise_sigma = 0.0;
  const auto corpus = generate_synthetic(c);
  for (const auto& g : group_by_sense(corpus.train)) {
    const auto v = g.vectors();
    for (const auto& x : v) CHECK(x == v.front());
    CHECK(pairwise_similarity(v, Objective::Mean).value == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("generate_synthetic is deterministic in the seed") {
  SynthConfig c;
  c.n_groups = 4;
  c.group_size = 30;
  c.taxonomy_aligned = true;
  const auto a = generate_synthetic(c);
  const auto b = generate_synthetic(c);
  REQUIRE(a.train.records.size() == b.train.records.size());
  for (std::size_t i = 0; i < a.train.records.size(); ++i) {
    CHECK(a.train.records[i].instance_id == b.train.records[i].instance_id);
    CHECK(a.train.records[i].vector == b.train.records[i].vector);
  }
  CHECK(a.truth.signal_dims == b.truth.signal_dims);
  c.seed = 2;
  CHECK(generate_synthetic(c).train.records[0].vector != a.train.records[0].vector);
}

TEST_CASE("aligned taxonomy: closer senses share more signal dims") {
  SynthConfig c;
  c.n_groups = 16;
  c.group_size = 4;
  c.taxonomy_aligned = true;
  c.taxonomy_depth = 3;
  c.signal_dims = 30;
  const auto corpus = generate_synthetic(c);
  const auto shared = [&](const std::string& a, const std::string& b) {
    const auto& x = corpus.truth.signal_dims.at(a);
    const auto& y = corpus.truth.signal_dims.at(b);
    std::vector<std::size_t> common;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
    return common.size();
  };
  // mean shared dims rises with path similarity
  std::map<double, std::pair<double, int>> by_similarity;
  std::vector<std::string> senses;
  for (const auto& [s, _] : corpus.truth.signal_dims) senses.push_back(s);
  for (std::size_t i = 0; i < senses.size(); ++i) {
    for (std::size_t j = i + 1; j < senses.size(); ++j) {
      const double sim = path_similarity(corpus.taxonomy, senses[i], senses[j]);
      REQUIRE(sim > 0.0);
      auto& [sum, count] = by_similarity[sim];
      sum += static_cast<double>(shared(senses[i], senses[j]));
      ++count;
    }
  }
  CHECK(by_similarity.size() >= 2);
  double prev = -1.0;
  for (const auto& [_, acc] : by_similarity) {
    const double mean = acc.first / acc.second;
    CHECK(mean > prev);
    prev = mean;
  }
}

TEST_CASE("generate_synthetic rejects infeasible configs") {
  SynthConfig c;
  c.signal_dims = 65;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
  c = SynthConfig{};
  c.group_size = 1;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
  c = SynthConfig{};
  c.noise_sigma = -1;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
  c = SynthConfig{};
  c.test_fraction = 1.0;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
}

TEST_CASE("recovery_score") {
  const std::vector<std::size_t> signal = {0, 1, 2, 3};
  std::vector<double> indicator(8, 0.0), inverted(8, 1.0);
  for (auto d : signal) {
    indicator[d] = 1.0;
    inverted[d] = 0.0;
  }
  for (double p : {0.125, 0.25, 0.5}) {
    CHECK(recovery_score(indicator, signal, p) == 1.0);
    CHECK(recovery_score(inverted, signal, p) == 0.0);
  }
  CHECK(recovery_score(indicator, signal, 0.0) == 1.0);
  CHECK(recovery_score(indicator, signal, 0.75) == doctest::Approx(4.0 / 6.0));

  Rng rng(40);
  const std::size_t dim = 64;
  std::vector<std::size_t> half(32);
  for (std::size_t i = 0; i < 32; ++i) half[i] = 2 * i;
  double total = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> w(dim);
    for (auto& x : w) x = uniform01(rng);
    total += recovery_score(w, half, 0.2);
  }
  CHECK(std::abs(total / 100 - 0.5) < 0.1);
}

TEST_CASE("write_synthetic and truth round trip") {
  SynthConfig c;
  c.n_groups = 4;
  c.group_size = 10;
  c.test_fraction = 0.2;
  const auto corpus = generate_synthetic(c);
  const auto dir = test::temp_dir("synth_out");
  write_synthetic(dir, corpus);
  for (const char* f : {"train.jsonl", "test.jsonl", "gold.key", "inventory.tsv", "taxonomy.tsv", "truth.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(load_embeddings(dir / "train.jsonl").records.size() == 32);
  CHECK(load_gold(dir / "gold.key") == corpus.gold);
  CHECK(load_taxonomy(dir / "taxonomy.tsv").node_count() == corpus.taxonomy.node_count());

  std::stringstream ss;
  write_truth(ss, corpus.truth);
  CHECK(read_truth(ss).signal_dims == corpus.truth.signal_dims);

  const auto packed_dir = test::temp_dir("synth_packed");
  write_synthetic(packed_dir, corpus, EmbeddingFormat::Packed);
  CHECK(load_embeddings(packed_dir / "train.swte").records.size() == 32);
}
