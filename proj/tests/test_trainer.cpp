#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "swt/error.hpp"
#include "swt/trainer.hpp"
#include "test_support.hpp"

using namespace swt;

namespace {

// Members = 1.0 on dims [0, signal) plus N(0, sigma^2) noise on every dim.
std::vector<Vector> planted_group(std::size_t n, std::size_t dim, std::size_t signal, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> out(n, Vector(dim));
  for (auto& v : out) {
    for (std::size_t d = 0; d < dim; ++d) v[d] = static_cast<float>((d < signal ? 1.0 : 0.0) + sigma * standard_normal(rng));
  }
  return out;
}

// Direct masked similarity on copies, the way the objective is defined.
double masked_similarity_oracle(std::vector<Vector> vectors, const StepMask& mask, Objective objective) {
  for (auto& v : vectors) {
    for (auto z : mask.zero_positions) v[z] = 0.0f;
  }
  return pairwise_similarity(vectors, objective).value;
}

WeightState blank_state(std::vector<double> w, double s_pre, double l1, double lr, SignConvention sign) {
  WeightState s;
  s.sense_id = "x";
  s.w = std::move(w);
  s.gti.assign(s.w.size(), 0.0);
  s.s_pre = s_pre;
  s.config.l1 = l1;
  s.config.learning_rate = lr;
  s.config.epsilon = 1e-8;
  s.config.sign = sign;
  return s;
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(group_seed(0, "a") == fnv1a64("a"));
}

TEST_CASE("pairwise_similarity examples") {
  const std::vector<Vector> v = {{1, 0}, {0, 1}, {1, 1}};
  CHECK(pairwise_similarity(v, Objective::Sum).value == doctest::Approx(1.414213562373095).epsilon(1e-12));
  CHECK(pairwise_similarity(v, Objective::Mean).value == doctest::Approx(0.4714045207910316).epsilon(1e-12));

  const std::vector<Vector> same = {{2, 1, 3}, {2, 1, 3}, {2, 1, 3}};
  CHECK(pairwise_similarity(same, Objective::Mean).value == doctest::Approx(1.0));

  const std::vector<Vector> with_zero = {{1, 0}, {0, 0}};
  const auto r = pairwise_similarity(with_zero, Objective::Sum);
  CHECK(r.value == 0.0);
  CHECK(r.zero_pairs == 1);

  const std::vector<Vector> one = {{1, 0}};
  CHECK_THROWS_WITH_AS(pairwise_similarity(one, Objective::Sum), doctest::Contains("degenerate"), Error);
}

TEST_CASE("pairwise_similarity: mean is sum over the pair count") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto n = 2 + seed % 9;
    const auto v = planted_group(n, 5, 2, 1.0, seed);
    const double pairs = static_cast<double>(n * (n - 1) / 2);
    CHECK(pairwise_similarity(v, Objective::Mean).value == pairwise_similarity(v, Objective::Sum).value / pairs);
  }
}

TEST_CASE("GroupSimilarity agrees with masking copies") {
  Rng rng(3);
  const auto v = planted_group(12, 10, 4, 0.7, 5);
  const GroupSimilarity fast(v);
  for (int trial = 0; trial < 50; ++trial) {
    const auto mask = generate_mask_uniform(10, 1 + uniform_index(rng, 9), rng);
    for (auto obj : {Objective::Sum, Objective::Mean}) {
      CHECK(fast.evaluate(mask, obj).value == doctest::Approx(masked_similarity_oracle(v, mask, obj)).epsilon(1e-9));
    }
  }
  // A vector whose whole support is masked counts as zero.
  const std::vector<Vector> sparse = {{1, 0, 0}, {0, 1, 1}, {1, 1, 0}};
  const GroupSimilarity g(sparse);
  const auto r = g.evaluate(StepMask::from_zeros(3, {0}), Objective::Sum);
  CHECK(r.zero_pairs == 2);
  CHECK(r.value == doctest::Approx(masked_similarity_oracle(sparse, StepMask::from_zeros(3, {0}), Objective::Sum)));
}

TEST_CASE("generate_mask_uniform") {
  Rng rng(11);
  const auto m = generate_mask_uniform(10, 3, rng);
  CHECK(m.zero_positions.size() == 3);
  CHECK(std::count(m.bits.begin(), m.bits.end(), 0) == 3);
  CHECK(std::is_sorted(m.zero_positions.begin(), m.zero_positions.end()));

  const auto all = generate_mask_uniform(5, 5, rng);
  CHECK(std::count(all.bits.begin(), all.bits.end(), 0) == 5);

  Rng a(42), b(42);
  CHECK(generate_mask_uniform(64, 7, a).zero_positions == generate_mask_uniform(64, 7, b).zero_positions);

  CHECK_THROWS_AS(generate_mask_uniform(3, 4, rng), Error);
}

TEST_CASE("generate_mask_uniform covers dims evenly") {
  Rng rng(5);
  std::vector<int> hits(8, 0);
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) {
    for (auto z : generate_mask_uniform(8, 2, rng).zero_positions) ++hits[z];
  }
  // Expected 10000 per dim, binomial sd about 87.
  for (int h : hits) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("generate_mask_policy") {
  SUBCASE("alpha = 1 behaves like uniform sampling") {
    Rng rng(8);
    const std::vector<double> w = {5.0, 0.0, 0.0, 0.0};
    std::vector<int> hits(4, 0);
    for (int i = 0; i < 40000; ++i) ++hits[generate_mask_policy(w, 1, 1.0, rng).zero_positions[0]];
    for (int h : hits) CHECK(std::abs(h - 10000) < 500);
  }
  SUBCASE("high weight is selected least often") {
    Rng rng(9);
    const std::vector<double> w = {1, 0, 0, 0, 0};
    std::vector<int> hits(5, 0);
    for (int i = 0; i < 100000; ++i) ++hits[generate_mask_policy(w, 1, 0.0, rng).zero_positions[0]];
    for (int d = 1; d < 5; ++d) CHECK(hits[0] < hits[d]);
  }
  SUBCASE("N = D selects every dim") {
    Rng rng(10);
    const std::vector<double> w = {0.3, -2.0, 7.0};
    const auto m = generate_mask_policy(w, 3, 0.0, rng);
    CHECK(m.zero_positions == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("selection probability follows max(w) - w + delta") {
    Rng rng(12);
    const std::vector<double> w = {1.0, 0.5, 0.0};  // weights 1e-6, 0.5, 1.0
    std::vector<int> hits(3, 0);
    const int draws = 60000;
    for (int i = 0; i < draws; ++i) ++hits[generate_mask_policy(w, 1, 0.0, rng).zero_positions[0]];
    CHECK(hits[1] == doctest::Approx(draws / 3.0).epsilon(0.03));
    CHECK(hits[2] == doctest::Approx(2.0 * draws / 3.0).epsilon(0.03));
  }
}

TEST_CASE("sgd_step examples") {
  const auto mask = StepMask::from_zeros(2, {0});  // bits (0, 1)
  SUBCASE("corrected sign") {
    const auto s = sgd_step(blank_state({0.5, 0.5}, 0.9, 0.0, 0.1, SignConvention::Corrected), mask, 0.7);
    CHECK(s.gti[0] == doctest::Approx(0.04));
    CHECK(s.gti[1] == 0.0);
    CHECK(s.w[0] == doctest::Approx(0.5999999950000002).epsilon(1e-12));
    CHECK(s.w[1] == 0.5);
    CHECK(s.epochs_run == 1);
  }
  SUBCASE("literal sign flips the move") {
    const auto s = sgd_step(blank_state({0.5, 0.5}, 0.9, 0.0, 0.1, SignConvention::Literal), mask, 0.7);
    CHECK(s.gti[0] == doctest::Approx(0.04));
    CHECK(s.w[0] == doctest::Approx(0.4000000049999997).epsilon(1e-12));
    CHECK(s.w[1] == 0.5);
  }
  SUBCASE("all-ones mask leaves only the l1 term") {
    const auto ones = StepMask::from_zeros(2, {});
    const auto s = sgd_step(blank_state({0.5, -0.3}, 0.9, 1e-4, 0.1, SignConvention::Corrected), ones, 0.2);
    // grad = (-1e-4, 1e-4), so gti = 1e-8 each
    CHECK(s.gti[0] == doctest::Approx(1e-8));
    CHECK(s.gti[1] == doctest::Approx(1e-8));
    CHECK(s.w[0] < 0.5);
    CHECK(s.w[1] > -0.3);
  }
  SUBCASE("sign(0) = 0") {
    const auto ones = StepMask::from_zeros(1, {});
    const auto s = sgd_step(blank_state({0.0}, 0.0, 1.0, 0.1, SignConvention::Corrected), ones, 0.0);
    CHECK(s.w[0] == 0.0);
    CHECK(s.gti[0] == 0.0);
  }
  SUBCASE("literal update divides the whole weight") {
    auto st = blank_state({0.5, 0.5}, 0.9, 0.0, 0.1, SignConvention::Corrected);
    st.config.update = UpdateRule::Literal;
    st.gti = {0.0, 0.96};
    const auto s = sgd_step(st, mask, 0.7);
    CHECK(s.w[0] == doctest::Approx((0.5 + 0.1 * 0.2) / (1e-8 + 0.2)));
    CHECK(s.w[1] == doctest::Approx(0.5 / (1e-8 + std::sqrt(0.96))));
  }
  SUBCASE("non-finite input is rejected") {
    CHECK_THROWS_AS(sgd_step(blank_state({0.5, 0.5}, 0.9, 0.0, 0.1, SignConvention::Corrected), mask,
                             std::numeric_limits<double>::quiet_NaN()),
                    Error);
  }
}

TEST_CASE("train_group invariants") {
  const auto set = test::single_group_set(planted_group(20, 16, 6, 0.5, 21));
  const auto group = group_by_sense(set).front();
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.explore_epochs = 50;
  cfg.seed = 7;

  SUBCASE("step masks have N zeros and gti never decreases") {
    std::vector<double> prev(16, 0.0);
    int epochs = 0;
    bool masks_ok = true, gti_ok = true;
    train_group(group, cfg, nullptr, [&](const WeightState& s, const StepMask& m, double) {
      masks_ok = masks_ok && m.zero_positions.size() == cfg.mask_count(16) &&
                 std::count(m.bits.begin(), m.bits.end(), 0) == static_cast<long>(cfg.mask_count(16));
      for (std::size_t d = 0; d < 16; ++d) gti_ok = gti_ok && s.gti[d] >= prev[d] && s.gti[d] >= 0.0;
      prev = s.gti;
      ++epochs;
    });
    CHECK(masks_ok);
    CHECK(gti_ok);
    CHECK(epochs == 200);
  }
  SUBCASE("with l1 = 0 unmasked dims do not move") {
    cfg.l1 = 0.0;
    std::vector<double> prev(16, cfg.init_weight);
    bool ok = true;
    train_group(group, cfg, nullptr, [&](const WeightState& s, const StepMask& m, double) {
      for (std::size_t d = 0; d < 16; ++d) {
        if (m.bits[d]) ok = ok && s.w[d] == prev[d];
      }
      prev = s.w;
    });
    CHECK(ok);
  }
  SUBCASE("same seed gives bit-identical state") {
    const auto a = train_group(group, cfg);
    const auto b = train_group(group, cfg);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->w == b->w);
    CHECK(a->gti == b->gti);
    cfg.seed = 8;
    CHECK(train_group(group, cfg)->w != a->w);
  }
  SUBCASE("s_pre is the unmasked objective") {
    const auto s = train_group(group, cfg);
    CHECK(s->s_pre == doctest::Approx(pairwise_similarity(group.vectors(), Objective::Sum).value).epsilon(1e-12));
    CHECK(s->epochs_run == 200);
  }
}

TEST_CASE("train_group on a planted group ranks signal above noise") {
  const auto set = test::single_group_set(planted_group(60, 32, 16, 0.5, 4));
  const auto state = train_group(group_by_sense(set).front(), TrainConfig{});
  REQUIRE(state);
  double signal = 0.0, noise = 0.0;
  for (std::size_t d = 0; d < 32; ++d) (d < 16 ? signal : noise) += state->w[d];
  CHECK(signal / 16 > noise / 16);
}

TEST_CASE("noise-free group: masking pure-noise dims leaves similarity unchanged") {
  const auto set = test::single_group_set(planted_group(5, 12, 4, 0.0, 1));
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.explore_epochs = 100;
  int noise_only = 0;
  bool ok = true;
  train_group(group_by_sense(set).front(), cfg, nullptr, [&](const WeightState& s, const StepMask& m, double s_cur) {
    if (std::all_of(m.zero_positions.begin(), m.zero_positions.end(), [](std::size_t z) { return z >= 4; })) {
      ++noise_only;
      ok = ok && s_cur == s.s_pre;
    }
  });
  CHECK(noise_only > 0);
  CHECK(ok);
}

TEST_CASE("train_group skips tiny groups") {
  const auto set = test::single_group_set({{1, 2, 3}});
  std::vector<Diagnostic> diags;
  CHECK_FALSE(train_group(group_by_sense(set).front(), TrainConfig{}, &diags));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].sense_id == "g");
}

TEST_CASE("train_all") {
  EmbeddingSet set;
  set.dim = 8;
  Rng rng(2);
  const auto add = [&](const std::string& sense, int n) {
    for (int i = 0; i < n; ++i) {
      Vector v(8);
      for (auto& x : v) x = static_cast<float>(standard_normal(rng));
      set.records.push_back(test::record(sense + std::to_string(i), "w", sense, v));
    }
  };
  add("a", 6);
  add("b", 1);
  add("c", 9);
  const auto groups = group_by_sense(set);
  TrainConfig cfg;
  cfg.epochs = 120;
  cfg.seed = 99;

  const auto serial = train_all(groups, cfg, 1);
  CHECK(serial.weights.size() == 2);
  REQUIRE(serial.diagnostics.size() == 1);
  CHECK(serial.diagnostics[0].sense_id == "b");

  for (unsigned threads : {2u, 3u, 8u}) {
    const auto parallel = train_all(groups, cfg, threads);
    REQUIRE(parallel.weights.size() == 2);
    for (const auto& [sense, s] : serial.weights) {
      CHECK(parallel.weights.at(sense).w == s.w);
      CHECK(parallel.weights.at(sense).gti == s.gti);
    }
  }
  // Per-group seeding makes a group's result independent of its neighbours.
  const std::vector<SenseGroup> only_c = {groups[2]};
  CHECK(train_all(only_c, cfg).weights.at("c").w == serial.weights.at("c").w);

  CHECK(train_all({}, cfg).weights.empty());
}

TEST_CASE("TrainConfig validation and mask count") {
  TrainConfig c;
  CHECK(c.mask_count(64) == 3);
  CHECK(c.mask_count(10) == 1);
  c.mask_fraction = 1.0;
  CHECK(c.mask_count(7) == 7);
  c.explore_epochs = c.epochs + 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.mask_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("weights.jsonl round trip") {
  const auto set = test::single_group_set(planted_group(8, 6, 3, 0.3, 2), "bank%1");
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.explore_epochs = 10;
  cfg.seed = 0xFFFFFFFFFFFFFFFFULL;
  cfg.sign = SignConvention::Literal;
  const auto result = train_all(group_by_sense(set), cfg);
  std::stringstream ss;
  write_weights(ss, result.weights);
  const auto text = ss.str();
  CHECK(text.find("\"sense\":\"bank%1\"") != std::string::npos);
  const auto back = read_weights(ss);
  const auto& a = result.weights.at("bank%1");
  const auto& b = back.at("bank%1");
  CHECK(a.w == b.w);
  CHECK(a.gti == b.gti);
  CHECK(b.epochs_run == 30);
  CHECK(b.config.seed == cfg.seed);
  CHECK(b.config.sign == SignConvention::Literal);
  std::stringstream again;
  write_weights(again, back);
  CHECK(again.str() == text);
}
