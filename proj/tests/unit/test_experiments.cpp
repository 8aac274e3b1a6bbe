#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "dyad/errors.hpp"
#include "dyad/experiments.hpp"
#include "dyad/rng.hpp"
#include "dyad/synthetic.hpp"

using namespace dyad;

namespace {

DyadGraph chain_graph(std::size_t edges) {
  std::vector<LabeledPair> pairs;
  for (std::size_t i = 0; i < edges; ++i) {
    pairs.push_back({"n" + std::to_string(i), "n" + std::to_string(i + 1),
                     i % 3 == 0 ? Label::kEnemies : Label::kAllies, "c"});
  }
  return aggregate(pairs);
}

std::vector<Label> labels(const std::string& s) {
  std::vector<Label> out;
  for (char c : s) out.push_back(c == 'A' ? Label::kAllies : Label::kEnemies);
  return out;
}

// 20 edges on 8 nodes: allies iff both endpoints share a parity, which the
// first node feature encodes as a sign.
struct Separable {
  DyadGraph g;
  GraphFeatures f;
};

Separable separable_fixture() {
  Rng rng(17);
  std::vector<LabeledPair> pairs;
  std::size_t count = 0;
  for (std::size_t i = 0; i < 8 && count < 20; ++i) {
    for (std::size_t j = i + 1; j < 8 && count < 20; ++j, ++count) {
      pairs.push_back({"n" + std::to_string(i), "n" + std::to_string(j),
                       i % 2 == j % 2 ? Label::kAllies : Label::kEnemies, "c"});
    }
  }
  Separable s{aggregate(pairs), {}};
  s.f.node = Matrix(s.g.node_count(), 3);
  for (std::size_t n = 0; n < s.g.node_count(); ++n) {
    s.f.node(n, 0) = n % 2 ? 1.0 : -1.0;
    s.f.node(n, 1) = 0.1 * rng.normal();
    s.f.node(n, 2) = 0.1 * rng.normal();
  }
  s.f.edge = Matrix(s.g.edge_count(), 3);
  for (double& x : s.f.edge.data()) x = 0.1 * rng.normal();
  return s;
}

ModelConfig small_config(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.node_encoder_dims = {8};
  c.edge_encoder_dims = {8};
  c.classifier_dims = {8};
  c.gin_hidden_dims = {8};
  return c;
}

// Exhaustive swap-pattern oracle, written independently of the library.
double exact_p(const std::vector<Label>& a, const std::vector<Label>& b, const std::vector<Label>& y) {
  const double observed = std::abs(f1_score(a, y) - f1_score(b, y));
  const std::size_t n = y.size();
  int hits = 0;
  for (unsigned mask = 0; mask < (1U << n); ++mask) {
    std::vector<Label> x = a, z = b;
    for (std::size_t i = 0; i < n; ++i) {
      if ((mask >> i) & 1U) std::swap(x[i], z[i]);
    }
    hits += std::abs(f1_score(x, y) - f1_score(z, y)) >= observed - 1e-12;
  }
  return static_cast<double>(hits) / static_cast<double>(1U << n);
}

}  // namespace

TEST_CASE("split sizes") {
  CHECK(split_sizes(10, {0.6, 0.3, 0.1}) == std::array<std::size_t, 3>{6, 3, 1});
  CHECK(split_sizes(26536, {0.6, 0.3, 0.1}) == std::array<std::size_t, 3>{15922, 7961, 2653});
  for (std::size_t n = 10; n < 200; ++n) {
    const auto s = split_sizes(n, {0.6, 0.3, 0.1});
    CHECK(s[0] + s[1] + s[2] == n);
  }
  CHECK_THROWS_AS(split_sizes(10, {0.5, 0.3, 0.1}), ConfigError);
}

TEST_CASE("split_edges partitions deterministically") {
  const DyadGraph g = chain_graph(37);
  const SplitSpec a = split_edges(g, {0.6, 0.3, 0.1}, 5);
  CHECK(a == split_edges(g, {0.6, 0.3, 0.1}, 5));
  CHECK_FALSE(a.train == split_edges(g, {0.6, 0.3, 0.1}, 6).train);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.validation.begin(), a.validation.end());
  all.insert(a.test.begin(), a.test.end());
  CHECK(all.size() == 37);
  CHECK(a.train.size() + a.validation.size() + a.test.size() == 37);
  CHECK(split_from_json(split_to_json(a)) == a);

  CHECK_THROWS_AS(split_edges(chain_graph(9), {0.6, 0.3, 0.1}, 0), ValidationError);
  const SplitSpec ten = split_edges(chain_graph(10), {0.6, 0.3, 0.1}, 0);
  CHECK(ten.test.size() == 1);
}

TEST_CASE("binary f1") {
  // TP=4, FP=1, FN=3, TN=2.
  const auto y = labels("AAAAAAAEEE");
  const auto p = labels("AAAAEEEAEE");
  const double prec = 0.8, rec = 4.0 / 7.0;
  CHECK(f1_score(p, y) == doctest::Approx(2 * prec * rec / (prec + rec)).epsilon(1e-14));
  CHECK(f1_score(p, y) == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(f1_score(y, y) == 1.0);
  CHECK(f1_score(labels("EEEE"), labels("AEAE")) == 0.0);
  CHECK_THROWS_AS(f1_score(labels("A"), labels("AA")), ShapeError);
}

TEST_CASE("f1 averaging modes") {
  const auto y = labels("AAAAAAAEEE");
  const auto p = labels("AAAAEEEAEE");
  const double fa = 8.0 / 12.0;  // 2*4 / (8 + 1 + 3)
  const double fe = 4.0 / 8.0;   // 2*2 / (4 + 3 + 1)
  CHECK(f1_score(p, y, F1Average::kMacro) == doctest::Approx((fa + fe) / 2));
  CHECK(f1_score(p, y, F1Average::kWeighted) == doctest::Approx((7 * fa + 3 * fe) / 10));
}

TEST_CASE("f1 is invariant to example order") {
  Rng rng(3);
  std::vector<Label> p, y;
  for (int i = 0; i < 60; ++i) {
    p.push_back(rng.bernoulli(0.5) ? Label::kAllies : Label::kEnemies);
    y.push_back(rng.bernoulli(0.6) ? Label::kAllies : Label::kEnemies);
  }
  const double base = f1_score(p, y, F1Average::kWeighted);
  std::vector<std::size_t> order(60);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<Label> p2, y2;
  for (std::size_t i : order) {
    p2.push_back(p[i]);
    y2.push_back(y[i]);
  }
  CHECK(f1_score(p2, y2, F1Average::kWeighted) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("early stopping traces the patience rule") {
  EarlyStopping es(3);
  const std::vector<double> seq{0.6, 0.7, 0.7, 0.7, 0.7};
  int stopped = 0;
  for (int e = 1; e <= 30; ++e) {
    es.update(seq[static_cast<std::size_t>(e - 1)], e);
    if (es.should_stop()) {
      stopped = e;
      break;
    }
  }
  CHECK(stopped == 5);
  CHECK(es.best_epoch() == 2);
  CHECK(es.best_score() == 0.7);

  EarlyStopping up(3);
  for (int e = 1; e <= 30; ++e) {
    CHECK(up.update(0.01 * e, e));
    CHECK_FALSE(up.should_stop());
  }
  CHECK(up.best_epoch() == 30);
}

TEST_CASE("mean and sample sd") {
  const std::vector<double> xs{0.9, 0.8};
  CHECK(mean_of(xs) == doctest::Approx(0.85));
  CHECK(sample_sd(xs) == doctest::Approx(std::sqrt(0.005)));
  CHECK(sample_sd(xs) == doctest::Approx(0.0707).epsilon(1e-3));
  const std::vector<double> flat(5, 0.7);
  CHECK(sample_sd(flat) == 0.0);
}

TEST_CASE("majority baseline closed form") {
  std::vector<Label> y;
  for (int i = 0; i < 100; ++i) y.push_back(i < 48 ? Label::kAllies : Label::kEnemies);
  const std::vector<Label> maj(100, predict_majority());
  CHECK(f1_score(maj, y) == doctest::Approx(2 * 0.48 / 1.48).epsilon(1e-14));
  CHECK(f1_score(maj, y) == doctest::Approx(0.6486).epsilon(1e-4));

  BalanceOptions bo;
  bo.nodes = 60;
  const SyntheticGraph sg = make_balance_benchmark(bo);
  RepeatOptions ro;
  ro.n_runs = 5;
  const AggregateResult r = run_repeated(small_config(Variant::kMaj), sg.graph, sg.features, ro);
  REQUIRE(r.f1.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    std::size_t allies = 0;
    for (std::size_t e : r.splits[i].test) allies += sg.graph.edge(e).label == Label::kAllies;
    const double p = static_cast<double>(allies) / static_cast<double>(r.splits[i].test.size());
    CHECK(std::abs(r.f1[i] - 2 * p / (1 + p)) < 1e-12);
    CHECK(r.reports[i].test_ally_fraction == doctest::Approx(p));
  }
  CHECK(r.sd > 0.0);

  ro.n_runs = 1;
  CHECK_THROWS_AS(run_repeated(small_config(Variant::kMaj), sg.graph, sg.features, ro), ConfigError);
}

TEST_CASE("permutation test") {
  const auto y = labels("AAEEAEAAEA");
  const auto a = labels("AEEAAEAEEA");
  CHECK(permutation_test(a, a, y, 10000, 1) == 1.0);

  const auto y4 = labels("AAEA");
  const auto a4 = labels("AAEE");
  const auto b4 = labels("EAAE");
  CHECK(permutation_test(a4, b4, y4, 10000, 1) == doctest::Approx(exact_p(a4, b4, y4)).epsilon(1e-15));
  const auto c4 = labels("EEAA");
  CHECK(permutation_test(a4, c4, y4, 10000, 1) == doctest::Approx(exact_p(a4, c4, y4)).epsilon(1e-15));

  Rng rng(8);
  std::vector<Label> gold, pa, pb;
  for (int i = 0; i < 200; ++i) {
    gold.push_back(rng.bernoulli(0.55) ? Label::kAllies : Label::kEnemies);
    pa.push_back(rng.bernoulli(0.8) ? gold.back() : (gold.back() == Label::kAllies ? Label::kEnemies : Label::kAllies));
    pb.push_back(rng.bernoulli(0.6) ? gold.back() : (gold.back() == Label::kAllies ? Label::kEnemies : Label::kAllies));
  }
  const int n = 2000;
  const double p = permutation_test(pa, pb, gold, n, 4);
  CHECK(p >= 1.0 / (1 + n));
  CHECK(p <= 1.0);
  CHECK(p == permutation_test(pa, pb, gold, n, 4));
  CHECK(p < 0.01);
}

TEST_CASE("permutation p does not grow with the observed disparity") {
  // a is right and b wrong on the first k edges; elsewhere they agree.
  // Exact regime first, then the sampled regime (2^k > n_resamples).
  std::vector<Label> gold(60, Label::kAllies);
  for (std::size_t i = 30; i < 60; ++i) gold[i] = Label::kEnemies;
  auto p_for = [&](std::size_t k, int n) {
    std::vector<Label> a = gold, b = gold;
    for (std::size_t i = 0; i < k; ++i) b[i] = Label::kEnemies;
    return permutation_test(a, b, gold, n, 11);
  };
  double previous = 1.0;
  for (std::size_t k = 1; k <= 13; ++k) {
    const double p = p_for(k, 10000);
    CHECK(p <= previous);
    previous = p;
  }
  previous = 1.0;
  for (std::size_t k = 10; k <= 30; ++k) {
    const double p = p_for(k, 1000);
    CHECK(p <= previous);
    CHECK(p >= 1.0 / 1001);
    previous = p;
  }
}

TEST_CASE("training a separable toy graph") {
  const Separable s = separable_fixture();
  REQUIRE(s.g.edge_count() == 20);
  const SplitSpec split = split_edges(s.g, {0.6, 0.3, 0.1}, 2);
  TrainOptions opt;
  opt.patience = 30;
  opt.adam.lr = 0.01;
  ModelConfig cfg = small_config(Variant::kD);
  cfg.seed = 2;
  const TrainReport r = train(cfg, s.g, s.f, split, opt);
  REQUIRE(r.curve.size() == 30);
  CHECK(r.stopped_epoch == 30);
  for (std::size_t e = 1; e < 5; ++e) CHECK(r.curve[e].train_loss < r.curve[e - 1].train_loss);
  CHECK(r.train_f1 == 1.0);
  CHECK(r.test_predictions.size() == split.test.size());
}

TEST_CASE("training stops early and restores the best epoch") {
  const Separable s = separable_fixture();
  const SplitSpec split = split_edges(s.g, {0.6, 0.3, 0.1}, 2);
  TrainOptions opt;
  opt.adam.lr = 0.05;
  ModelConfig cfg = small_config(Variant::kD);
  const TrainReport r = train(cfg, s.g, s.f, split, opt);
  CHECK(r.stopped_epoch <= 30);
  CHECK(r.stopped_epoch == static_cast<int>(r.curve.size()));
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& e : r.curve) {
    if (e.validation_f1 > best) {
      best = e.validation_f1;
      best_epoch = e.epoch;
    }
  }
  CHECK(r.best_epoch == best_epoch);
  CHECK(r.validation_f1 == best);
  if (r.stopped_epoch < 30) CHECK(r.stopped_epoch - r.best_epoch == 3);
}

TEST_CASE("test labels never influence training") {
  const Separable s = separable_fixture();
  const SplitSpec split = split_edges(s.g, {0.6, 0.3, 0.1}, 4);
  DyadGraph flipped = s.g;
  for (std::size_t e : split.test) {
    const Label l = flipped.edge(e).label == Label::kAllies ? Label::kEnemies : Label::kAllies;
    flipped = flipped.with_label(e, l);
  }
  for (Variant v : {Variant::kD, Variant::kS, Variant::kC}) {
    ModelConfig cfg = small_config(v);
    TrainOptions opt;
    opt.max_epochs = 4;
    const TrainReport a = train(cfg, s.g, s.f, split, opt);
    const TrainReport b = train(cfg, flipped, s.f, split, opt);
    CHECK(a.test_predictions == b.test_predictions);
    CHECK(a.validation_f1 == b.validation_f1);
  }
}

TEST_CASE("grid search") {
  const Separable s = separable_fixture();
  RepeatOptions ro;
  ro.train.max_epochs = 2;
  const ModelConfig base = small_config(Variant::kD);

  const GridResult one = grid_search({{8, 8, 8}}, base, s.g, s.f, ro);
  CHECK(one.best == GridPoint{8, 8, 8});
  CHECK(one.best_config.classifier_dims.back() == 8);

  // An always-ALLIES threshold makes every point tie; the smallest wins.
  ModelConfig tied = base;
  tied.threshold = 0.0;
  const GridResult tie = grid_search({{16, 16, 16}, {4, 4, 8}, {4, 8, 4}, {4, 4, 4}}, tied, s.g, s.f, ro);
  CHECK(tie.best == GridPoint{4, 4, 4});
  CHECK(tie.skipped == std::vector<GridPoint>{{4, 8, 4}});

  const GridResult many = grid_search({{4, 4, 4}, {8, 8, 8}, {16, 16, 16}}, base, s.g, s.f, ro);
  double top = -1.0;
  for (const auto& e : many.evaluated) top = std::max(top, e.mean_validation_f1);
  for (const auto& e : many.evaluated) {
    if (e.point == many.best) CHECK(e.mean_validation_f1 == top);
  }

  CHECK(default_grid().size() == 27);
  CHECK_THROWS_AS(grid_search({}, base, s.g, s.f, ro), ConfigError);
}
