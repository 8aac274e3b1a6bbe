#include "dyad/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "dyad/errors.hpp"
#include "dyad/rng.hpp"

namespace dyad {

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * fractions[i];
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rem[a] > rem[b] + 1e-9; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

SplitSpec split_edges(const DyadGraph& g, const std::array<double, 3>& fractions,
                      std::uint64_t seed) {
  const std::size_t n = g.edge_count();
  if (n < 10) {
    throw ValidationError("cannot split " + std::to_string(n) + " edges; at least 10 are needed");
  }
  const auto sizes = split_sizes(n, fractions);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5b117));
  rng.shuffle(std::span<std::size_t>(order));
  SplitSpec s;
  s.fractions = fractions;
  s.seed = seed;
  const auto a = order.begin();
  s.train.assign(a, a + static_cast<std::ptrdiff_t>(sizes[0]));
  s.validation.assign(a + static_cast<std::ptrdiff_t>(sizes[0]),
                      a + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  s.test.assign(a + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::string split_to_json(const SplitSpec& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["fractions"] = s.fractions;
  j["train"] = s.train;
  j["validation"] = s.validation;
  j["test"] = s.test;
  return j.dump();
}

SplitSpec split_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SplitSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.fractions = j.at("fractions").get<std::array<double, 3>>();
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.validation = j.at("validation").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  return s;
}

namespace {

double class_f1(std::span<const Label> p, std::span<const Label> y, Label positive,
                std::size_t* support) {
  std::size_t tp = 0, fp = 0, fn = 0, sup = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pp = p[i] == positive;
    const bool yy = y[i] == positive;
    tp += pp && yy;
    fp += pp && !yy;
    fn += !pp && yy;
    sup += yy;
  }
  if (support != nullptr) *support = sup;
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

}  // namespace

double f1_score(std::span<const Label> predictions, std::span<const Label> gold,
                F1Average average) {
  if (predictions.size() != gold.size()) throw ShapeError("f1_score: length mismatch");
  if (predictions.empty()) throw ValidationError("f1_score: no examples");
  std::size_t sa = 0;
  std::size_t se = 0;
  const double fa = class_f1(predictions, gold, Label::kAllies, &sa);
  if (average == F1Average::kBinary) return fa;
  const double fe = class_f1(predictions, gold, Label::kEnemies, &se);
  if (average == F1Average::kMacro) return 0.5 * (fa + fe);
  return (fa * static_cast<double>(sa) + fe * static_cast<double>(se)) /
         static_cast<double>(sa + se);
}

bool EarlyStopping::update(double score, int epoch) {
  if (score > best_) {
    best_ = score;
    best_epoch_ = epoch;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

Label to_label(double probability, double threshold) {
  return probability >= threshold ? Label::kAllies : Label::kEnemies;
}

namespace {

std::vector<Label> gold_of(const DyadGraph& g, std::span<const std::size_t> edges) {
  std::vector<Label> out;
  out.reserve(edges.size());
  for (std::size_t e : edges) out.push_back(g.edge(e).label);
  return out;
}

std::vector<Label> predict_labels(Model& model, const DyadGraph& g, const GraphFeatures& f,
                                  const LabelExposure& exposure,
                                  std::span<const std::size_t> edges) {
  std::vector<Label> out;
  for (double p : model.predict_proba(g, f, exposure, edges)) {
    out.push_back(to_label(p, model.config().threshold));
  }
  return out;
}

std::vector<Matrix> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Matrix> out;
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

}  // namespace

TrainReport train(const ModelConfig& config, const DyadGraph& g, const GraphFeatures& f,
                  const SplitSpec& split, const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.variant = config.variant;
  report.seed = config.seed;
  if (split.train.empty() || split.validation.empty() || split.test.empty()) {
    throw ValidationError("train, validation and test sets must be non-empty");
  }

  std::vector<Label> test_gold = gold_of(g, split.test);
  if (options.test_gold) {
    if (options.test_gold->size() != g.edge_count()) {
      throw ShapeError("test_gold must hold one label per edge");
    }
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      test_gold[i] = (*options.test_gold)[split.test[i]];
    }
  }
  report.test_ally_fraction =
      static_cast<double>(std::count(test_gold.begin(), test_gold.end(), Label::kAllies)) /
      static_cast<double>(test_gold.size());
  const std::vector<Label> val_gold = gold_of(g, split.validation);

  Model model(config, f.node.cols(), f.edge.cols());
  if (config.variant == Variant::kMaj) {
    const std::vector<Label> val_pred(val_gold.size(), predict_majority());
    report.test_predictions.assign(test_gold.size(), predict_majority());
    report.validation_f1 = f1_score(val_pred, val_gold, options.average);
    report.test_f1 = f1_score(report.test_predictions, test_gold, options.average);
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
  }
  model.check_inputs(g, f);

  LabelExposure exposure = expose_labels(g, split.train);
  if (options.shuffle_exposed_labels) {
    std::vector<int> values;
    for (std::size_t e : split.train) values.push_back(exposure[e]);
    Rng shuffle_rng(mix_seed(config.seed, 0x5f1e));
    shuffle_rng.shuffle(std::span<int>(values));
    for (std::size_t i = 0; i < split.train.size(); ++i) exposure[split.train[i]] = values[i];
  }

  auto params = model.parameters();
  Adam adam(params, options.adam);
  Rng rng(mix_seed(config.seed, 0xba7c));
  EarlyStopping stopper(options.patience);
  std::vector<Matrix> best = snapshot(params);
  std::vector<std::size_t> order = split.train;
  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);

  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch_size) {
      const std::span<const std::size_t> batch(order.data() + b,
                                               std::min(batch_size, order.size() - b));
      std::vector<double> y;
      y.reserve(batch.size());
      for (std::size_t e : batch) y.push_back(g.edge(e).label == Label::kAllies ? 1.0 : 0.0);
      Tape tape;
      const Tape::Var z = model.logits(tape, g, f, exposure, batch);
      const Tape::Var loss = tape.sigmoid_bce(z, std::move(y));
      const double value = tape.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      loss_sum += value * static_cast<double>(batch.size());
      adam.zero_grad();
      tape.backward(loss);
      adam.step();
    }
    const auto val_pred = predict_labels(model, g, f, exposure, split.validation);
    const double val_f1 = f1_score(val_pred, val_gold, options.average);
    report.curve.push_back({epoch, loss_sum / static_cast<double>(order.size()), val_f1});
    report.stopped_epoch = epoch;
    if (stopper.update(val_f1, epoch)) best = snapshot(params);
    if (stopper.should_stop()) break;
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  report.best_epoch = stopper.best_epoch();
  report.validation_f1 = stopper.best_score();
  report.train_f1 = f1_score(predict_labels(model, g, f, exposure, split.train),
                             gold_of(g, split.train), options.average);
  report.test_predictions = predict_labels(model, g, f, exposure, split.test);
  report.test_f1 = f1_score(report.test_predictions, test_gold, options.average);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

AggregateResult run_repeated(const ModelConfig& config, const DyadGraph& g, const GraphFeatures& f,
                             const RepeatOptions& options) {
  if (options.n_runs < 2) throw ConfigError("run_repeated needs at least 2 runs");
  AggregateResult result;
  result.variant = config.variant;
  const auto n = static_cast<std::size_t>(options.n_runs);
  result.reports.resize(n);
  result.splits.resize(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    const std::uint64_t seed = options.base_seed + i;
    ModelConfig run_config = config;
    run_config.seed = seed;
    result.splits[i] = split_edges(g, options.fractions, seed);
    result.reports[i] = train(run_config, g, f, result.splits[i], options.train);
  });
  for (const auto& r : result.reports) result.f1.push_back(r.test_f1);
  result.mean = mean_of(result.f1);
  result.sd = sample_sd(result.f1);
  return result;
}

double permutation_test(std::span<const Label> preds_a, std::span<const Label> preds_b,
                        std::span<const Label> gold, int n_resamples, std::uint64_t seed) {
  if (preds_a.size() != gold.size() || preds_b.size() != gold.size()) {
    throw ShapeError("permutation_test: length mismatch");
  }
  if (n_resamples < 1) throw ConfigError("permutation_test needs at least one resample");
  const double observed = std::abs(f1_score(preds_a, gold) - f1_score(preds_b, gold));
  constexpr double kTol = 1e-12;

  // Only positions where a and b disagree change the statistic.
  std::vector<std::size_t> differ;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (preds_a[i] != preds_b[i]) differ.push_back(i);
  }
  if (differ.empty()) return 1.0;
  std::vector<Label> a(preds_a.begin(), preds_a.end());
  std::vector<Label> b(preds_b.begin(), preds_b.end());
  auto stat = [&] { return std::abs(f1_score(a, gold) - f1_score(b, gold)); };
  auto reset = [&] {
    std::copy(preds_a.begin(), preds_a.end(), a.begin());
    std::copy(preds_b.begin(), preds_b.end(), b.begin());
  };

  const std::size_t m = differ.size();
  if (m < 63 && (std::uint64_t{1} << m) <= static_cast<std::uint64_t>(n_resamples)) {
    const std::uint64_t patterns = std::uint64_t{1} << m;
    std::uint64_t count = 0;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      reset();
      for (std::size_t k = 0; k < m; ++k) {
        if ((mask >> k) & 1U) std::swap(a[differ[k]], b[differ[k]]);
      }
      count += stat() >= observed - kTol;
    }
    return static_cast<double>(count) / static_cast<double>(patterns);
  }

  Rng rng(mix_seed(seed, 0x9e7));
  std::uint64_t count = 0;
  for (int r = 0; r < n_resamples; ++r) {
    reset();
    // One coin per test edge, so a resample's pattern does not depend on
    // which edges happen to disagree.
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (rng.bernoulli(0.5)) std::swap(a[i], b[i]);
    }
    count += stat() >= observed - kTol;
  }
  return static_cast<double>(1 + count) / static_cast<double>(1 + n_resamples);
}

std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> out;
  for (std::size_t n : {32, 64, 128}) {
    for (std::size_t e : {32, 64, 128}) {
      for (std::size_t c : {32, 64, 128}) out.push_back({n, e, c});
    }
  }
  return out;
}

ModelConfig apply_grid_point(const ModelConfig& base, const GridPoint& p) {
  ModelConfig c = base;
  auto set_last = [](std::vector<std::size_t>& dims, std::size_t w) {
    if (dims.empty()) {
      dims.push_back(w);
    } else {
      dims.back() = w;
    }
  };
  set_last(c.node_encoder_dims, p.node_dim);
  set_last(c.edge_encoder_dims, p.edge_dim);
  set_last(c.classifier_dims, p.classifier_dim);
  return c;
}

GridResult grid_search(const std::vector<GridPoint>& grid, const ModelConfig& base,
                       const DyadGraph& g, const GraphFeatures& f, const RepeatOptions& options) {
  if (grid.empty()) throw ConfigError("grid_search: empty grid");
  GridResult result;
  std::optional<std::size_t> best;
  for (const GridPoint& p : grid) {
    const ModelConfig cfg = apply_grid_point(base, p);
    std::size_t params = 0;
    try {
      params = Model(cfg, f.node.cols(), f.edge.cols()).parameter_count();
    } catch (const ConfigError&) {
      result.skipped.push_back(p);
      continue;
    }
    RepeatOptions ro = options;
    ro.n_runs = 3;
    const AggregateResult runs = run_repeated(cfg, g, f, ro);
    std::vector<double> val;
    for (const auto& r : runs.reports) val.push_back(r.validation_f1);
    result.evaluated.push_back({p, mean_of(val), params});
    const GridEntry& e = result.evaluated.back();
    if (!best) {
      best = result.evaluated.size() - 1;
      continue;
    }
    const GridEntry& b = result.evaluated[*best];
    const bool better =
        e.mean_validation_f1 > b.mean_validation_f1 ||
        (e.mean_validation_f1 == b.mean_validation_f1 &&
         (e.parameter_count < b.parameter_count ||
          (e.parameter_count == b.parameter_count && e.point < b.point)));
    if (better) best = result.evaluated.size() - 1;
  }
  if (!best) throw ConfigError("grid_search: every grid point was invalid");
  result.best = result.evaluated[*best].point;
  result.best_config = apply_grid_point(base, result.best);
  return result;
}

}  // namespace dyad
