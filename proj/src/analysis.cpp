#include "dyad/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "dyad/errors.hpp"
#include "dyad/experiments.hpp"

namespace dyad {

std::optional<double> cosine_distance(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_distance: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  const double cos = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
  return 1.0 - cos;
}

SectionPairResult section_pair_stats(const DyadGraph& g, const SectionVectors& sections,
                                     const SectionPairOptions& options) {
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<double>> samples[2];
  SectionPairResult result;
  for (const Dyad& e : g.edges()) {
    const auto su = sections.find(e.u);
    const auto sv = sections.find(e.v);
    if (su == sections.end() || sv == sections.end()) continue;
    const int rel = e.label == Label::kAllies ? 1 : 0;
    for (const auto& [ta, va] : su->second) {
      for (const auto& [tb, vb] : sv->second) {
        const auto d = cosine_distance(va, vb);
        if (!d) {
          ++result.skipped_zero;
          continue;
        }
        ++result.samples;
        samples[rel][ta <= tb ? Key{ta, tb} : Key{tb, ta}].push_back(*d);
        (rel == 1 ? result.ally_distances : result.enemy_distances).push_back(*d);
      }
    }
  }

  auto make_stat = [](const Key& k, Label rel, const std::vector<double>& xs) {
    SectionPairStat s;
    s.title_a = k.first;
    s.title_b = k.second;
    s.relation = rel;
    s.co_occurrence_count = xs.size();
    s.mean_distance = mean_of(xs);
    s.sd_distance = sample_sd(xs);
    return s;
  };
  auto by_count = [](const std::pair<Key, std::size_t>& a, const std::pair<Key, std::size_t>& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };

  if (options.pooled) {
    std::map<Key, std::size_t> totals;
    for (const auto& m : samples) {
      for (const auto& [k, xs] : m) totals[k] += xs.size();
    }
    std::vector<std::pair<Key, std::size_t>> ranked(totals.begin(), totals.end());
    std::sort(ranked.begin(), ranked.end(), by_count);
    if (ranked.size() > options.top_n) ranked.resize(options.top_n);
    for (const auto& [k, n] : ranked) {
      for (int rel : {1, 0}) {
        const auto it = samples[rel].find(k);
        if (it != samples[rel].end()) {
          result.stats.push_back(make_stat(k, rel == 1 ? Label::kAllies : Label::kEnemies, it->second));
        }
      }
    }
    return result;
  }
  for (int rel : {1, 0}) {
    std::vector<std::pair<Key, std::size_t>> ranked;
    for (const auto& [k, xs] : samples[rel]) ranked.emplace_back(k, xs.size());
    std::sort(ranked.begin(), ranked.end(), by_count);
    if (ranked.size() > options.top_n) ranked.resize(options.top_n);
    for (const auto& [k, n] : ranked) {
      result.stats.push_back(
          make_stat(k, rel == 1 ? Label::kAllies : Label::kEnemies, samples[rel].at(k)));
    }
  }
  return result;
}

TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ValidationError("welch_t_test needs at least two samples per group");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = std::pow(sample_sd(a), 2);
  const double vb = std::pow(sample_sd(b), 2);
  const double se2 = va / na + vb / nb;
  TTestResult r;
  if (se2 == 0.0) {
    r.df = na + nb - 2.0;
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma > mb ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 /
         ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p = std::min(1.0, r.p);
  return r;
}

PcaResult pca_top2(const std::vector<std::pair<std::string, FeatureVector>>& vectors) {
  if (vectors.size() < 3) throw ValidationError("pca_top2 needs at least 3 vectors");
  const std::size_t n = vectors.size();
  const std::size_t d = vectors.front().second.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    if (vectors[i].second.size() != d) throw ShapeError("pca_top2: vectors differ in length");
    for (std::size_t j = 0; j < d; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vectors[i].second[j];
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank < 2) {
    throw ValidationError("pca_top2: data rank " + std::to_string(rank) + " is below 2");
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("pca_top2: eigendecomposition failed");
  const auto& values = eig.eigenvalues();  // ascending
  const auto& vecs = eig.eigenvectors();
  PcaResult r;
  const Eigen::Index last = static_cast<Eigen::Index>(d) - 1;
  std::vector<double>* comps[2] = {&r.component1, &r.component2};
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v = vecs.col(last - c);
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < v.size(); ++j) {
      if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
    }
    if (v(arg) < 0) v = -v;
    comps[c]->assign(v.data(), v.data() + v.size());
  }
  r.explained_variance = {std::max(0.0, values(last)), std::max(0.0, values(last - 1))};
  for (std::size_t i = 0; i < n; ++i) {
    double px = 0.0, py = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double cj = centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      px += cj * r.component1[j];
      py += cj * r.component2[j];
    }
    r.points.push_back({vectors[i].first, px, py});
  }
  return r;
}

std::vector<SectionPairStat> export_plot_data(const std::vector<SectionPairStat>& stats,
                                              std::size_t k) {
  std::vector<SectionPairStat> out;
  for (Label rel : {Label::kAllies, Label::kEnemies}) {
    std::vector<SectionPairStat> part;
    for (const auto& s : stats) {
      if (s.relation == rel) part.push_back(s);
    }
    std::sort(part.begin(), part.end(), [](const SectionPairStat& a, const SectionPairStat& b) {
      if (a.mean_distance != b.mean_distance) return a.mean_distance < b.mean_distance;
      return std::tie(a.title_a, a.title_b) < std::tie(b.title_a, b.title_b);
    });
    if (part.size() > k) part.resize(k);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace dyad
