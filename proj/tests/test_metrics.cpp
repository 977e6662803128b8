#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "autoseries/metrics.hpp"
#include "autoseries/rng.hpp"

using namespace autoseries;

namespace {

// O(n^2) pairwise-comparison oracle with half credit for ties
double auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

// direct-definition oracle from the contingency table
double nmi_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> j;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    j[{a[i], b[i]}] += 1;
  }
  double ha = 0, hb = 0, mi = 0;
  for (auto& [k, c] : ca) ha -= c / n * std::log(c / n);
  for (auto& [k, c] : cb) hb -= c / n * std::log(c / n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  for (auto& [cell, c] : j) {
    mi += c / n * std::log((c / n) / ((ca[cell.first] / n) * (cb[cell.second] / n)));
  }
  return mi / std::sqrt(ha * hb);
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(metrics::auc({1, 2, 3, 4}, {0, 0, 1, 1}) == 1.0);
  CHECK(metrics::auc({5, 5, 5, 5}, {0, 1, 0, 1}) == 0.5);
  CHECK(metrics::auc({1, 2, 3, 4}, {1, 1, 0, 0}) == 0.0);
  CHECK_THROWS_AS(metrics::auc({1, 2}, {1, 1}), Error);
  CHECK_THROWS_AS(metrics::auc({1, 2}, {0, 2}), DomainError);
}

TEST_CASE("auc matches the O(n^2) oracle on random instances") {
  Rng rng(101);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = static_cast<int>(rng.uniform_int(4, 50));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      // quantized scores force plenty of ties
      scores[i] = std::floor(rng.uniform(0, 6)) / 2.0;
      labels[i] = rng.bernoulli(0.4) ? 1 : 0;
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    CHECK(std::abs(metrics::auc(scores, labels) - auc_oracle(scores, labels)) <= 1e-12);
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  Rng rng(103);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = static_cast<int>(rng.uniform_int(4, 40));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = rng.uniform(-3, 3);
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    std::vector<double> transformed(n);
    for (int i = 0; i < n; ++i) transformed[i] = std::exp(2.0 * scores[i]) + 1.0;
    CHECK(metrics::auc(scores, labels) == metrics::auc(transformed, labels));
  }
}

TEST_CASE("nmi examples") {
  CHECK(metrics::nmi({0, 0, 1, 1, 2}, {0, 0, 1, 1, 2}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(metrics::nmi({1, 1, 1}, {0, 1, 2}) == 0.0);
  CHECK(metrics::nmi({4, 4, 4}, {7, 7, 7}) == 1.0);
}

TEST_CASE("nmi is symmetric and label-permutation invariant") {
  Rng rng(107);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = static_cast<int>(rng.uniform_int(2, 30));
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.uniform_int(0, 3));
      b[i] = static_cast<int>(rng.uniform_int(0, 3));
    }
    CHECK(metrics::nmi(a, b) == doctest::Approx(metrics::nmi(b, a)).epsilon(1e-12));
    // relabel a through a fixed permutation
    std::vector<int> perm = {2, 3, 0, 1};
    std::vector<int> ap(n);
    for (int i = 0; i < n; ++i) ap[i] = perm[a[i]];
    CHECK(metrics::nmi(a, b) == doctest::Approx(metrics::nmi(ap, b)).epsilon(1e-12));
  }
}

TEST_CASE("nmi matches the direct-definition oracle on random instances") {
  Rng rng(109);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = static_cast<int>(rng.uniform_int(1, 30));
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.uniform_int(0, 4));
      b[i] = static_cast<int>(rng.uniform_int(0, 2));
    }
    CHECK(std::abs(metrics::nmi(a, b) - nmi_oracle(a, b)) <= 1e-12);
  }
}

TEST_CASE("assign_clusters separates two latent blobs") {
  Rng rng(113);
  std::vector<std::vector<double>> latents;
  std::vector<int> truth;
  for (int i = 0; i < 40; ++i) {
    latents.push_back({-4.0 + 0.1 * rng.normal(), -4.0 + 0.1 * rng.normal()});
    truth.push_back(0);
    latents.push_back({4.0 + 0.1 * rng.normal(), 4.0 + 0.1 * rng.normal()});
    truth.push_back(1);
  }
  const std::vector<int> labels = metrics::assign_clusters(latents, 2, 7);
  CHECK(metrics::nmi(labels, truth) == doctest::Approx(1.0).epsilon(1e-12));
  SUBCASE("deterministic under seed") {
    CHECK(metrics::assign_clusters(latents, 2, 7) == labels);
  }
  SUBCASE("label range") {
    for (const int l : labels) {
      CHECK(l >= 0);
      CHECK(l < 2);
    }
  }
  SUBCASE("n_clusters < 2 rejected") {
    CHECK_THROWS_AS(metrics::assign_clusters(latents, 1, 7), DomainError);
  }
}
