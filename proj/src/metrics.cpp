#include "autoseries/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "autoseries/gmm.hpp"

namespace autoseries::metrics {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels lengths differ");
  std::size_t n_pos = 0, n_neg = 0;
  for (const int l : labels) {
    if (l == 1) {
      ++n_pos;
    } else if (l == 0) {
      ++n_neg;
    } else {
      throw DomainError("auc: labels must be 0 or 1");
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw Error("auc: undefined with a single class present");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] == 1) rank_sum_pos += rank[k];
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw ShapeError("nmi: label vectors must have equal non-zero length");
  }
  const double n = static_cast<double>(pred.size());
  std::map<int, double> cp, ct;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cp[pred[i]] += 1.0;
    ct[truth[i]] += 1.0;
    joint[{pred[i], truth[i]}] += 1.0;
  }
  double hp = 0.0, ht = 0.0;
  for (const auto& [_, c] : cp) hp -= (c / n) * std::log(c / n);
  for (const auto& [_, c] : ct) ht -= (c / n) * std::log(c / n);
  if (hp == 0.0 && ht == 0.0) return 1.0;  // two identical single-cluster partitions
  if (hp == 0.0 || ht == 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [cell, c] : joint) {
    const double pij = c / n;
    mi += pij * std::log(pij / ((cp[cell.first] / n) * (ct[cell.second] / n)));
  }
  return mi / std::sqrt(hp * ht);
}

std::vector<int> assign_clusters(const std::vector<std::vector<double>>& latents, int n_clusters,
                                 std::uint64_t seed) {
  if (n_clusters < 2) throw DomainError("assign_clusters: n_clusters must be >= 2");
  const gmm::GMMParams params = gmm::fit_em(latents, n_clusters, 100, seed);
  const gmm::EStep es = gmm::e_step(params, latents);
  std::vector<int> labels(latents.size());
  for (std::size_t i = 0; i < latents.size(); ++i) {
    const auto& r = es.responsibilities[i];
    labels[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return labels;
}

void write_scores_csv(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<double>& scores, const std::vector<int>& labels) {
  if (ids.size() != scores.size() || ids.size() != labels.size()) {
    throw ShapeError("write_scores_csv: column lengths differ");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out.precision(17);
  out << "id,score,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << ',' << scores[i] << ',' << labels[i] << '\n';
  }
}

}  // namespace autoseries::metrics
