#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autoseries/errors.hpp"

namespace autoseries::metrics {

// Area under the ROC curve via the rank (Mann-Whitney) formulation with
// average ranks for ties. Higher score = more anomalous; labels are 0/1 and
// both classes must be present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Normalized mutual information I(pred;truth)/sqrt(H(pred) H(truth)).
// When both partitions are single clusters the value is 1; when only one of
// them is degenerate it is 0.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth);

// GMM clustering in latent space: fits n_clusters components by EM and
// labels each point by its argmax posterior responsibility.
std::vector<int> assign_clusters(const std::vector<std::vector<double>>& latents, int n_clusters,
                                 std::uint64_t seed);

// `id,score,label` rows with a header line.
void write_scores_csv(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace autoseries::metrics
