#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autoseries/errors.hpp"

namespace autoseries {

// One observation sequence. values[t] is the D-dimensional observation at
// step t; time_index keeps the original timestamp positions so irregular
// sampling preserves where the surviving points came from.
struct TimeSeries {
  std::string id;
  std::vector<std::vector<double>> values;
  std::vector<int> time_index;
  std::optional<int> label;

  int length() const { return static_cast<int>(values.size()); }
  int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
  void validate() const;
};

struct Dataset {
  std::vector<TimeSeries> series;
  int channel_dim = 1;
  std::string name;

  std::size_t size() const { return series.size(); }
  void validate() const;
};

// train is unlabeled (normals, possibly contaminated); val is labeled and
// only ever used to evaluate the search objective; test is labeled and held
// out until the single post-search evaluation.
struct SplitDataset {
  Dataset train;
  Dataset val;
  Dataset test;
};

struct SamplerConfig {
  double beta = 0.0;  // fraction of timestamps to drop, in [0, 1)
  std::uint64_t seed = 0;
};

struct SplitRatios {
  double train = 0.5;
  double val = 0.2;
  double test = 0.3;
};

enum class Task { Anomaly, Cluster };

std::string to_string(Task task);
Task task_from_string(const std::string& s);

namespace data {

// UCR-style TSV: one series per line, `label<TAB>v1<TAB>...<TAB>vT`.
Dataset load_ucr(const std::string& path);
void save_ucr(const Dataset& dataset, const std::string& path);

// Multivariate JSON container:
// {"channel_dim": D, "series": [{"id": str, "label": int|null,
//   "values": [[f; D] x T]}]}
Dataset load_multivariate(const std::string& path);
void save_multivariate(const Dataset& dataset, const std::string& path);

// Per-series, per-channel zero mean and unit (population) standard
// deviation; constant channels map to all zeros.
TimeSeries znormalize(const TimeSeries& series);
Dataset znormalize(const Dataset& dataset);

// Removes exactly floor(beta * T) distinct timestamps uniformly at random.
TimeSeries irregular_sample(const TimeSeries& series, const SamplerConfig& cfg);

// Chandola-style task split. For the anomaly task the train split holds only
// normal-class series, with a `contamination` fraction replaced by anomalies;
// val/test carry both classes at the dataset's natural ratio and are
// relabeled 0 = normal, 1 = anomaly. For the cluster task the split is
// stratified across all classes and original labels are kept.
SplitDataset split(const Dataset& dataset, Task task, int normal_class, double contamination,
                   const SplitRatios& ratios, std::uint64_t seed);

// Most frequent label (ties broken by the smaller label); used as the
// default normal class.
int most_frequent_class(const Dataset& dataset);

// Smooth sines are normal; anomalies add uniform noise of amplitude 1 over
// one contiguous window whose length fraction is uniform in
// [noise_lo, noise_hi]. Labels: 0 = normal, 1 = anomaly.
Dataset make_synthetic_sine(int n_normal, int n_anomalous, int length, double noise_lo,
                            double noise_hi, std::uint64_t seed);
Dataset make_synthetic_sine_serial(int n_normal, int n_anomalous, int length, double noise_lo,
                                   double noise_hi, std::uint64_t seed);

}  // namespace data
}  // namespace autoseries
