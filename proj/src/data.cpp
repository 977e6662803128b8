#include "autoseries/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "autoseries/par.hpp"
#include "autoseries/rng.hpp"

namespace autoseries {

void TimeSeries::validate() const {
  if (values.empty()) throw DomainError("series '" + id + "': must have at least one observation");
  if (values.size() != time_index.size()) {
    throw DomainError("series '" + id + "': values and time_index lengths differ");
  }
  const std::size_t d = values.front().size();
  for (const auto& v : values) {
    if (v.size() != d) throw DomainError("series '" + id + "': ragged observation dimensions");
  }
  for (std::size_t t = 0; t < time_index.size(); ++t) {
    if (time_index[t] < 0 || (t > 0 && time_index[t] <= time_index[t - 1])) {
      throw DomainError("series '" + id + "': time_index must be strictly increasing and >= 0");
    }
  }
}

void Dataset::validate() const {
  for (const auto& s : series) {
    s.validate();
    if (s.dim() != channel_dim) {
      throw DomainError("dataset '" + name + "': series '" + s.id + "' has dimension " +
                        std::to_string(s.dim()) + ", expected " + std::to_string(channel_dim));
    }
  }
}

std::string to_string(Task task) { return task == Task::Anomaly ? "anomaly" : "cluster"; }

Task task_from_string(const std::string& s) {
  if (s == "anomaly") return Task::Anomaly;
  if (s == "cluster") return Task::Cluster;
  throw DomainError("unknown task '" + s + "' (expected anomaly or cluster)");
}

namespace data {

namespace {

double parse_double(const std::string& token, std::size_t line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &pos);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": non-numeric token '" + token + "'");
  }
  if (pos != token.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": non-numeric token '" + token + "'");
  }
  return v;
}

int parse_label(const std::string& token, std::size_t line_no) {
  const double v = parse_double(token, line_no);
  const double r = std::nearbyint(v);
  if (std::abs(v - r) > 1e-9) {
    throw ParseError("line " + std::to_string(line_no) + ": label '" + token +
                     "' is not an integer");
  }
  return static_cast<int>(r);
}

std::string path_stem(const std::string& path) {
  const std::size_t slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const std::size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace

Dataset load_ucr(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  Dataset out;
  out.channel_dim = 1;
  out.name = path_stem(path);
  std::string line;
  std::size_t line_no = 0;
  int expected_len = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> tokens;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, '\t')) tokens.push_back(tok);
    if (tokens.size() < 2) {
      throw ParseError("line " + std::to_string(line_no) + ": expected label and values");
    }
    TimeSeries s;
    s.id = "row" + std::to_string(out.series.size());
    s.label = parse_label(tokens.front(), line_no);
    const int len = static_cast<int>(tokens.size()) - 1;
    if (expected_len < 0) {
      expected_len = len;
    } else if (len != expected_len) {
      throw ParseError("line " + std::to_string(line_no) + ": row has " + std::to_string(len) +
                       " values, expected " + std::to_string(expected_len));
    }
    s.values.reserve(len);
    s.time_index.reserve(len);
    for (int t = 0; t < len; ++t) {
      s.values.push_back({parse_double(tokens[t + 1], line_no)});
      s.time_index.push_back(t);
    }
    out.series.push_back(std::move(s));
  }
  if (out.series.empty()) throw Error("'" + path + "': empty dataset");
  return out;
}

void save_ucr(const Dataset& dataset, const std::string& path) {
  if (dataset.channel_dim != 1) {
    throw DomainError("save_ucr: only univariate datasets fit the UCR TSV format");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out.precision(17);
  for (const auto& s : dataset.series) {
    out << (s.label ? *s.label : 0);
    for (const auto& v : s.values) out << '\t' << v[0];
    out << '\n';
  }
}

Dataset load_multivariate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError("'" + path + "': invalid JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("channel_dim") || !j.contains("series")) {
    throw ParseError("'" + path + "': expected object with channel_dim and series");
  }
  Dataset out;
  out.name = path_stem(path);
  if (!j.at("channel_dim").is_number_integer()) {
    throw ParseError("'" + path + "': channel_dim must be an integer");
  }
  out.channel_dim = j.at("channel_dim").get<int>();
  if (out.channel_dim < 1) throw ParseError("'" + path + "': channel_dim must be >= 1");
  if (!j.at("series").is_array()) throw ParseError("'" + path + "': series must be an array");
  for (const auto& js : j.at("series")) {
    TimeSeries s;
    if (!js.contains("id") || !js.at("id").is_string()) {
      throw ParseError("'" + path + "': every series needs a string id");
    }
    s.id = js.at("id").get<std::string>();
    if (js.contains("label") && !js.at("label").is_null()) s.label = js.at("label").get<int>();
    if (!js.contains("values") || !js.at("values").is_array() || js.at("values").empty()) {
      throw ParseError("series '" + s.id + "': values must be a non-empty array");
    }
    int t = 0;
    for (const auto& row : js.at("values")) {
      if (!row.is_array() || static_cast<int>(row.size()) != out.channel_dim) {
        throw ParseError("series '" + s.id + "': observation " + std::to_string(t) +
                         " does not have channel_dim entries");
      }
      s.values.push_back(row.get<std::vector<double>>());
      s.time_index.push_back(t++);
    }
    out.series.push_back(std::move(s));
  }
  if (out.series.empty()) throw Error("'" + path + "': empty dataset");
  out.validate();
  return out;
}

void save_multivariate(const Dataset& dataset, const std::string& path) {
  nlohmann::json j;
  j["channel_dim"] = dataset.channel_dim;
  j["series"] = nlohmann::json::array();
  for (const auto& s : dataset.series) {
    nlohmann::json js;
    js["id"] = s.id;
    if (s.label) {
      js["label"] = *s.label;
    } else {
      js["label"] = nullptr;
    }
    js["values"] = s.values;
    j["series"].push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

TimeSeries znormalize(const TimeSeries& series) {
  TimeSeries out = series;
  const int d = series.dim();
  const int n = series.length();
  for (int ch = 0; ch < d; ++ch) {
    double mean = 0.0;
    for (int t = 0; t < n; ++t) mean += series.values[t][ch];
    mean /= n;
    double var = 0.0;
    for (int t = 0; t < n; ++t) {
      const double dlt = series.values[t][ch] - mean;
      var += dlt * dlt;
    }
    const double sd = std::sqrt(var / n);
    if (sd < 1e-12) {
      for (int t = 0; t < n; ++t) out.values[t][ch] = 0.0;
    } else {
      for (int t = 0; t < n; ++t) out.values[t][ch] = (series.values[t][ch] - mean) / sd;
    }
  }
  return out;
}

Dataset znormalize(const Dataset& dataset) {
  Dataset out = dataset;
  for (auto& s : out.series) s = znormalize(s);
  return out;
}

TimeSeries irregular_sample(const TimeSeries& series, const SamplerConfig& cfg) {
  if (cfg.beta < 0.0 || cfg.beta >= 1.0) {
    throw DomainError("irregular_sample: beta must lie in [0, 1)");
  }
  const int n = series.length();
  const int k = static_cast<int>(std::floor(cfg.beta * n));
  if (k >= n) throw DomainError("irregular_sample: would remove every point");
  if (k == 0) return series;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(cfg.seed);
  for (int i = 0; i < k; ++i) {
    const int j = static_cast<int>(rng.uniform_int(i, n - 1));
    std::swap(idx[i], idx[j]);
  }
  std::vector<bool> removed(n, false);
  for (int i = 0; i < k; ++i) removed[idx[i]] = true;
  TimeSeries out;
  out.id = series.id;
  out.label = series.label;
  out.values.reserve(n - k);
  out.time_index.reserve(n - k);
  for (int t = 0; t < n; ++t) {
    if (removed[t]) continue;
    out.values.push_back(series.values[t]);
    out.time_index.push_back(series.time_index[t]);
  }
  return out;
}

int most_frequent_class(const Dataset& dataset) {
  std::map<int, int> counts;
  for (const auto& s : dataset.series) {
    if (s.label) counts[*s.label]++;
  }
  if (counts.empty()) throw Error("dataset has no labels");
  int best = counts.begin()->first;
  for (const auto& [label, count] : counts) {
    if (count > counts.at(best)) best = label;
  }
  return best;
}

namespace {

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

SplitDataset split(const Dataset& dataset, Task task, int normal_class, double contamination,
                   const SplitRatios& ratios, std::uint64_t seed) {
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw DomainError("split: ratios must sum to 1");
  }
  if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0) {
    throw DomainError("split: every ratio must be positive");
  }
  if (contamination < 0.0 || contamination > 1.0) {
    throw DomainError("split: contamination must lie in [0, 1]");
  }
  for (const auto& s : dataset.series) {
    if (!s.label) throw Error("split: series '" + s.id + "' is unlabeled");
  }

  SplitDataset out;
  out.train.channel_dim = out.val.channel_dim = out.test.channel_dim = dataset.channel_dim;
  out.train.name = dataset.name + "/train";
  out.val.name = dataset.name + "/val";
  out.test.name = dataset.name + "/test";

  if (task == Task::Anomaly) {
    std::vector<std::size_t> normals, anomalies;
    for (std::size_t i = 0; i < dataset.series.size(); ++i) {
      (*dataset.series[i].label == normal_class ? normals : anomalies).push_back(i);
    }
    if (normals.empty()) {
      throw Error("split: normal class " + std::to_string(normal_class) + " absent");
    }
    Rng rng_n(derive_seed(seed, "normals"));
    Rng rng_a(derive_seed(seed, "anomalies"));
    shuffle_indices(normals, rng_n);
    shuffle_indices(anomalies, rng_a);

    const std::size_t n = normals.size();
    const std::size_t m = anomalies.size();
    const std::size_t n_tr = static_cast<std::size_t>(std::floor(ratios.train * n));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(ratios.val * n));
    const std::size_t n_te = n - n_tr - n_val;

    // anomalies join val/test in proportion to the normal allocation, so both
    // held-out splits keep the dataset's natural class ratio
    std::size_t a_val =
        static_cast<std::size_t>(std::llround(static_cast<double>(n_val) * m / n));
    std::size_t a_te = static_cast<std::size_t>(std::llround(static_cast<double>(n_te) * m / n));
    if (a_val > m) a_val = m;
    if (a_val + a_te > m) a_te = m - a_val;

    const std::size_t contaminate =
        static_cast<std::size_t>(std::llround(contamination * static_cast<double>(n_tr)));
    const std::size_t pool = m - a_val - a_te;
    if (contaminate > pool) {
      throw Error("split: need " + std::to_string(contaminate) +
                  " anomalies for contamination but only " + std::to_string(pool) + " remain");
    }

    for (std::size_t i = 0; i < n_tr; ++i) {
      TimeSeries s = dataset.series[normals[i]];
      s.label.reset();
      out.train.series.push_back(std::move(s));
    }
    // the train tail is replaced by anomalies from the reserve pool
    for (std::size_t i = 0; i < contaminate; ++i) {
      TimeSeries s = dataset.series[anomalies[a_val + a_te + i]];
      s.label.reset();
      out.train.series[n_tr - contaminate + i] = std::move(s);
    }
    const auto emit = [&](Dataset& dst, std::size_t normal_from, std::size_t normal_count,
                          std::size_t anom_from, std::size_t anom_count) {
      for (std::size_t i = 0; i < normal_count; ++i) {
        TimeSeries s = dataset.series[normals[normal_from + i]];
        s.label = 0;
        dst.series.push_back(std::move(s));
      }
      for (std::size_t i = 0; i < anom_count; ++i) {
        TimeSeries s = dataset.series[anomalies[anom_from + i]];
        s.label = 1;
        dst.series.push_back(std::move(s));
      }
    };
    emit(out.val, n_tr, n_val, 0, a_val);
    emit(out.test, n_tr + n_val, n_te, a_val, a_te);
  } else {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < dataset.series.size(); ++i) {
      by_class[*dataset.series[i].label].push_back(i);
    }
    for (auto& [label, idx] : by_class) {
      Rng rng(derive_seed(seed, "class",
                          static_cast<std::uint64_t>(static_cast<std::int64_t>(label))));
      shuffle_indices(idx, rng);
      const std::size_t n_c = idx.size();
      const std::size_t c_tr = static_cast<std::size_t>(std::floor(ratios.train * n_c));
      const std::size_t c_val = static_cast<std::size_t>(std::floor(ratios.val * n_c));
      for (std::size_t i = 0; i < n_c; ++i) {
        TimeSeries s = dataset.series[idx[i]];
        if (i < c_tr) {
          s.label.reset();
          out.train.series.push_back(std::move(s));
        } else if (i < c_tr + c_val) {
          out.val.series.push_back(std::move(s));
        } else {
          out.test.series.push_back(std::move(s));
        }
      }
    }
  }
  return out;
}

namespace {

TimeSeries synth_normal(int length, std::uint64_t seed, const std::string& id) {
  Rng rng(seed);
  const int k = static_cast<int>(rng.uniform_int(1, 2));
  const double phase = rng.uniform(0.0, static_cast<double>(length));
  TimeSeries s;
  s.id = id;
  s.label = 0;
  s.values.reserve(length);
  s.time_index.reserve(length);
  for (int t = 0; t < length; ++t) {
    const double x = std::sin(6.283185307179586 * k * (t + phase) / length);
    s.values.push_back({x});
    s.time_index.push_back(t);
  }
  return s;
}

Dataset make_synthetic_impl(int n_normal, int n_anomalous, int length, double noise_lo,
                            double noise_hi, std::uint64_t seed, bool parallel) {
  if (length < 8) throw DomainError("make_synthetic_sine: length must be >= 8");
  if (noise_lo < 0.0 || noise_hi > 1.0 || noise_lo > noise_hi) {
    throw DomainError("make_synthetic_sine: noise span must satisfy 0 <= lo <= hi <= 1");
  }
  if (n_normal < 0 || n_anomalous < 0) {
    throw DomainError("make_synthetic_sine: counts must be non-negative");
  }
  Dataset out;
  out.channel_dim = 1;
  out.name = "synthetic";
  out.series.resize(static_cast<std::size_t>(n_normal) + static_cast<std::size_t>(n_anomalous));
  const auto fill = [&](std::size_t i) {
    if (i < static_cast<std::size_t>(n_normal)) {
      out.series[i] =
          synth_normal(length, derive_seed(seed, "normal", i), "norm" + std::to_string(i));
    } else {
      const std::size_t a = i - static_cast<std::size_t>(n_normal);
      const std::uint64_t s = derive_seed(seed, "anomaly", a);
      TimeSeries ts = synth_normal(length, derive_seed(s, "base"), "anom" + std::to_string(a));
      Rng rng(derive_seed(s, "noise"));
      const double frac = rng.uniform(noise_lo, noise_hi);
      int win = static_cast<int>(std::llround(frac * length));
      win = std::max(1, std::min(win, length));
      const int start = static_cast<int>(rng.uniform_int(0, length - win));
      for (int t = start; t < start + win; ++t) ts.values[t][0] += rng.uniform(-1.0, 1.0);
      ts.label = 1;
      out.series[i] = std::move(ts);
    }
  };
  if (parallel) {
    par::parallel_for(out.series.size(), fill);
  } else {
    for (std::size_t i = 0; i < out.series.size(); ++i) fill(i);
  }
  return out;
}

}  // namespace

Dataset make_synthetic_sine(int n_normal, int n_anomalous, int length, double noise_lo,
                            double noise_hi, std::uint64_t seed) {
  return make_synthetic_impl(n_normal, n_anomalous, length, noise_lo, noise_hi, seed, true);
}

Dataset make_synthetic_sine_serial(int n_normal, int n_anomalous, int length, double noise_lo,
                                   double noise_hi, std::uint64_t seed) {
  return make_synthetic_impl(n_normal, n_anomalous, length, noise_lo, noise_hi, seed, false);
}

}  // namespace data
}  // namespace autoseries
