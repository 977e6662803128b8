#include "autoseries/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "autoseries/rng.hpp"

namespace autoseries {

std::string to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::Scaling: return "scaling";
    case AugmentKind::Shifting: return "shifting";
    case AugmentKind::TimeWarp: return "timewarp";
  }
  return "scaling";
}

AugmentKind augment_kind_from_string(const std::string& s) {
  if (s == "scaling") return AugmentKind::Scaling;
  if (s == "shifting") return AugmentKind::Shifting;
  if (s == "timewarp") return AugmentKind::TimeWarp;
  throw DomainError("unknown augmentation kind '" + s + "'");
}

namespace augment {

int warp_lo(int length) { return std::max(1, (length + 9) / 10); }
int warp_hi(int length) { return std::max(1, length / 4); }

TimeSeries scale(const TimeSeries& series, double h_amp) {
  if (h_amp < 0.5 || h_amp > 1.8) {
    throw DomainError("scale: h_amp must lie in [0.5, 1.8]");
  }
  TimeSeries out = series;
  for (auto& row : out.values) {
    for (auto& v : row) v *= h_amp;
  }
  return out;
}

TimeSeries shift(const TimeSeries& series, int h_shift) {
  if (h_shift < -10 || h_shift > 10) {
    throw DomainError("shift: h_shift must lie in [-10, 10]");
  }
  const int n = series.length();
  if (std::abs(h_shift) >= n) {
    throw DomainError("shift: |h_shift| must be smaller than the series length");
  }
  TimeSeries out = series;
  const int k = ((h_shift % n) + n) % n;  // right rotation
  for (int t = 0; t < n; ++t) {
    out.values[(t + k) % n] = series.values[t];
  }
  return out;
}

TimeSeries time_warp(const TimeSeries& series, int h_tm, std::uint64_t seed) {
  const int n = series.length();
  if (h_tm < warp_lo(n) || h_tm > warp_hi(n)) {
    throw DomainError("time_warp: h_tm must lie in [" + std::to_string(warp_lo(n)) + ", " +
                      std::to_string(warp_hi(n)) + "] for length " + std::to_string(n));
  }
  Rng rng(seed);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < h_tm; ++i) {
    const int j = static_cast<int>(rng.uniform_int(i, n - 1));
    std::swap(idx[i], idx[j]);
  }
  // 0 = untouched, 1 = speed up (delete), 2 = slow down (insert duplicate)
  std::vector<int> mark(n, 0);
  std::sort(idx.begin(), idx.begin() + h_tm);
  for (int i = 0; i < h_tm; ++i) mark[idx[i]] = rng.bernoulli(0.5) ? 1 : 2;

  TimeSeries out;
  out.id = series.id;
  out.label = series.label;
  for (int t = 0; t < n; ++t) {
    if (mark[t] == 1) continue;
    if (mark[t] == 2) out.values.push_back(series.values[t]);
    out.values.push_back(series.values[t]);
  }
  if (out.values.empty()) out.values.push_back(series.values[0]);
  out.time_index.resize(out.values.size());
  std::iota(out.time_index.begin(), out.time_index.end(), 0);
  return out;
}

Dataset augment_dataset(const Dataset& train, const AugmentParams& params) {
  if (params.n_aug < 0 || params.n_aug > 100) {
    throw DomainError("augment_dataset: n_aug must lie in [0, 100]");
  }
  Dataset out = train;
  if (params.n_aug == 0 || train.series.empty()) return out;
  Rng rng(params.seed);
  for (int k = 0; k < params.n_aug; ++k) {
    const auto& src = train.series[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<long long>(train.series.size()) - 1))];
    TimeSeries gen;
    switch (params.kind) {
      case AugmentKind::Scaling:
        gen = scale(src, params.h_amp);
        break;
      case AugmentKind::Shifting: {
        const int cap = src.length() - 1;
        const int sh = std::clamp(params.h_shift, -std::min(10, cap), std::min(10, cap));
        gen = shift(src, sh);
        break;
      }
      case AugmentKind::TimeWarp: {
        const int tm = std::clamp(params.h_tm, warp_lo(src.length()), warp_hi(src.length()));
        gen = time_warp(src, tm, derive_seed(params.seed, "warp", static_cast<std::uint64_t>(k)));
        break;
      }
    }
    gen.id = src.id + "#aug" + std::to_string(k);
    gen.label = std::nullopt;
    out.series.push_back(std::move(gen));
  }
  return out;
}

NegativeSample gen_negative(const TimeSeries& series, std::uint64_t seed) {
  const int n = series.length();
  if (n < 4) throw DomainError("gen_negative: series must have at least 4 observations");
  const int d = series.dim();

  std::vector<double> lo(d), hi(d);
  for (int ch = 0; ch < d; ++ch) {
    lo[ch] = hi[ch] = series.values[0][ch];
    for (int t = 1; t < n; ++t) {
      lo[ch] = std::min(lo[ch], series.values[t][ch]);
      hi[ch] = std::max(hi[ch], series.values[t][ch]);
    }
  }

  Rng rng(seed);
  const int wlo = std::max(1, n / 10);
  const int whi = std::max(wlo, (n + 3) / 4);  // ceil(T/4)
  const int win = static_cast<int>(rng.uniform_int(wlo, whi));
  const int start = static_cast<int>(rng.uniform_int(0, n - win));

  NegativeSample out;
  out.series = series;
  out.series.id = series.id + "#neg";
  bool any_spread = false;
  for (int ch = 0; ch < d; ++ch) any_spread = any_spread || (hi[ch] - lo[ch] > 0.0);
  out.degenerate = !any_spread;
  for (int t = start; t < start + win; ++t) {
    for (int ch = 0; ch < d; ++ch) {
      out.series.values[t][ch] = rng.uniform(lo[ch], hi[ch]);
    }
  }
  return out;
}

}  // namespace augment
}  // namespace autoseries
