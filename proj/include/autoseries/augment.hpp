#pragma once

#include <cstdint>
#include <string>

#include "autoseries/data.hpp"

namespace autoseries {

enum class AugmentKind { Scaling, Shifting, TimeWarp };

std::string to_string(AugmentKind kind);
AugmentKind augment_kind_from_string(const std::string& s);

// First pipeline module: which augmentation to apply and its hyperparameters.
// Only the fields relevant to `kind` are read.
struct AugmentParams {
  AugmentKind kind = AugmentKind::Scaling;
  int n_aug = 0;        // in [0, 100]
  double h_amp = 1.0;   // in [0.5, 1.8]
  int h_shift = 0;      // in [-10, 10]
  int h_tm = 1;         // in [ceil(T/10), floor(T/4)]
  std::uint64_t seed = 0;
};

namespace augment {

// Integer time-warp bounds for a series of length T: the tightest integer
// range inside [T/10, T/4].
int warp_lo(int length);
int warp_hi(int length);

// Multiplies every value by h_amp; length and time_index unchanged.
TimeSeries scale(const TimeSeries& series, double h_amp);

// Rotates values right by h_shift (negative = left); length unchanged.
TimeSeries shift(const TimeSeries& series, int h_shift);

// Picks h_tm distinct timestamps; each is independently sped up (value
// deleted) or slowed down (a duplicate inserted just before it) with
// probability 1/2, so the output length lies in [T - h_tm, T + h_tm].
TimeSeries time_warp(const TimeSeries& series, int h_tm, std::uint64_t seed);

// Returns train plus n_aug generated series; sources are drawn uniformly
// with replacement, and generated ids get a "#aug<k>" suffix. Out-of-range
// shift/warp settings are clamped per series to that series' valid range.
Dataset augment_dataset(const Dataset& train, const AugmentParams& params);

struct NegativeSample {
  TimeSeries series;
  bool degenerate = false;  // input was constant; the window is a no-op
};

// One negative per positive: a contiguous window of length uniform in
// [max(1, floor(T/10)), ceil(T/4)] is replaced by independent uniform draws
// from [min(x), max(x)] per channel.
NegativeSample gen_negative(const TimeSeries& series, std::uint64_t seed);

}  // namespace augment
}  // namespace autoseries
