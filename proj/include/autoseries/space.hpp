#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "autoseries/errors.hpp"

namespace autoseries {

// One hyperparameter dimension: a continuous box or an integer range.
// Search happens in normalized [0,1] coordinates; decode() maps a unit value
// into the domain (nearest valid integer for discrete dimensions).
struct HyperDomain {
  std::string name;
  bool discrete = false;
  double lo = 0.0;
  double hi = 1.0;

  double decode(double unit) const;
  double encode(double value) const;
  bool contains(double value) const;
};

struct ModuleSlot {
  std::string name;
  std::vector<std::string> options;
  std::vector<std::vector<HyperDomain>> domains;  // per option
};

// The eight pipeline slots with their options and hyperparameter domains.
struct SearchSpace {
  std::vector<ModuleSlot> modules;
  int channel_dim = 1;
  int t_ref = 0;

  // Slots: augmentation(3), encoder(3), attention(2), decoder(3), em(1),
  // similarity(3), estimation(1), classifier(1). t_ref is the minimum
  // training-series length and fixes the time-warp bounds; channel_dim
  // fixes the decoder width range.
  static SearchSpace standard(int channel_dim, int t_ref);
  void validate() const;
};

// One chosen option per module (the one-hot indicators, stored as indices).
struct PipelineConfig {
  std::vector<int> choice;

  const std::string& option(const SearchSpace& space, std::size_t module_index) const;
  std::string key(const SearchSpace& space) const;  // "scaling|gru|none|..."
  void validate(const SearchSpace& space) const;
};

// Hyperparameter values keyed by dimension name; discrete entries hold exact
// integers.
struct HyperparamVector {
  std::map<std::string, double> values;

  double at(const std::string& name) const;
  int at_int(const std::string& name) const;
};

// Active dimensions of a fixed pipeline, in slot order.
std::vector<HyperDomain> active_domains(const SearchSpace& space, const PipelineConfig& config);

// unit point in [0,1]^d -> named values (discrete dims rounded).
HyperparamVector decode_point(const std::vector<HyperDomain>& domains,
                              const std::vector<double>& unit);

void validate_hyperparams(const std::vector<HyperDomain>& domains, const HyperparamVector& hp);

}  // namespace autoseries
