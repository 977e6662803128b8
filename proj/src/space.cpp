#include "autoseries/space.hpp"

#include <algorithm>
#include <cmath>

#include "autoseries/augment.hpp"

namespace autoseries {

double HyperDomain::decode(double unit) const {
  const double u = std::clamp(unit, 0.0, 1.0);
  const double raw = lo + u * (hi - lo);
  if (!discrete) return raw;
  const double r = std::nearbyint(raw);
  return std::clamp(r, lo, hi);
}

double HyperDomain::encode(double value) const {
  if (hi == lo) return 0.0;
  return std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
}

bool HyperDomain::contains(double value) const {
  if (value < lo - 1e-12 || value > hi + 1e-12) return false;
  if (discrete && std::abs(value - std::nearbyint(value)) > 1e-9) return false;
  return true;
}

SearchSpace SearchSpace::standard(int channel_dim, int t_ref) {
  if (channel_dim < 1) throw DomainError("search space: channel_dim must be >= 1");
  if (t_ref < 1) throw DomainError("search space: reference length must be >= 1");
  SearchSpace s;
  s.channel_dim = channel_dim;
  s.t_ref = t_ref;

  const HyperDomain n_aug{"n_aug", true, 0, 100};
  const double wlo = augment::warp_lo(t_ref);
  const double whi = std::max<double>(wlo, augment::warp_hi(t_ref));
  s.modules.push_back({"augmentation",
                       {"scaling", "shifting", "timewarp"},
                       {{n_aug, {"h_amp", false, 0.5, 1.8}},
                        {n_aug, {"h_shift", true, -10, 10}},
                        {n_aug, {"h_tm", true, wlo, whi}}}});

  const HyperDomain h_enc{"h_enc", true, 1, 32};
  s.modules.push_back({"encoder", {"rnn", "lstm", "gru"}, {{h_enc}, {h_enc}, {h_enc}}});

  s.modules.push_back({"attention", {"none", "self"}, {{}, {}}});

  const HyperDomain h_dec =
      channel_dim == 1 ? HyperDomain{"h_dec", true, 1, 32}
                       : HyperDomain{"h_dec", true, static_cast<double>(channel_dim),
                                     static_cast<double>(4 * channel_dim)};
  s.modules.push_back({"decoder", {"rnn", "lstm", "gru"}, {{h_dec}, {h_dec}, {h_dec}}});

  s.modules.push_back({"em", {"gmm"}, {{{"gmm_h", true, 2, 6}}}});

  s.modules.push_back({"similarity", {"rel_euclid", "cosine", "both"}, {{}, {}, {}}});

  s.modules.push_back(
      {"estimation",
       {"mlp"},
       {{{"est_layers", true, 1, 5}, {"est_nodes", true, 8, 128}}}});

  s.modules.push_back(
      {"classifier",
       {"mlp"},
       {{{"clas_layers", true, 1, 5}, {"clas_nodes", true, 8, 128}}}});

  s.validate();
  return s;
}

void SearchSpace::validate() const {
  const std::vector<std::pair<std::string, std::size_t>> expected = {
      {"augmentation", 3}, {"encoder", 3}, {"attention", 2}, {"decoder", 3},
      {"em", 1},           {"similarity", 3}, {"estimation", 1}, {"classifier", 1}};
  if (modules.size() != expected.size()) {
    throw DomainError("search space: expected " + std::to_string(expected.size()) + " modules");
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (modules[i].name != expected[i].first || modules[i].options.size() != expected[i].second) {
      throw DomainError("search space: slot " + std::to_string(i) + " must be '" +
                        expected[i].first + "' with " + std::to_string(expected[i].second) +
                        " options");
    }
    if (modules[i].domains.size() != modules[i].options.size()) {
      throw DomainError("search space: '" + modules[i].name +
                        "' needs one domain list per option");
    }
    for (const auto& option_domains : modules[i].domains) {
      for (const auto& d : option_domains) {
        if (!(d.lo <= d.hi)) {
          throw DomainError("search space: empty domain for '" + d.name + "'");
        }
      }
    }
  }
}

const std::string& PipelineConfig::option(const SearchSpace& space,
                                          std::size_t module_index) const {
  return space.modules[module_index].options[static_cast<std::size_t>(choice[module_index])];
}

std::string PipelineConfig::key(const SearchSpace& space) const {
  validate(space);
  std::string out;
  for (std::size_t i = 0; i < choice.size(); ++i) {
    if (i > 0) out += '|';
    out += option(space, i);
  }
  return out;
}

void PipelineConfig::validate(const SearchSpace& space) const {
  if (choice.size() != space.modules.size()) {
    throw DomainError("pipeline config: expected one choice per module");
  }
  for (std::size_t i = 0; i < choice.size(); ++i) {
    if (choice[i] < 0 || choice[i] >= static_cast<int>(space.modules[i].options.size())) {
      throw DomainError("pipeline config: choice out of range for '" + space.modules[i].name +
                        "'");
    }
  }
}

double HyperparamVector::at(const std::string& name) const {
  const auto it = values.find(name);
  if (it == values.end()) throw DomainError("hyperparams: missing dimension '" + name + "'");
  return it->second;
}

int HyperparamVector::at_int(const std::string& name) const {
  return static_cast<int>(std::llround(at(name)));
}

std::vector<HyperDomain> active_domains(const SearchSpace& space, const PipelineConfig& config) {
  config.validate(space);
  std::vector<HyperDomain> out;
  for (std::size_t i = 0; i < space.modules.size(); ++i) {
    const auto& ds = space.modules[i].domains[static_cast<std::size_t>(config.choice[i])];
    out.insert(out.end(), ds.begin(), ds.end());
  }
  return out;
}

HyperparamVector decode_point(const std::vector<HyperDomain>& domains,
                              const std::vector<double>& unit) {
  if (unit.size() != domains.size()) {
    throw ShapeError("decode_point: point dimension does not match active domains");
  }
  HyperparamVector out;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    out.values[domains[i].name] = domains[i].decode(unit[i]);
  }
  return out;
}

void validate_hyperparams(const std::vector<HyperDomain>& domains, const HyperparamVector& hp) {
  for (const auto& d : domains) {
    if (!d.contains(hp.at(d.name))) {
      throw DomainError("hyperparams: '" + d.name + "' = " + std::to_string(hp.at(d.name)) +
                        " outside [" + std::to_string(d.lo) + ", " + std::to_string(d.hi) + "]");
    }
  }
}

}  // namespace autoseries
