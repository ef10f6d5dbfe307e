#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gtc {

/// Every numerical and physical parameter of a run, in normalized units
/// (lengths in minor radius a, velocities in ion thermal speed, B0 = 1).
struct RunParams {
  int mpsi = 90;
  int mthetamax = 640;
  int ntoroidal = 64;
  int micell = 100;
  int nradial_domains = 1;
  int npartdom = 1;
  /// Toroidal ranks; 0 means one rank per poloidal plane.
  int toroidal_domains = 0;
  int nghost = 4;

  double a_over_rho = 125.0;
  double r_inner = 0.1;
  double r_outer = 0.9;
  double aspect_ratio = 2.78;
  double q0 = 0.854;
  double q2 = 2.184;
  double rln = 2.2;
  double rlt = 6.9;
  double tau = 1.0;
  double weight_noise = 1.0e-3;

  double dt = 0.06;
  int nsteps = 100;
  int diag_every = 1;
  int bin_every = 10;
  std::uint64_t seed = 1;
  int workers = 1;

  double jacobi_omega = 2.0 / 3.0;
  double jacobi_tol = 1.0e-6;
  int jacobi_max_iter = 200;
  bool split_push = false;

  int toroidal_ranks() const { return toroidal_domains > 0 ? toroidal_domains : ntoroidal; }
  int planes_per_rank() const { return ntoroidal / toroidal_ranks(); }
  int total_ranks() const { return toroidal_ranks() * nradial_domains * npartdom; }

  bool operator==(const RunParams&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { Malformed, UnknownKey, Invariant, UnknownPreset };

  ConfigError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Plasma-size presets A–D with the Cyclone physics case.
RunParams preset(std::string_view label);

/// Throws ConfigError(Invariant) on the first violated constraint.
void validate(const RunParams& p);

/// Parse a line-based `key=value` document. `#` starts a comment. A `size=`
/// key selects a preset; it is applied before any other key regardless of
/// its position in the document.
RunParams parse_config(std::string_view text);

/// Apply `key=value` overrides on top of an existing parameter set.
void apply_overrides(RunParams& p, const std::vector<std::string>& assignments);

/// Canonical form: every key, fixed order, round-trip precision.
std::string serialize_config(const RunParams& p);

/// All keys accepted by parse_config, in serialization order.
const std::vector<std::string>& config_keys();

}  // namespace gtc
