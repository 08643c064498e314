#ifndef BINF_CAPACITY_HPP
#define BINF_CAPACITY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "channel.hpp"
#include "rng.hpp"

namespace binf {

// Factorized input distribution, one shape per kind:
//   relay / state_relay:   p(xr), p(x | xr, s)
//   state_relay_no_delay:  p(u), p(x | u, s), deterministic xr = map(u, z)
//   state_mac:             p(u), p(x1 | u, s1), p(x2 | u, s2)
//   state_mac_causal:      p(u), p(x1 | u, s1), p(x2 | u, s2, z1)
// Rows are stored flat: input1 is [c][s][x] (c = xr or u), input2 is
// [u][s2][x2] or [u][s2][z1][x2].
struct Parameterization {
  ChannelKind kind = ChannelKind::kRelay;
  int u_size = 1;                // |U|; ignored for relay/state_relay
  std::vector<double> coop;      // p(xr) or p(u)
  std::vector<double> input1;
  std::vector<double> input2;    // MAC kinds only
  std::vector<int> relay_map;    // state_relay_no_delay only: [u][z] -> xr
};

// Coop alphabet size implied by the kind: |Xr| for relay/state_relay,
// u_size otherwise.
int coop_size(const ChannelSpec& spec, const Parameterization& param);

// Caratheodory cap on |U|; 0 for kinds without an auxiliary.
int u_cardinality_cap(const ChannelSpec& spec);

void validate_parameterization(const ChannelSpec& spec, const Parameterization& param);

// The two bracketed quantities of the relay capacity expressions plus the
// cooperative information bound:
//   coop_info    = I(X,Xr;Y|S)   (no-delay kind: I(U,X;Y|S))
//   crib_entropy = H(Z|Xr,S)     (no-delay kind: H(Z|U,S))
//   direct_info  = I(X;Y|Xr,Z,S) (no-delay kind: I(X;Y|U,Z,S))
struct RelayTerms {
  double coop_info = 0;
  double crib_entropy = 0;
  double direct_info = 0;
};

// Information quantities appearing in the MAC regions.
struct MacTerms {
  double i1 = 0;    // I(X1;Y|U,X2,Z1,S1,S2)
  double i2 = 0;    // I(X2;Y|U,X1,Z2,S1,S2)
  double i12 = 0;   // I(X1,X2;Y|U,Z1,Z2,S1,S2)
  double itot = 0;  // I(X1,X2;Y|S1,S2)
  double h1 = 0;    // H(Z1|U,S1)
  double h2 = 0;    // H(Z2|U,S2); causal kind: H(Z2|U,S2,Z1)
  double h12 = 0;   // H(Z1,Z2|U,S1,S2)
};

// Rate polytope of one MAC parameterization.
struct MacPolytope {
  double r1_cap = 0;         // i1 + h1
  double r2_cap = 0;         // i2 + h2
  double sum_cap_joint = 0;  // i12 + h12
  double sum_cap_total = 0;  // itot

  bool contains(double r1, double r2, double slack = 1e-9) const {
    return r1 >= -slack && r2 >= -slack && r1 <= r1_cap + slack && r2 <= r2_cap + slack &&
           r1 + r2 <= sum_cap_joint + slack && r1 + r2 <= sum_cap_total + slack;
  }
};

RelayTerms eval_relay_terms(const ChannelSpec& spec, const Parameterization& param);
MacTerms eval_mac_terms(const ChannelSpec& spec, const Parameterization& param);
MacPolytope polytope_from_terms(const MacTerms& t);

// Relay kinds: min of the two capacity-expression terms. Throws on MAC kinds.
double eval_objective(const ChannelSpec& spec, const Parameterization& param);
// MAC kinds: the four-inequality polytope for this parameterization.
MacPolytope eval_polytope(const ChannelSpec& spec, const Parameterization& param);

// Pre-elimination constraint system with delta(epsilon) set to 0.
struct LinearTerm {
  std::string var;
  double coeff = 1.0;
};
struct LinearConstraint {
  std::string label;
  std::vector<LinearTerm> lhs;  // sum of coeff * var
  double rhs = 0;               // lhs <= rhs
};
struct ConstraintSystem {
  std::vector<std::string> variables;
  std::vector<LinearConstraint> rows;
};
ConstraintSystem build_constraints(const ChannelSpec& spec, const Parameterization& param);

struct SolveOptions {
  // Base simplex step; factors with more than 4 cells use twice the step.
  // Must be the reciprocal of an even integer.
  double grid_step = 0.05;
  // When the exhaustive grid would exceed this many parameterizations, the
  // solver certifies a coarser level of the step ladder and relies on the
  // polish phase below it.
  std::uint64_t enum_cap = 40'000'000;
  int u_size = 0;  // 0 = min(3, cardinality cap)
  int restarts = 8;
  int ascent_rounds = 20;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  double weight_step = 0.05;  // MAC boundary sweep over w * R1 + (1-w) * R2
  enum class MapMode { kAuto, kExhaustive, kSampled };
  MapMode map_mode = MapMode::kAuto;
  int map_cap = 4096;  // exhaustive relay-map enumeration limit / sample count
  // state_mac_causal only: restrict p(x2|u,s2,z1) to be constant in z1.
  bool z1_independent = false;
};

struct RegionPoint {
  double r1 = 0;
  double r2 = 0;
  std::string active;  // binding constraint at this boundary point
};

// Downward-closed staircase: points sorted by r1, r2 non-increasing.
struct RateRegion {
  double r1_step = 0.05;
  std::vector<RegionPoint> boundary;

  bool contains(double r1, double r2, double slack = 1e-9) const;
  double sum_rate_max() const;
};

struct Solution {
  ChannelKind kind = ChannelKind::kRelay;
  bool is_region = false;
  double value = 0;  // relay: optimum; MAC: best boundary sum rate
  RateRegion region;
  Parameterization argmax;

  // reporting
  double base_step = 0;
  double cert_step_small = 0;  // certified grid step for factors of <= 4 cells
  double cert_step_big = 0;    // certified grid step for larger factors
  std::uint64_t grid_points = 0;
  int u_size = 1;
  int u_cap = 0;
  std::uint64_t maps_total = 0;
  std::uint64_t maps_searched = 0;
};

// Grid-certified maximization of the capacity expression (relay kinds) or of
// the achievable-region union (MAC kinds). The result is a lower bound; the
// certified grid steps are reported alongside.
Solution solve(const ChannelSpec& spec, const SolveOptions& options);

struct ToyRates {
  double bin_forward = 0;     // 1 - p
  double decode_forward = 0;  // 1 - H2(p/2)
};
ToyRates toy_rates(double p);

double binary_entropy(double q);

// Empirical Fourier-Motzkin verification: over a rate grid, membership in the
// eliminated region must match feasibility of the pre-elimination system,
// searched over auxiliary rates on the same grid, up to one grid step of
// boundary slack.
struct FmCounterexample {
  double r1 = 0;
  double r2 = 0;  // unused for relay kinds
  bool region_side = false;
  bool aux_side = false;
  int sample = 0;
};
struct FmReport {
  int samples = 0;
  int failures = 0;
  bool passed = true;
  std::optional<FmCounterexample> counterexample;
};
FmReport fm_consistency_check(const ChannelSpec& spec, const Parameterization& param, double rate_step);
FmReport fm_check_sampled(const ChannelSpec& spec, int samples, double rate_step, std::uint64_t seed);

Parameterization random_parameterization(const ChannelSpec& spec, int u_size, RngStream& rng);

// Documented reductions between setups, checked numerically.
struct SpecialCaseEntry {
  std::string name;
  bool passed = false;
  double deviation = 0;
  std::string detail;
};
struct SpecialCaseReport {
  std::vector<SpecialCaseEntry> entries;
  bool passed = true;
};
// Pairings: (state_relay with |S|=1, relay) compares optima;
// (state_mac_causal, state_mac) compares the z1-independent restriction of
// the causal solve against the strictly causal solve; a state_mac spec with
// unit cribbing alphabets paired with itself checks that the total sum-rate
// bound never cuts below the joint bound.
SpecialCaseReport special_case_checks(const ChannelSpec& reduced, const ChannelSpec& base,
                                      const SolveOptions& options);

}  // namespace binf

#endif
