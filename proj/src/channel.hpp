#ifndef BINF_CHANNEL_HPP
#define BINF_CHANNEL_HPP

#include <optional>
#include <string_view>
#include <vector>

#include "prob.hpp"
#include "rng.hpp"

namespace binf {

// The five setups. Relay kinds carry one state component, one source input X,
// a relay input X_r and one deterministic link Z; MAC kinds carry two of each.
enum class ChannelKind {
  kRelay,              // no state, Z = z(X, X_r)
  kStateRelay,         // Z = z(X, X_r, S), causal state at source and destination
  kStateRelayNoDelay,  // Z = z(X, S), relay sees the current Z symbol
  kStateMac,           // strictly causal partial cribbing, Z_k = z_k(X_k, S_k)
  kStateMacCausal,     // encoder 2 sees the current Z_1 symbol
};

bool is_relay_kind(ChannelKind kind);
bool is_mac_kind(ChannelKind kind);
const char* kind_name(ChannelKind kind);
std::optional<ChannelKind> kind_from_name(std::string_view name);

// Total deterministic map from a tuple of symbols to one output symbol.
struct DetLink {
  std::vector<int> given_sizes;
  int out_size = 0;
  std::vector<int> table;  // row-major over given_sizes

  int eval(std::span<const int> given) const;
  void validate(const std::string& what) const;
};

// One validated channel description. Axis conventions (also the order of the
// conditioning tuple of `channel`):
//   relay kinds: channel = p(y | s, x, xr), link z(s, x, xr) (no-delay: z(s, x))
//   mac kinds:   channel = p(y | s1, s2, x1, x2), links z1(s1, x1), z2(s2, x2)
// Relay (no-state) specs get a size-1 state alphabet so every code path is
// uniform.
struct ChannelSpec {
  ChannelKind kind = ChannelKind::kRelay;
  std::vector<Alphabet> states;  // {S} or {S1, S2}
  std::vector<Alphabet> inputs;  // {X} or {X1, X2}
  Alphabet relay_input;          // X_r, relay kinds only
  Alphabet output;               // Y
  std::vector<Alphabet> cribs;   // {Z} or {Z1, Z2}
  Pmf state_pmf;                 // joint over the state components, flattened row-major
  ConditionalPmf channel;
  std::vector<DetLink> links;    // {z} or {z1, z2}

  void validate() const;

  int state_cells() const;
  // relay kinds: z(s, x, xr); the no-delay table is stored without the xr axis
  int z_relay(int s, int x, int xr) const;
  // mac kinds
  int z_mac(int which, int s, int x) const;
};

struct ToyChannelParams {
  double p = 0.0;  // stuck-at fault probability, 0 < p < 1/2
};

// Memory-with-stuck-at-faults source link, noiseless relay-to-destination
// bit pipe: S ~ (p/2, p/2, 1-p); z = 0 / 1 / X for S = 0 / 1 / 2; Y = X_r.
ChannelSpec make_toy_spec(const ToyChannelParams& params);

struct StepOutcome {
  int y = 0;
  std::vector<int> z;  // one entry per deterministic link
};

// Draw one channel use. The deterministic outputs are exact; y is drawn from
// the channel row using the caller's stream.
StepOutcome sample_step(const ChannelSpec& spec, std::span<const int> inputs, std::span<const int> state,
                        RngStream& rng);

}  // namespace binf

#endif
