#include "channel.hpp"

#include <array>
#include <cmath>

namespace binf {

bool is_relay_kind(ChannelKind kind) {
  return kind == ChannelKind::kRelay || kind == ChannelKind::kStateRelay ||
         kind == ChannelKind::kStateRelayNoDelay;
}

bool is_mac_kind(ChannelKind kind) {
  return kind == ChannelKind::kStateMac || kind == ChannelKind::kStateMacCausal;
}

const char* kind_name(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::kRelay: return "relay";
    case ChannelKind::kStateRelay: return "state_relay";
    case ChannelKind::kStateRelayNoDelay: return "state_relay_no_delay";
    case ChannelKind::kStateMac: return "state_mac";
    case ChannelKind::kStateMacCausal: return "state_mac_causal";
  }
  return "?";
}

std::optional<ChannelKind> kind_from_name(std::string_view name) {
  for (ChannelKind k : {ChannelKind::kRelay, ChannelKind::kStateRelay, ChannelKind::kStateRelayNoDelay,
                        ChannelKind::kStateMac, ChannelKind::kStateMacCausal})
    if (name == kind_name(k)) return k;
  return std::nullopt;
}

int DetLink::eval(std::span<const int> given) const {
  if (given.size() != given_sizes.size()) throw Error(Error::kInvalid, "det link: arity mismatch");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < given.size(); ++k) {
    if (given[k] < 0 || given[k] >= given_sizes[k])
      throw Error(Error::kInvalid, "det link: symbol out of range");
    idx = idx * static_cast<std::size_t>(given_sizes[k]) + static_cast<std::size_t>(given[k]);
  }
  return table[idx];
}

void DetLink::validate(const std::string& what) const {
  std::size_t cells = 1;
  for (int s : given_sizes) {
    if (s < 1) throw Error(Error::kInvalid, what + ": bad domain size");
    cells *= static_cast<std::size_t>(s);
  }
  if (out_size < 1) throw Error(Error::kInvalid, what + ": bad output size");
  if (table.size() != cells)
    throw Error(Error::kInvalid, what + ": table has " + std::to_string(table.size()) +
                                     " entries, domain has " + std::to_string(cells));
  for (int v : table)
    if (v < 0 || v >= out_size) throw Error(Error::kInvalid, what + ": table entry out of range");
}

int ChannelSpec::state_cells() const {
  int cells = 1;
  for (const auto& a : states) cells *= a.size;
  return cells;
}

int ChannelSpec::z_relay(int s, int x, int xr) const {
  if (kind == ChannelKind::kStateRelayNoDelay) return links[0].eval(std::array<int, 2>{s, x});
  return links[0].eval(std::array<int, 3>{s, x, xr});
}

int ChannelSpec::z_mac(int which, int s, int x) const {
  return links[static_cast<std::size_t>(which)].eval(std::array<int, 2>{s, x});
}

void ChannelSpec::validate() const {
  const bool relay = is_relay_kind(kind);
  if (relay) {
    if (states.size() != 1 || inputs.size() != 1 || cribs.size() != 1 || links.size() != 1)
      throw Error(Error::kInvalid, "relay spec: expected one state, input, crib and link");
    if (kind == ChannelKind::kRelay && states[0].size != 1)
      throw Error(Error::kInvalid, "relay spec: state alphabet must have size 1");
    if (relay_input.size < 1) throw Error(Error::kInvalid, "relay spec: missing relay input alphabet");
  } else {
    if (states.size() != 2 || inputs.size() != 2 || cribs.size() != 2 || links.size() != 2)
      throw Error(Error::kInvalid, "mac spec: expected two states, inputs, cribs and links");
  }
  if (output.size < 1) throw Error(Error::kInvalid, "spec: missing output alphabet");

  if (state_pmf.size() != state_cells())
    throw Error(Error::kInvalid, "spec: state pmf size does not match the state alphabets");

  std::size_t expected_rows = 1;
  for (const auto& a : states) expected_rows *= static_cast<std::size_t>(a.size);
  for (const auto& a : inputs) expected_rows *= static_cast<std::size_t>(a.size);
  if (relay) expected_rows *= static_cast<std::size_t>(relay_input.size);
  if (channel.row_count() != expected_rows || channel.target().size != output.size)
    throw Error(Error::kInvalid, "spec: channel table shape does not match the alphabets");

  if (relay) {
    const DetLink& link = links[0];
    if (kind == ChannelKind::kStateRelayNoDelay) {
      if (link.given_sizes != std::vector<int>{states[0].size, inputs[0].size})
        throw Error(Error::kInvalid, "spec: no-delay link must be a table over (s, x)");
    } else if (link.given_sizes != std::vector<int>{states[0].size, inputs[0].size, relay_input.size}) {
      throw Error(Error::kInvalid, "spec: relay link must be a table over (s, x, xr)");
    }
    if (link.out_size != cribs[0].size) throw Error(Error::kInvalid, "spec: link output alphabet mismatch");
    link.validate("link z");
  } else {
    for (int k = 0; k < 2; ++k) {
      const DetLink& link = links[static_cast<std::size_t>(k)];
      if (link.given_sizes != std::vector<int>{states[static_cast<std::size_t>(k)].size,
                                               inputs[static_cast<std::size_t>(k)].size})
        throw Error(Error::kInvalid, "spec: mac link must be a table over (s, x)");
      if (link.out_size != cribs[static_cast<std::size_t>(k)].size)
        throw Error(Error::kInvalid, "spec: link output alphabet mismatch");
      link.validate(k == 0 ? "link z1" : "link z2");
    }
  }
}

ChannelSpec make_toy_spec(const ToyChannelParams& params) {
  if (!(params.p > 0.0) || !(params.p < 0.5))
    throw Error(Error::kInvalid, "toy channel: p must lie in the open interval (0, 0.5)");
  ChannelSpec spec;
  spec.kind = ChannelKind::kStateRelay;
  spec.states = {Alphabet{"s", 3}};
  spec.inputs = {Alphabet{"x", 2}};
  spec.relay_input = Alphabet{"xr", 2};
  spec.output = Alphabet{"y", 2};
  spec.cribs = {Alphabet{"z", 2}};
  spec.state_pmf = Pmf(spec.states[0], {params.p / 2, params.p / 2, 1 - params.p});

  // z(s, x, xr): stuck at 0, stuck at 1, pass-through of x
  DetLink link;
  link.given_sizes = {3, 2, 2};
  link.out_size = 2;
  link.table.resize(12);
  for (int s = 0; s < 3; ++s)
    for (int x = 0; x < 2; ++x)
      for (int xr = 0; xr < 2; ++xr) link.table[static_cast<std::size_t>((s * 2 + x) * 2 + xr)] = s == 2 ? x : s;
  spec.links = {link};

  // y = xr with probability 1
  std::vector<double> rows;
  rows.reserve(3 * 2 * 2 * 2);
  for (int s = 0; s < 3; ++s)
    for (int x = 0; x < 2; ++x)
      for (int xr = 0; xr < 2; ++xr)
        for (int y = 0; y < 2; ++y) rows.push_back(y == xr ? 1.0 : 0.0);
  spec.channel = ConditionalPmf({spec.states[0], spec.inputs[0], spec.relay_input}, spec.output, std::move(rows));

  spec.validate();
  return spec;
}

StepOutcome sample_step(const ChannelSpec& spec, std::span<const int> inputs, std::span<const int> state,
                        RngStream& rng) {
  if (inputs.size() != (is_relay_kind(spec.kind) ? spec.inputs.size() + 1 : spec.inputs.size()))
    throw Error(Error::kInvalid, "sample_step: input tuple arity mismatch");
  if (state.size() != spec.states.size()) throw Error(Error::kInvalid, "sample_step: state tuple arity mismatch");

  StepOutcome out;
  std::vector<int> given;
  for (std::size_t k = 0; k < state.size(); ++k) {
    if (state[k] < 0 || state[k] >= spec.states[k].size)
      throw Error(Error::kInvalid, "sample_step: state symbol out of range");
    given.push_back(state[k]);
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    int cap = k < spec.inputs.size() ? spec.inputs[k].size : spec.relay_input.size;
    if (inputs[k] < 0 || inputs[k] >= cap)
      throw Error(Error::kInvalid, "sample_step: input symbol out of range");
    given.push_back(inputs[k]);
  }
  out.y = rng.sample(spec.channel.row_for(given));

  if (is_relay_kind(spec.kind)) {
    out.z = {spec.z_relay(state[0], inputs[0], inputs[1])};
  } else {
    out.z = {spec.z_mac(0, state[0], inputs[0]), spec.z_mac(1, state[1], inputs[1])};
  }
  return out;
}

}  // namespace binf
