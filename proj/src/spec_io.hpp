#ifndef BINF_SPEC_IO_HPP
#define BINF_SPEC_IO_HPP

#include <string>

#include "channel.hpp"

namespace binf {

// Channel-spec documents are JSON with a mandatory `schema: 1` field. Index
// orders (all arrays row-major):
//   relay:                alphabets {x, xr, y, z}; channel [x][xr][y];
//                         det_links.z [x][xr]; no state_pmf
//   state_relay:          alphabets {s, x, xr, y, z}; state_pmf [s];
//                         channel [s][x][xr][y]; det_links.z [s][x][xr]
//   state_relay_no_delay: as state_relay but det_links.z is [s][x]
//                         (a [s][x][xr] table is accepted if constant in xr)
//   state_mac{,_causal}:  alphabets {s1, s2, x1, x2, y, z1, z2};
//                         state_pmf [s1][s2]; channel [s1][s2][x1][x2][y];
//                         det_links.z1 [s1][x1], det_links.z2 [s2][x2]
ChannelSpec load_spec(const std::string& path);
ChannelSpec parse_spec(const std::string& json_text);

std::string serialize_spec(const ChannelSpec& spec);
void save_spec(const ChannelSpec& spec, const std::string& path);

}  // namespace binf

#endif
