#ifndef BINF_SIMULATE_HPP
#define BINF_SIMULATE_HPP

#include <cstdint>
#include <vector>

#include "capacity.hpp"
#include "channel.hpp"

namespace binf {

// One encoder's rate split R = R' + R'' with binning rate R~.
struct RateSplit {
  double r_prime = 0;
  double r_dprime = 0;
  double r_tilde = 0;

  double total() const { return r_prime + r_dprime; }
};

struct SchemeConfig {
  int n = 12;
  int blocks = 4;
  int trials = 200;
  double epsilon = 0.2;
  std::uint64_t master_seed = 1;
  int threads = 0;
  // Cap on codeword symbols drawn per trial, across all blocks and tables.
  std::uint64_t symbol_budget = 1ull << 22;
  RateSplit enc1;
  RateSplit enc2;  // MAC kinds only

  void validate() const;
};

// Codebook sizes realized after rounding counts up to at least one codeword.
struct CodebookCounts {
  int msgs_prime = 1;   // 2^{n R'} rounded up
  int msgs_dprime = 1;  // 2^{n R''} rounded up
  int bins = 1;         // 2^{n R~} rounded up
  RateSplit realized(int n) const;
};

CodebookCounts codebook_counts(const RateSplit& split, int n);

struct SimBlockRow {
  std::int32_t trial = 0;
  std::int32_t block = 0;
  std::uint8_t event_a = 0;  // step-1 failure (MAC: encoder 1)
  std::uint8_t event_b = 0;  // step-2 acceptance failure (MAC: encoder-2 step-1)
  std::uint8_t event_c = 0;  // step-2 selection failure / inherited label error
  std::uint8_t decoded_ok = 1;
};

struct SimResult {
  int trials = 0;
  int blocks = 0;
  int n = 0;
  RateSplit realized1, realized2;
  double block_error_rate = 0;  // message mismatches over data blocks
  double event_a_rate = 0, event_b_rate = 0, event_c_rate = 0;
  // Step-1 binning statistics for the first cribbed codebook: competing
  // messages with a different cribbed codeword, and how many landed in the
  // true bin. The union-bound prediction for the hit fraction is 1/bins.
  std::uint64_t collision_pairs = 0;
  std::uint64_t collision_hits = 0;
  double collision_expected = 0;
  // Fraction of blocks whose true tuple failed the acceptance test.
  double true_tuple_reject_rate = 0;
  double seconds = 0;
  std::vector<SimBlockRow> rows;
};

// Runs the block-Markov cooperative-binning scheme end to end: per-block
// codebook generation, state-multiplexed encoding, random binning of the
// cribbed sequences, and two-step backward decoding.
SimResult run_trials(const ChannelSpec& spec, const Parameterization& param, const SchemeConfig& config);

// Default operating split for a target total rate on the given
// parameterization: route min(rate, 0.9 H) through the binned part and put
// the binning rate halfway between R' and what the total-information bound
// leaves available. For MAC kinds rate2 applies to encoder 2.
void derive_rate_split(const ChannelSpec& spec, const Parameterization& param, double rate1, double rate2,
                       RateSplit& enc1, RateSplit& enc2);

}  // namespace binf

#endif
