#ifndef BINF_SIMULATE_DETAIL_HPP
#define BINF_SIMULATE_DETAIL_HPP

// Internal machinery of the scheme simulator, split out so tests can drive
// codebook generation, encoding and backward decoding separately.

#include "simulate.hpp"

namespace binf::simdetail {

std::uint64_t bin_of(std::uint64_t key, const std::uint8_t* seq, int n, int bins);

// Conditional laws the codebooks draw from, derived from the input factor and
// the deterministic link: p(z | c, s[, z1]) and p(x | c, s[, z1], z).
struct EncoderLaws {
  int ns = 1, nx = 1, nz = 1, extra = 1;
  std::vector<double> crib;  // [c][s][extra][z]
  std::vector<double> tx;    // [c][s][extra][z][x]

  const double* crib_row(int c, int s, int e) const {
    return crib.data() + ((static_cast<std::size_t>(c) * ns + s) * extra + e) * nz;
  }
  const double* tx_row(int c, int s, int e, int z) const {
    return tx.data() + (((static_cast<std::size_t>(c) * ns + s) * extra + e) * nz + z) * nx;
  }
};

struct SimContext {
  const ChannelSpec* spec = nullptr;
  const Parameterization* param = nullptr;
  SchemeConfig cfg;
  bool relay = true, nodelay = false, causal = false;
  int nc = 1;
  int B = 1, n = 1;
  CodebookCounts c1, c2;
  int Lc = 1;  // cooperation labels (MAC: bins1 * bins2)
  EncoderLaws law1, law2;

  // Reference joint for the decoder's acceptance test, with per-cell slack
  //   eps * p + 3 * sqrt(p (1-p) / n)
  // plus exact support agreement. As n grows the sampling allowance vanishes
  // and the test converges to the strong-typicality contract.
  std::vector<double> ref;
  std::vector<double> slack;
  std::vector<double> zero_violation;  // score contribution of an empty cell
  double base_score = 0;

  std::uint64_t symbols_per_trial = 0;
};

SimContext make_context(const ChannelSpec& spec, const Parameterization& param, const SchemeConfig& cfg);

std::size_t relay_ref_index(const SimContext& ctx, int c, int z, int x, int s, int y);
std::size_t mac_ref_index(const SimContext& ctx, int u, int z1, int x1, int z2, int x2, int s1, int s2,
                          int y);

// Per-block realized data plus the block's codebooks.
struct BlockData {
  std::vector<std::uint8_t> coop;   // [lc][i]
  std::vector<std::uint8_t> crib1;  // [lc][s][m'][i]
  std::vector<std::uint8_t> tx1;    // [lc][m'][s][m''][i]
  std::vector<std::uint8_t> crib2;  // [lc][s2][e][m'2][i]
  std::vector<std::uint8_t> tx2;    // [lc][m'2][s2][e][m''2][i]
  std::uint64_t bin_key1 = 0, bin_key2 = 0;

  std::vector<std::uint8_t> s1, s2;  // state sequences (s2 MAC only)
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> z1, z2;  // realized cribbed sequences
  std::vector<std::uint8_t> x1, x2;  // transmitted sequences
  int mp1 = 0, mpp1 = 0, mp2 = 0, mpp2 = 0;
  int l_in = 0;   // flattened label entering the block
  int l_out = 0;  // flattened label computed at the end of the block
};

struct TrialOutput {
  std::vector<SimBlockRow> rows;
  std::vector<std::uint8_t> no_accept;  // per block: step 2 accepted nothing
  std::uint64_t coll_pairs = 0, coll_hits = 0;
  int rejects = 0;
  int errors = 0;
};

// violation == 0 means the tuple passes the acceptance test; l1 is the raw
// type distance used to rank candidates within an acceptance class.
struct TupleScore {
  double violation = 0;
  double l1 = 0;
};

class TupleScorer {
 public:
  explicit TupleScorer(const SimContext& ctx) : ctx_(&ctx), counts_(ctx.ref.size(), 0) {}

  void reset();
  void add(std::size_t idx);
  TupleScore score() const;

 private:
  const SimContext* ctx_;
  std::vector<int> counts_;
  std::vector<std::size_t> touched_;
};

class TrialRunner {
 public:
  explicit TrialRunner(const SimContext& ctx) : ctx_(&ctx), scorer_(ctx) {}

  TrialOutput run(int trial);

  // Individual phases, public for tests.
  void generate_block(RngStream trial_stream, int b, BlockData& blk);
  void encode_block(RngStream trial_stream, int b, BlockData& blk, int l_in);
  int decode_all(std::vector<BlockData>& blocks, TrialOutput& out, int trial);
  void collision_stats(const std::vector<BlockData>& blocks, TrialOutput& out);

  void assemble_crib1(const BlockData& blk, int lc, int mp, std::uint8_t* buf) const;
  void assemble_crib2(const BlockData& blk, int lc, int mp, const std::uint8_t* z1seq,
                      std::uint8_t* buf) const;

 private:
  const SimContext& ctx() const { return *ctx_; }

  const SimContext* ctx_;
  TupleScorer scorer_;
  std::vector<std::uint8_t> buf1_, buf2_;
};

}  // namespace binf::simdetail

#endif
