#include "simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "simulate_detail.hpp"

namespace binf {

namespace simdetail {

// Keyed PRF binning of a symbol sequence. Pairwise collisions behave like
// uniform independent bin assignment, which is all the error analysis uses;
// a materialized table over every z^n would not fit.
std::uint64_t bin_of(std::uint64_t key, const std::uint8_t* seq, int n, int bins) {
  std::uint64_t h = key;
  for (int i = 0; i < n; ++i) h = RngStream::mix(h, static_cast<std::uint64_t>(seq[i]) + 1);
  return bins <= 1 ? 0 : h % static_cast<std::uint64_t>(bins);
}

namespace {

// zfun(c, s, x) -> z; row_fun(c, s, e) -> p(x | c, s[, e]).
template <typename ZFun, typename RowFun>
EncoderLaws build_laws(int nc, int ns, int nx, int nz, int extra, ZFun&& zfun, RowFun&& row_fun) {
  EncoderLaws laws;
  laws.ns = ns;
  laws.nx = nx;
  laws.nz = nz;
  laws.extra = extra;
  laws.crib.assign(static_cast<std::size_t>(nc) * ns * extra * nz, 0.0);
  laws.tx.assign(static_cast<std::size_t>(nc) * ns * extra * nz * nx, 0.0);
  for (int c = 0; c < nc; ++c)
    for (int s = 0; s < ns; ++s)
      for (int e = 0; e < extra; ++e) {
        const double* row = row_fun(c, s, e);
        double* crib = laws.crib.data() + ((static_cast<std::size_t>(c) * ns + s) * extra + e) * nz;
        for (int x = 0; x < nx; ++x) crib[zfun(c, s, x)] += row[x];
        for (int z = 0; z < nz; ++z) {
          double mass = crib[z];
          if (mass <= 0) continue;
          double* tx =
              laws.tx.data() + (((static_cast<std::size_t>(c) * ns + s) * extra + e) * nz + z) * nx;
          for (int x = 0; x < nx; ++x)
            if (zfun(c, s, x) == z) tx[x] = row[x] / mass;
        }
      }
  return laws;
}

void finish_reference(SimContext& ctx) {
  ctx.slack.resize(ctx.ref.size());
  ctx.zero_violation.resize(ctx.ref.size());
  ctx.base_score = 0;
  double n = static_cast<double>(ctx.cfg.n);
  for (std::size_t i = 0; i < ctx.ref.size(); ++i) {
    double p = ctx.ref[i];
    ctx.slack[i] = ctx.cfg.epsilon * p + 3.0 * std::sqrt(p * (1 - p) / n);
    ctx.zero_violation[i] = std::max(0.0, p - ctx.slack[i]);
    ctx.base_score += ctx.zero_violation[i];
  }
}

}  // namespace

std::size_t relay_ref_index(const SimContext& ctx, int c, int z, int x, int s, int y) {
  const ChannelSpec& spec = *ctx.spec;
  return ((((static_cast<std::size_t>(c) * ctx.law1.nz + z) * spec.inputs[0].size + x) *
               spec.states[0].size +
           s) *
              spec.output.size +
          y);
}

std::size_t mac_ref_index(const SimContext& ctx, int u, int z1, int x1, int z2, int x2, int s1, int s2,
                          int y) {
  const ChannelSpec& spec = *ctx.spec;
  std::size_t idx = static_cast<std::size_t>(u);
  idx = idx * ctx.law1.nz + z1;
  idx = idx * spec.inputs[0].size + x1;
  idx = idx * ctx.law2.nz + z2;
  idx = idx * spec.inputs[1].size + x2;
  idx = idx * spec.states[0].size + s1;
  idx = idx * spec.states[1].size + s2;
  idx = idx * spec.output.size + y;
  return idx;
}

SimContext make_context(const ChannelSpec& spec, const Parameterization& param, const SchemeConfig& cfg) {
  cfg.validate();
  validate_parameterization(spec, param);

  SimContext ctx;
  ctx.spec = &spec;
  ctx.param = &param;
  ctx.cfg = cfg;
  ctx.relay = is_relay_kind(spec.kind);
  ctx.nodelay = spec.kind == ChannelKind::kStateRelayNoDelay;
  ctx.causal = spec.kind == ChannelKind::kStateMacCausal;
  ctx.nc = coop_size(spec, param);
  ctx.B = cfg.blocks;
  ctx.n = cfg.n;
  ctx.c1 = codebook_counts(cfg.enc1, cfg.n);

  const int n = cfg.n;
  if (ctx.relay) {
    int ns = spec.states[0].size, nx = spec.inputs[0].size, nz = spec.cribs[0].size;
    ctx.Lc = ctx.c1.bins;
    // For the no-delay kind the link ignores the cooperation symbol; for the
    // others the cooperation symbol is x_r itself.
    ctx.law1 = build_laws(
        ctx.nc, ns, nx, nz, 1,
        [&](int c, int s, int x) { return ctx.nodelay ? spec.z_relay(s, x, 0) : spec.z_relay(s, x, c); },
        [&](int c, int s, int) { return param.input1.data() + (static_cast<std::size_t>(c) * ns + s) * nx; });

    // Reference joint over (C, Z, X, S, Y).
    std::size_t cells = static_cast<std::size_t>(ctx.nc) * nz * nx * ns * spec.output.size;
    internal_check(cells <= kMaxCells, "simulator reference joint within the cell cap");
    ctx.ref.assign(cells, 0.0);
    const double* ps = spec.state_pmf.weights().data();
    for (int c = 0; c < ctx.nc; ++c)
      for (int s = 0; s < ns; ++s)
        for (int z = 0; z < nz; ++z) {
          double pcz = param.coop[static_cast<std::size_t>(c)] * ps[s] * ctx.law1.crib_row(c, s, 0)[z];
          if (pcz <= 0) continue;
          for (int x = 0; x < nx; ++x) {
            double w = pcz * ctx.law1.tx_row(c, s, 0, z)[x];
            if (w <= 0) continue;
            int xr = ctx.nodelay ? param.relay_map[static_cast<std::size_t>(c) * nz + z] : c;
            auto yrow = spec.channel.row(
                (static_cast<std::size_t>(s) * nx + x) * spec.relay_input.size + static_cast<std::size_t>(xr));
            for (int y = 0; y < spec.output.size; ++y)
              ctx.ref[relay_ref_index(ctx, c, z, x, s, y)] += w * yrow[y];
          }
        }

    std::uint64_t per_block = static_cast<std::uint64_t>(ctx.Lc) * n;
    per_block += static_cast<std::uint64_t>(ctx.Lc) * ns * ctx.c1.msgs_prime * n;
    per_block += static_cast<std::uint64_t>(ctx.Lc) * ctx.c1.msgs_prime * ns * ctx.c1.msgs_dprime * n;
    ctx.symbols_per_trial = per_block * static_cast<std::uint64_t>(ctx.B);
  } else {
    ctx.c2 = codebook_counts(cfg.enc2, cfg.n);
    ctx.Lc = ctx.c1.bins * ctx.c2.bins;
    int t1 = spec.states[0].size, t2 = spec.states[1].size;
    int n1 = spec.inputs[0].size, n2 = spec.inputs[1].size;
    int m1 = spec.cribs[0].size, m2 = spec.cribs[1].size;
    ctx.law1 = build_laws(
        ctx.nc, t1, n1, m1, 1, [&](int, int s, int x) { return spec.z_mac(0, s, x); },
        [&](int c, int s, int) { return param.input1.data() + (static_cast<std::size_t>(c) * t1 + s) * n1; });
    int extra = ctx.causal ? m1 : 1;
    ctx.law2 = build_laws(
        ctx.nc, t2, n2, m2, extra, [&](int, int s, int x) { return spec.z_mac(1, s, x); },
        [&](int c, int s, int e) {
          if (ctx.causal)
            return param.input2.data() + ((static_cast<std::size_t>(c) * t2 + s) * m1 + e) * n2;
          return param.input2.data() + (static_cast<std::size_t>(c) * t2 + s) * n2;
        });

    std::size_t cells = static_cast<std::size_t>(ctx.nc) * m1 * n1 * m2 * n2 * t1 * t2 * spec.output.size;
    internal_check(cells <= kMaxCells, "simulator reference joint within the cell cap");
    ctx.ref.assign(cells, 0.0);
    const double* ps = spec.state_pmf.weights().data();
    for (int u = 0; u < ctx.nc; ++u)
      for (int s1 = 0; s1 < t1; ++s1)
        for (int s2 = 0; s2 < t2; ++s2) {
          double pus = param.coop[static_cast<std::size_t>(u)] * ps[s1 * t2 + s2];
          if (pus <= 0) continue;
          for (int z1 = 0; z1 < m1; ++z1) {
            double p1 = pus * ctx.law1.crib_row(u, s1, 0)[z1];
            if (p1 <= 0) continue;
            int e = ctx.causal ? z1 : 0;
            for (int x1 = 0; x1 < n1; ++x1) {
              double p1x = p1 * ctx.law1.tx_row(u, s1, 0, z1)[x1];
              if (p1x <= 0) continue;
              for (int z2 = 0; z2 < m2; ++z2) {
                double p2 = p1x * ctx.law2.crib_row(u, s2, e)[z2];
                if (p2 <= 0) continue;
                for (int x2 = 0; x2 < n2; ++x2) {
                  double w = p2 * ctx.law2.tx_row(u, s2, e, z2)[x2];
                  if (w <= 0) continue;
                  auto yrow = spec.channel.row(
                      ((static_cast<std::size_t>(s1) * t2 + s2) * n1 + x1) * n2 + static_cast<std::size_t>(x2));
                  for (int y = 0; y < spec.output.size; ++y)
                    ctx.ref[mac_ref_index(ctx, u, z1, x1, z2, x2, s1, s2, y)] += w * yrow[y];
                }
              }
            }
          }
        }

    std::uint64_t per_block = static_cast<std::uint64_t>(ctx.Lc) * n;
    per_block += static_cast<std::uint64_t>(ctx.Lc) * t1 * ctx.c1.msgs_prime * n;
    per_block += static_cast<std::uint64_t>(ctx.Lc) * ctx.c1.msgs_prime * t1 * ctx.c1.msgs_dprime * n;
    per_block += static_cast<std::uint64_t>(ctx.Lc) * t2 * extra * ctx.c2.msgs_prime * n;
    per_block += static_cast<std::uint64_t>(ctx.Lc) * ctx.c2.msgs_prime * t2 * extra * ctx.c2.msgs_dprime * n;
    ctx.symbols_per_trial = per_block * static_cast<std::uint64_t>(ctx.B);
  }

  if (ctx.symbols_per_trial > cfg.symbol_budget)
    throw Error(Error::kBudget, "codeword-symbol budget exceeded: need " +
                                    std::to_string(ctx.symbols_per_trial) + " per trial, cap " +
                                    std::to_string(cfg.symbol_budget));
  finish_reference(ctx);
  return ctx;
}

void TupleScorer::reset() {
  for (std::size_t idx : touched_) counts_[idx] = 0;
  touched_.clear();
}

void TupleScorer::add(std::size_t idx) {
  if (counts_[idx] == 0) touched_.push_back(idx);
  ++counts_[idx];
}

TupleScore TupleScorer::score() const {
  TupleScore out;
  out.violation = ctx_->base_score;
  double n = static_cast<double>(ctx_->cfg.n);
  double touched_mass = 0;
  for (std::size_t idx : touched_) {
    double p = ctx_->ref[idx];
    double k = static_cast<double>(counts_[idx]);
    touched_mass += p;
    out.l1 += std::abs(k / n - p);
    if (p <= 0) {
      out.violation += k;  // support violation dominates any frequency slack
      continue;
    }
    out.violation -= ctx_->zero_violation[idx];
    out.violation += std::max(0.0, std::abs(k / n - p) - ctx_->slack[idx]);
  }
  out.l1 += 1.0 - touched_mass;  // empty cells contribute their full mass
  return out;
}

void TrialRunner::assemble_crib1(const BlockData& blk, int lc, int mp, std::uint8_t* buf) const {
  const int n = ctx().n, ns = ctx().law1.ns, mpc = ctx().c1.msgs_prime;
  for (int i = 0; i < n; ++i)
    buf[i] = blk.crib1[((static_cast<std::size_t>(lc) * ns + blk.s1[static_cast<std::size_t>(i)]) * mpc + mp) *
                           static_cast<std::size_t>(n) +
                       static_cast<std::size_t>(i)];
}

void TrialRunner::assemble_crib2(const BlockData& blk, int lc, int mp, const std::uint8_t* z1seq,
                                 std::uint8_t* buf) const {
  const int n = ctx().n, ns = ctx().law2.ns, mpc = ctx().c2.msgs_prime, extra = ctx().law2.extra;
  for (int i = 0; i < n; ++i) {
    int e = ctx().causal ? z1seq[i] : 0;
    buf[i] = blk.crib2[(((static_cast<std::size_t>(lc) * ns + blk.s2[static_cast<std::size_t>(i)]) * extra +
                         e) *
                            mpc +
                        mp) *
                           static_cast<std::size_t>(n) +
                       static_cast<std::size_t>(i)];
  }
}

void TrialRunner::generate_block(RngStream trial_stream, int b, BlockData& blk) {
  const SimContext& c = ctx();
  const ChannelSpec& spec = *c.spec;
  const int n = c.n;
  RngStream cb = trial_stream.sub("codebook").sub(static_cast<std::uint64_t>(b));
  blk.bin_key1 = cb.sub("bin1").next_u64();
  blk.bin_key2 = cb.sub("bin2").next_u64();

  // States and messages.
  RngStream st = trial_stream.sub("state").sub(static_cast<std::uint64_t>(b));
  blk.s1.resize(static_cast<std::size_t>(n));
  if (!c.relay) blk.s2.resize(static_cast<std::size_t>(n));
  auto sw = spec.state_pmf.weights();
  for (int i = 0; i < n; ++i) {
    int joint = st.sample(sw);
    if (c.relay) {
      blk.s1[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(joint);
    } else {
      blk.s1[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(joint / spec.states[1].size);
      blk.s2[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(joint % spec.states[1].size);
    }
  }
  RngStream ms = trial_stream.sub("messages").sub(static_cast<std::uint64_t>(b));
  bool pinned = b == c.B - 1;  // last block transmits the fixed message
  blk.mp1 = pinned ? 0 : static_cast<int>(ms.next_below(static_cast<std::uint64_t>(c.c1.msgs_prime)));
  blk.mpp1 = pinned ? 0 : static_cast<int>(ms.next_below(static_cast<std::uint64_t>(c.c1.msgs_dprime)));
  if (!c.relay) {
    blk.mp2 = pinned ? 0 : static_cast<int>(ms.next_below(static_cast<std::uint64_t>(c.c2.msgs_prime)));
    blk.mpp2 = pinned ? 0 : static_cast<int>(ms.next_below(static_cast<std::uint64_t>(c.c2.msgs_dprime)));
  }

  // Cooperation codewords, i.i.d. from the cooperation factor.
  RngStream coop_rng = cb.sub("coop");
  blk.coop.resize(static_cast<std::size_t>(c.Lc) * n);
  std::span<const double> pc(c.param->coop);
  for (std::size_t i = 0; i < blk.coop.size(); ++i)
    blk.coop[i] = static_cast<std::uint8_t>(coop_rng.sample(pc));

  // Cribbed and transmission codebooks: one symbol table per state symbol
  // (and per causally observed z1 symbol for the causal MAC), so effective
  // codewords can be assembled on the fly from the realized state sequence.
  auto gen_encoder = [&](const EncoderLaws& law, const CodebookCounts& counts, const char* crib_label,
                         const char* tx_label, std::vector<std::uint8_t>& crib,
                         std::vector<std::uint8_t>& tx) {
    RngStream crib_rng = cb.sub(crib_label);
    crib.resize(static_cast<std::size_t>(c.Lc) * law.ns * law.extra * counts.msgs_prime * n);
    for (int lc = 0; lc < c.Lc; ++lc)
      for (int s = 0; s < law.ns; ++s)
        for (int e = 0; e < law.extra; ++e)
          for (int mp = 0; mp < counts.msgs_prime; ++mp) {
            std::size_t base =
                (((static_cast<std::size_t>(lc) * law.ns + s) * law.extra + e) * counts.msgs_prime + mp) *
                static_cast<std::size_t>(n);
            for (int i = 0; i < n; ++i) {
              int u = blk.coop[static_cast<std::size_t>(lc) * n + i];
              crib[base + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(
                  crib_rng.sample({law.crib_row(u, s, e), static_cast<std::size_t>(law.nz)}));
            }
          }
    RngStream tx_rng = cb.sub(tx_label);
    tx.resize(static_cast<std::size_t>(c.Lc) * counts.msgs_prime * law.ns * law.extra *
              counts.msgs_dprime * n);
    for (int lc = 0; lc < c.Lc; ++lc)
      for (int mp = 0; mp < counts.msgs_prime; ++mp)
        for (int s = 0; s < law.ns; ++s)
          for (int e = 0; e < law.extra; ++e)
            for (int md = 0; md < counts.msgs_dprime; ++md) {
              std::size_t base = ((((static_cast<std::size_t>(lc) * counts.msgs_prime + mp) * law.ns + s) *
                                       law.extra +
                                   e) *
                                      counts.msgs_dprime +
                                  md) *
                                 static_cast<std::size_t>(n);
              for (int i = 0; i < n; ++i) {
                int u = blk.coop[static_cast<std::size_t>(lc) * n + i];
                // condition on the matching cribbed codeword symbol
                std::size_t crib_idx =
                    (((static_cast<std::size_t>(lc) * law.ns + s) * law.extra + e) * counts.msgs_prime +
                     mp) *
                        static_cast<std::size_t>(n) +
                    static_cast<std::size_t>(i);
                int zsym = crib[crib_idx];
                tx[base + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(
                    tx_rng.sample({law.tx_row(u, s, e, zsym), static_cast<std::size_t>(law.nx)}));
              }
            }
  };

  gen_encoder(c.law1, c.c1, "crib1", "tx1", blk.crib1, blk.tx1);
  if (!c.relay) gen_encoder(c.law2, c.c2, "crib2", "tx2", blk.crib2, blk.tx2);
}

void TrialRunner::encode_block(RngStream trial_stream, int b, BlockData& blk, int l_in) {
  const SimContext& c = ctx();
  const ChannelSpec& spec = *c.spec;
  const int n = c.n;
  blk.l_in = l_in;
  blk.y.resize(static_cast<std::size_t>(n));
  blk.z1.resize(static_cast<std::size_t>(n));
  blk.x1.resize(static_cast<std::size_t>(n));
  if (!c.relay) {
    blk.z2.resize(static_cast<std::size_t>(n));
    blk.x2.resize(static_cast<std::size_t>(n));
  }

  RngStream chan_rng = trial_stream.sub("channel").sub(static_cast<std::uint64_t>(b));

  if (c.relay) {
    const int ns = c.law1.ns, mpc = c.c1.msgs_prime, mdc = c.c1.msgs_dprime;
    for (int i = 0; i < n; ++i) {
      int s = blk.s1[static_cast<std::size_t>(i)];
      std::uint8_t zc =
          blk.crib1[((static_cast<std::size_t>(l_in) * ns + s) * mpc + blk.mp1) * static_cast<std::size_t>(n) +
                    static_cast<std::size_t>(i)];
      std::uint8_t x = blk.tx1[(((static_cast<std::size_t>(l_in) * mpc + blk.mp1) * ns + s) * mdc + blk.mpp1) *
                                   static_cast<std::size_t>(n) +
                               static_cast<std::size_t>(i)];
      int u = blk.coop[static_cast<std::size_t>(l_in) * n + i];
      int xr = c.nodelay ? c.param->relay_map[static_cast<std::size_t>(u) * c.law1.nz + zc] : u;
      internal_check(spec.z_relay(s, x, xr) == zc, "realized z equals the cribbed codeword symbol");
      blk.z1[static_cast<std::size_t>(i)] = zc;
      blk.x1[static_cast<std::size_t>(i)] = x;
      auto yrow =
          spec.channel.row((static_cast<std::size_t>(s) * spec.inputs[0].size + x) * spec.relay_input.size +
                           static_cast<std::size_t>(xr));
      blk.y[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(chan_rng.sample(yrow));
    }
    blk.l_out = static_cast<int>(bin_of(blk.bin_key1, blk.z1.data(), n, c.c1.bins));
  } else {
    const int ns1 = c.law1.ns, ns2 = c.law2.ns;
    const int mpc1 = c.c1.msgs_prime, mdc1 = c.c1.msgs_dprime;
    const int mpc2 = c.c2.msgs_prime, mdc2 = c.c2.msgs_dprime;
    const int extra = c.law2.extra;
    for (int i = 0; i < n; ++i) {
      int s1 = blk.s1[static_cast<std::size_t>(i)];
      int s2 = blk.s2[static_cast<std::size_t>(i)];
      std::uint8_t z1c = blk.crib1[((static_cast<std::size_t>(l_in) * ns1 + s1) * mpc1 + blk.mp1) *
                                       static_cast<std::size_t>(n) +
                                   static_cast<std::size_t>(i)];
      std::uint8_t x1 =
          blk.tx1[(((static_cast<std::size_t>(l_in) * mpc1 + blk.mp1) * ns1 + s1) * mdc1 + blk.mpp1) *
                      static_cast<std::size_t>(n) +
                  static_cast<std::size_t>(i)];
      // Encoder 2 receives z1 through the deterministic link; it must match
      // encoder 1's effective codeword, which is what lets both encoders
      // agree on the next cooperation label.
      internal_check(spec.z_mac(0, s1, x1) == z1c, "received z1 equals encoder 1's codeword");
      int e = c.causal ? z1c : 0;
      std::uint8_t z2c =
          blk.crib2[(((static_cast<std::size_t>(l_in) * ns2 + s2) * extra + e) * mpc2 + blk.mp2) *
                        static_cast<std::size_t>(n) +
                    static_cast<std::size_t>(i)];
      std::uint8_t x2 =
          blk.tx2[((((static_cast<std::size_t>(l_in) * mpc2 + blk.mp2) * ns2 + s2) * extra + e) * mdc2 +
                   blk.mpp2) *
                      static_cast<std::size_t>(n) +
                  static_cast<std::size_t>(i)];
      internal_check(spec.z_mac(1, s2, x2) == z2c, "received z2 equals encoder 2's codeword");
      blk.z1[static_cast<std::size_t>(i)] = z1c;
      blk.z2[static_cast<std::size_t>(i)] = z2c;
      blk.x1[static_cast<std::size_t>(i)] = x1;
      blk.x2[static_cast<std::size_t>(i)] = x2;
      auto yrow = spec.channel.row(((static_cast<std::size_t>(s1) * ns2 + s2) * spec.inputs[0].size + x1) *
                                       spec.inputs[1].size +
                                   static_cast<std::size_t>(x2));
      blk.y[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(chan_rng.sample(yrow));
    }
    int l1 = static_cast<int>(bin_of(blk.bin_key1, blk.z1.data(), n, c.c1.bins));
    int l2 = static_cast<int>(bin_of(blk.bin_key2, blk.z2.data(), n, c.c2.bins));
    blk.l_out = l1 * c.c2.bins + l2;
  }
}

int TrialRunner::decode_all(std::vector<BlockData>& blocks, TrialOutput& out, int trial) {
  const SimContext& c = ctx();
  const int n = c.n, B = c.B, Lc = c.Lc;
  const int mpc1 = c.c1.msgs_prime, mdc1 = c.c1.msgs_dprime;
  const int mpc2 = c.relay ? 1 : c.c2.msgs_prime, mdc2 = c.relay ? 1 : c.c2.msgs_dprime;
  buf1_.resize(static_cast<std::size_t>(n));
  buf2_.resize(static_cast<std::size_t>(n));
  out.rows.resize(static_cast<std::size_t>(B));
  out.no_accept.assign(static_cast<std::size_t>(B), 0);

  std::vector<int> mhat1(static_cast<std::size_t>(Lc), 0), mhat2(static_cast<std::size_t>(Lc), 0);
  std::vector<std::uint8_t> strong(static_cast<std::size_t>(Lc), 0);

  int errors = 0;
  int carried = 0;  // decoded l_b while walking backwards
  for (int b = B - 1; b >= 0; --b) {
    BlockData& blk = blocks[static_cast<std::size_t>(b)];
    bool last = b == B - 1;
    bool first = b == 0;
    int l_b = carried;

    // Step 1: for every candidate previous label, the split message whose
    // cribbed codeword lands in the decoded bin. Ambiguity resolves to the
    // smallest index; labels with no match at all are remembered and
    // deprioritized in step 2.
    if (!last) {
      for (int lc = 0; lc < Lc; ++lc) {
        int l1_target = c.relay ? l_b : l_b / c.c2.bins;
        int pick1 = -1;
        for (int mp = 0; mp < mpc1; ++mp) {
          assemble_crib1(blk, lc, mp, buf1_.data());
          if (static_cast<int>(bin_of(blk.bin_key1, buf1_.data(), n, c.c1.bins)) == l1_target) {
            pick1 = mp;
            break;
          }
        }
        bool ok1 = pick1 >= 0;
        mhat1[static_cast<std::size_t>(lc)] = ok1 ? pick1 : 0;
        bool ok2 = true;
        if (!c.relay) {
          int l2_target = l_b % c.c2.bins;
          assemble_crib1(blk, lc, mhat1[static_cast<std::size_t>(lc)], buf1_.data());
          int pick2 = -1;
          for (int mp = 0; mp < mpc2; ++mp) {
            assemble_crib2(blk, lc, mp, buf1_.data(), buf2_.data());
            if (static_cast<int>(bin_of(blk.bin_key2, buf2_.data(), n, c.c2.bins)) == l2_target) {
              pick2 = mp;
              break;
            }
          }
          ok2 = pick2 >= 0;
          mhat2[static_cast<std::size_t>(lc)] = ok2 ? pick2 : 0;
        }
        strong[static_cast<std::size_t>(lc)] = ok1 && ok2 ? 1 : 0;
      }
    } else {
      std::fill(mhat1.begin(), mhat1.end(), 0);
      std::fill(mhat2.begin(), mhat2.end(), 0);
      std::fill(strong.begin(), strong.end(), 1);
    }

    // Step 2: joint scoring of every (previous label, fresh message) tuple.
    // The acceptance test decides success; decoding continues backwards with
    // the best-ranked candidate either way, so one rejected block does not
    // sever the label chain. Rank: acceptance violation, then preference for
    // labels whose step-1 bin search actually matched, then raw type
    // distance.
    TupleScore best_score;
    bool best_weak = false;
    int best_lc = 0, best_md1 = 0, best_md2 = 0;
    bool have_best = false;
    int accepted = 0;

    int lc_hi = first ? 1 : Lc;  // l_0 is pinned
    int md1_hi = last ? 1 : mdc1;
    int md2_hi = last || c.relay ? 1 : mdc2;

    for (int lc = 0; lc < lc_hi; ++lc) {
      int mp1 = last ? 0 : mhat1[static_cast<std::size_t>(lc)];
      int mp2 = last ? 0 : mhat2[static_cast<std::size_t>(lc)];
      assemble_crib1(blk, lc, mp1, buf1_.data());
      if (!c.relay) assemble_crib2(blk, lc, mp2, buf1_.data(), buf2_.data());
      for (int md1 = 0; md1 < md1_hi; ++md1)
        for (int md2 = 0; md2 < md2_hi; ++md2) {
          scorer_.reset();
          if (c.relay) {
            const int ns = c.law1.ns;
            for (int i = 0; i < n; ++i) {
              int s = blk.s1[static_cast<std::size_t>(i)];
              int zc = buf1_[static_cast<std::size_t>(i)];
              int x = blk.tx1[(((static_cast<std::size_t>(lc) * mpc1 + mp1) * ns + s) * mdc1 + md1) *
                                  static_cast<std::size_t>(n) +
                              static_cast<std::size_t>(i)];
              scorer_.add(relay_ref_index(c, blk.coop[static_cast<std::size_t>(lc) * n + i], zc, x, s,
                                          blk.y[static_cast<std::size_t>(i)]));
            }
          } else {
            const int ns1 = c.law1.ns, ns2 = c.law2.ns, extra = c.law2.extra;
            for (int i = 0; i < n; ++i) {
              int s1 = blk.s1[static_cast<std::size_t>(i)];
              int s2 = blk.s2[static_cast<std::size_t>(i)];
              int z1c = buf1_[static_cast<std::size_t>(i)];
              int z2c = buf2_[static_cast<std::size_t>(i)];
              int e = c.causal ? z1c : 0;
              int x1 = blk.tx1[(((static_cast<std::size_t>(lc) * mpc1 + mp1) * ns1 + s1) * mdc1 + md1) *
                                   static_cast<std::size_t>(n) +
                               static_cast<std::size_t>(i)];
              int x2 = blk.tx2[((((static_cast<std::size_t>(lc) * mpc2 + mp2) * ns2 + s2) * extra + e) *
                                    mdc2 +
                                md2) *
                                   static_cast<std::size_t>(n) +
                               static_cast<std::size_t>(i)];
              scorer_.add(mac_ref_index(c, blk.coop[static_cast<std::size_t>(lc) * n + i], z1c, x1, z2c,
                                        x2, s1, s2, blk.y[static_cast<std::size_t>(i)]));
            }
          }
          TupleScore score = scorer_.score();
          bool weak = strong[static_cast<std::size_t>(lc)] == 0;
          if (score.violation <= 0) ++accepted;
          bool better = false;
          if (!have_best) {
            better = true;
          } else if (score.violation < best_score.violation - 1e-12) {
            better = true;
          } else if (score.violation <= best_score.violation + 1e-12) {
            if (!weak && best_weak)
              better = true;
            else if (weak == best_weak && score.l1 < best_score.l1 - 1e-12)
              better = true;
          }
          if (better) {
            have_best = true;
            best_score = score;
            best_weak = weak;
            best_lc = lc;
            best_md1 = md1;
            best_md2 = md2;
          }
        }
    }

    bool inherited_wrong = !last && l_b != blk.l_out;
    int true_prev = blk.l_in;
    int dec_mp1 = last ? 0 : mhat1[static_cast<std::size_t>(best_lc)];
    int dec_mp2 = last ? 0 : mhat2[static_cast<std::size_t>(best_lc)];

    bool msg_ok;
    if (last) {
      msg_ok = true;  // pinned message
    } else if (c.relay) {
      msg_ok = best_lc == true_prev && dec_mp1 == blk.mp1 && best_md1 == blk.mpp1;
    } else {
      msg_ok = best_lc == true_prev && dec_mp1 == blk.mp1 && best_md1 == blk.mpp1 && dec_mp2 == blk.mp2 &&
               best_md2 == blk.mpp2;
    }
    // Block B carries the pinned message; its own failure can only surface
    // through the label handed to block B-1.
    bool counts_as_data = !last || B == 1;
    bool block_error = counts_as_data && !msg_ok;

    SimBlockRow row;
    row.trial = trial;
    row.block = b + 1;
    row.decoded_ok = msg_ok ? 1 : 0;
    if (block_error) {
      ++errors;
      if (inherited_wrong) {
        row.event_c = 1;
      } else if (mhat1[static_cast<std::size_t>(true_prev)] != blk.mp1) {
        row.event_a = 1;
      } else if (!c.relay && mhat2[static_cast<std::size_t>(true_prev)] != blk.mp2) {
        row.event_b = 1;
      } else if (accepted == 0) {
        row.event_b = 1;
      } else {
        row.event_c = 1;
      }
    }
    out.rows[static_cast<std::size_t>(b)] = row;
    out.no_accept[static_cast<std::size_t>(b)] = accepted == 0 ? 1 : 0;

    // Diagnostics: does the true tuple pass the acceptance test?
    {
      scorer_.reset();
      if (c.relay) {
        const int ns = c.law1.ns;
        for (int i = 0; i < n; ++i) {
          int s = blk.s1[static_cast<std::size_t>(i)];
          int x = blk.tx1[(((static_cast<std::size_t>(blk.l_in) * mpc1 + blk.mp1) * ns + s) * mdc1 +
                           blk.mpp1) *
                              static_cast<std::size_t>(n) +
                          static_cast<std::size_t>(i)];
          scorer_.add(relay_ref_index(c, blk.coop[static_cast<std::size_t>(blk.l_in) * n + i],
                                      blk.z1[static_cast<std::size_t>(i)], x, s,
                                      blk.y[static_cast<std::size_t>(i)]));
        }
      } else {
        const int ns1 = c.law1.ns, ns2 = c.law2.ns, extra = c.law2.extra;
        for (int i = 0; i < n; ++i) {
          int s1 = blk.s1[static_cast<std::size_t>(i)];
          int s2 = blk.s2[static_cast<std::size_t>(i)];
          int z1c = blk.z1[static_cast<std::size_t>(i)];
          int e = c.causal ? z1c : 0;
          int x1 = blk.tx1[(((static_cast<std::size_t>(blk.l_in) * mpc1 + blk.mp1) * ns1 + s1) * mdc1 +
                            blk.mpp1) *
                               static_cast<std::size_t>(n) +
                           static_cast<std::size_t>(i)];
          int x2 = blk.tx2[((((static_cast<std::size_t>(blk.l_in) * mpc2 + blk.mp2) * ns2 + s2) * extra +
                             e) *
                                mdc2 +
                            blk.mpp2) *
                               static_cast<std::size_t>(n) +
                           static_cast<std::size_t>(i)];
          scorer_.add(mac_ref_index(c, blk.coop[static_cast<std::size_t>(blk.l_in) * n + i], z1c, x1,
                                    blk.z2[static_cast<std::size_t>(i)], x2, s1, s2,
                                    blk.y[static_cast<std::size_t>(i)]));
        }
      }
      if (scorer_.score().violation > 0) ++out.rejects;
    }

    carried = best_lc;
  }
  return errors;
}

void TrialRunner::collision_stats(const std::vector<BlockData>& blocks, TrialOutput& out) {
  const SimContext& c = ctx();
  buf1_.resize(static_cast<std::size_t>(c.n));
  for (const BlockData& blk : blocks) {
    int true_l1 = c.relay ? blk.l_out : blk.l_out / c.c2.bins;
    for (int mp = 0; mp < c.c1.msgs_prime; ++mp) {
      if (mp == blk.mp1) continue;
      assemble_crib1(blk, blk.l_in, mp, buf1_.data());
      if (std::equal(buf1_.begin(), buf1_.end(), blk.z1.begin())) continue;
      ++out.coll_pairs;
      if (static_cast<int>(bin_of(blk.bin_key1, buf1_.data(), c.n, c.c1.bins)) == true_l1)
        ++out.coll_hits;
    }
  }
}

TrialOutput TrialRunner::run(int trial) {
  const SimContext& c = ctx();
  TrialOutput out;
  out.rows.resize(static_cast<std::size_t>(c.B));

  RngStream trial_stream = RngStream(c.cfg.master_seed).sub("trial").sub(static_cast<std::uint64_t>(trial));
  std::vector<BlockData> blocks(static_cast<std::size_t>(c.B));
  int l = 0;  // l_0 is pinned
  for (int b = 0; b < c.B; ++b) {
    generate_block(trial_stream, b, blocks[static_cast<std::size_t>(b)]);
    encode_block(trial_stream, b, blocks[static_cast<std::size_t>(b)], l);
    l = blocks[static_cast<std::size_t>(b)].l_out;
  }

  collision_stats(blocks, out);
  out.errors = decode_all(blocks, out, trial);
  return out;
}

}  // namespace simdetail

void SchemeConfig::validate() const {
  if (n < 1) throw Error(Error::kInvalid, "scheme config: n must be at least 1");
  if (blocks < 1) throw Error(Error::kInvalid, "scheme config: blocks must be at least 1");
  if (trials < 1) throw Error(Error::kInvalid, "scheme config: trials must be at least 1");
  if (!(epsilon > 0)) throw Error(Error::kInvalid, "scheme config: epsilon must be positive");
  for (const RateSplit* s : {&enc1, &enc2})
    if (s->r_prime < 0 || s->r_dprime < 0 || s->r_tilde < 0)
      throw Error(Error::kInvalid, "scheme config: rates must be nonnegative");
}

RateSplit CodebookCounts::realized(int n) const {
  RateSplit r;
  r.r_prime = std::log2(static_cast<double>(msgs_prime)) / n;
  r.r_dprime = std::log2(static_cast<double>(msgs_dprime)) / n;
  r.r_tilde = std::log2(static_cast<double>(bins)) / n;
  return r;
}

CodebookCounts codebook_counts(const RateSplit& split, int n) {
  auto count = [n](double rate) {
    double raw = std::exp2(rate * n);
    long long c = static_cast<long long>(std::ceil(raw - 1e-9));
    return std::max(1, static_cast<int>(std::min<long long>(c, 1 << 28)));
  };
  CodebookCounts out;
  out.msgs_prime = count(split.r_prime);
  out.msgs_dprime = count(split.r_dprime);
  out.bins = count(split.r_tilde);
  return out;
}

SimResult run_trials(const ChannelSpec& spec, const Parameterization& param, const SchemeConfig& config) {
  auto t0 = std::chrono::steady_clock::now();
  simdetail::SimContext ctx = simdetail::make_context(spec, param, config);

  SimResult result;
  result.trials = config.trials;
  result.blocks = config.blocks;
  result.n = config.n;
  result.realized1 = ctx.c1.realized(config.n);
  if (!ctx.relay) result.realized2 = ctx.c2.realized(config.n);
  result.collision_expected = 1.0 / ctx.c1.bins;

  std::vector<simdetail::TrialOutput> outputs(static_cast<std::size_t>(config.trials));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    try {
      simdetail::TrialRunner runner(ctx);
      for (;;) {
        int t = next.fetch_add(1);
        if (t >= config.trials) break;
        outputs[static_cast<std::size_t>(t)] = runner.run(t);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  int n_threads = config.threads > 0 ? config.threads
                                     : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<int>(n_threads, config.trials);
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  std::uint64_t errors = 0, ev_a = 0, ev_b = 0, ev_c = 0, rejects = 0;
  result.rows.reserve(static_cast<std::size_t>(config.trials) * config.blocks);
  for (const auto& out : outputs) {
    for (const auto& row : out.rows) {
      result.rows.push_back(row);
      ev_a += row.event_a;
      ev_b += row.event_b;
      ev_c += row.event_c;
    }
    errors += static_cast<std::uint64_t>(out.errors);
    rejects += static_cast<std::uint64_t>(out.rejects);
    result.collision_pairs += out.coll_pairs;
    result.collision_hits += out.coll_hits;
  }

  double data_blocks = static_cast<double>(config.trials) * (config.blocks == 1 ? 1 : config.blocks - 1);
  result.block_error_rate = static_cast<double>(errors) / data_blocks;
  result.event_a_rate = static_cast<double>(ev_a) / data_blocks;
  result.event_b_rate = static_cast<double>(ev_b) / data_blocks;
  result.event_c_rate = static_cast<double>(ev_c) / data_blocks;
  result.true_tuple_reject_rate =
      static_cast<double>(rejects) / (static_cast<double>(config.trials) * config.blocks);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

void derive_rate_split(const ChannelSpec& spec, const Parameterization& param, double rate1, double rate2,
                       RateSplit& enc1, RateSplit& enc2) {
  if (rate1 < 0 || rate2 < 0) throw Error(Error::kInvalid, "operating rates must be nonnegative");
  if (is_relay_kind(spec.kind)) {
    RelayTerms t = eval_relay_terms(spec, param);
    enc1.r_prime = std::min(rate1, 0.9 * t.crib_entropy);
    enc1.r_dprime = rate1 - enc1.r_prime;
    double avail = std::max(t.coop_info - enc1.r_dprime, enc1.r_prime);
    enc1.r_tilde = enc1.r_prime + 0.5 * (avail - enc1.r_prime);
    enc2 = RateSplit{};
  } else {
    MacTerms t = eval_mac_terms(spec, param);
    enc1.r_prime = std::min(rate1, 0.9 * t.h1);
    enc1.r_dprime = rate1 - enc1.r_prime;
    enc2.r_prime = std::min(rate2, 0.9 * t.h2);
    enc2.r_dprime = rate2 - enc2.r_prime;
    double used = enc1.r_prime + enc1.r_dprime + enc2.r_prime + enc2.r_dprime;
    double slack = std::max(0.0, t.itot - used);
    enc1.r_tilde = enc1.r_prime + 0.25 * slack;
    enc2.r_tilde = enc2.r_prime + 0.25 * slack;
  }
}

}  // namespace binf
