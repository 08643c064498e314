#include "capacity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

namespace binf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTiny = 1e-12;

double clamp0(double v) { return v < 0 ? 0.0 : v; }

int hw_threads(int requested) {
  if (requested > 0) return requested;
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void check_rows(std::span<const double> table, int row_len, const char* what) {
  if (row_len < 1 || table.size() % static_cast<std::size_t>(row_len) != 0)
    throw Error(Error::kInvalid, std::string(what) + ": bad table shape");
  for (std::size_t r = 0; r < table.size() / static_cast<std::size_t>(row_len); ++r) {
    double total = 0;
    for (int v = 0; v < row_len; ++v) {
      double w = table[r * static_cast<std::size_t>(row_len) + static_cast<std::size_t>(v)];
      if (!(w >= 0)) throw Error(Error::kInvalid, std::string(what) + ": negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > kMassTol)
      throw Error(Error::kInvalid,
                  std::string(what) + ": row " + std::to_string(r) + " sums to " + std::to_string(total));
  }
}

// H(full) - H(projection), where the projection sums consecutive blocks of
// `inner` cells. Both tables share the leading axes, so this is the
// conditional entropy of the inner axes given the leading ones.
double cond_entropy(std::span<const double> flat, int inner) {
  double h_full = 0, h_base = 0;
  std::size_t blocks = flat.size() / static_cast<std::size_t>(inner);
  for (std::size_t b = 0; b < blocks; ++b) {
    double mass = 0;
    for (int j = 0; j < inner; ++j) {
      double p = flat[b * static_cast<std::size_t>(inner) + static_cast<std::size_t>(j)];
      if (p > 0) {
        h_full -= p * std::log2(p);
        mass += p;
      }
    }
    if (mass > 0) h_base -= mass * std::log2(mass);
  }
  return clamp0(h_full - h_base);
}

}  // namespace

double binary_entropy(double q) {
  double h = 0;
  if (q > 0) h -= q * std::log2(q);
  if (q < 1) h -= (1 - q) * std::log2(1 - q);
  return h;
}

ToyRates toy_rates(double p) {
  if (!(p > 0.0) || !(p < 0.5))
    throw Error(Error::kInvalid, "toy rates: p must lie in the open interval (0, 0.5)");
  return ToyRates{1.0 - p, 1.0 - binary_entropy(p / 2)};
}

int coop_size(const ChannelSpec& spec, const Parameterization& param) {
  if (spec.kind == ChannelKind::kRelay || spec.kind == ChannelKind::kStateRelay)
    return spec.relay_input.size;
  return param.u_size;
}

int u_cardinality_cap(const ChannelSpec& spec) {
  switch (spec.kind) {
    case ChannelKind::kRelay:
    case ChannelKind::kStateRelay:
      return 0;
    case ChannelKind::kStateRelayNoDelay:
      return spec.states[0].size * (spec.inputs[0].size * spec.relay_input.size - 1) + 2;
    case ChannelKind::kStateMac:
    case ChannelKind::kStateMacCausal: {
      int s12 = spec.states[0].size * spec.states[1].size;
      int by_y = s12 * (spec.output.size - 1) + 4;
      int by_x = s12 * (spec.inputs[0].size * spec.inputs[1].size - 1) + 3;
      return std::min(by_y, by_x);
    }
  }
  return 0;
}

void validate_parameterization(const ChannelSpec& spec, const Parameterization& param) {
  if (param.kind != spec.kind)
    throw Error(Error::kKind, "parameterization kind does not match the channel spec");
  int cap = u_cardinality_cap(spec);
  if (cap > 0 && (param.u_size < 1 || param.u_size > cap))
    throw Error(Error::kInvalid, "u_size " + std::to_string(param.u_size) + " outside the cardinality cap " +
                                     std::to_string(cap));
  int nc = coop_size(spec, param);
  if (static_cast<int>(param.coop.size()) != nc)
    throw Error(Error::kInvalid, "cooperation factor has the wrong size");
  check_rows(param.coop, nc, "cooperation factor");

  if (is_relay_kind(spec.kind)) {
    int ns = spec.states[0].size, nx = spec.inputs[0].size;
    if (static_cast<int>(param.input1.size()) != nc * ns * nx)
      throw Error(Error::kInvalid, "input factor has the wrong size");
    check_rows(param.input1, nx, "input factor");
    if (spec.kind == ChannelKind::kStateRelayNoDelay) {
      int nz = spec.cribs[0].size, nxr = spec.relay_input.size;
      if (static_cast<int>(param.relay_map.size()) != param.u_size * nz)
        throw Error(Error::kInvalid, "relay map has the wrong size");
      for (int v : param.relay_map)
        if (v < 0 || v >= nxr) throw Error(Error::kInvalid, "relay map entry out of range");
    } else if (!param.relay_map.empty()) {
      throw Error(Error::kInvalid, "relay map is only meaningful for the no-delay kind");
    }
  } else {
    int t1 = spec.states[0].size, t2 = spec.states[1].size;
    int n1 = spec.inputs[0].size, n2 = spec.inputs[1].size, m1 = spec.cribs[0].size;
    if (static_cast<int>(param.input1.size()) != nc * t1 * n1)
      throw Error(Error::kInvalid, "encoder-1 factor has the wrong size");
    check_rows(param.input1, n1, "encoder-1 factor");
    std::size_t want2 = static_cast<std::size_t>(nc) * t2 * n2;
    if (spec.kind == ChannelKind::kStateMacCausal) want2 *= static_cast<std::size_t>(m1);
    if (param.input2.size() != want2)
      throw Error(Error::kInvalid, "encoder-2 factor has the wrong size");
    check_rows(param.input2, n2, "encoder-2 factor");
  }
}

// ---------------------------------------------------------------------------
// Term evaluators. These carry preallocated scratch so grid search does not
// allocate; one instance per thread.

class RelayEvaluator {
 public:
  RelayEvaluator(const ChannelSpec& spec, int coop)
      : spec_(&spec),
        ns_(spec.states[0].size),
        nx_(spec.inputs[0].size),
        nxr_(spec.relay_input.size),
        ny_(spec.output.size),
        nz_(spec.cribs[0].size),
        nc_(coop),
        nodelay_(spec.kind == ChannelKind::kStateRelayNoDelay) {
    chan_ = spec.channel.raw().data();
    row_h_.resize(static_cast<std::size_t>(ns_) * nx_ * nxr_);
    for (std::size_t r = 0; r < row_h_.size(); ++r) row_h_[r] = entropy_of_weights(spec.channel.row(r));
    zt_.resize(static_cast<std::size_t>(ns_) * nx_ * (nodelay_ ? 1 : nxr_));
    for (int s = 0; s < ns_; ++s)
      for (int x = 0; x < nx_; ++x) {
        if (nodelay_) {
          zt_[static_cast<std::size_t>(s) * nx_ + x] = spec.z_relay(s, x, 0);
        } else {
          for (int xr = 0; xr < nxr_; ++xr)
            zt_[(static_cast<std::size_t>(s) * nx_ + x) * nxr_ + xr] = spec.z_relay(s, x, xr);
        }
      }
    state_h_ = entropy_of_weights(spec.state_pmf.weights());
    psy_.resize(static_cast<std::size_t>(ns_) * ny_);
    psc_.resize(static_cast<std::size_t>(ns_) * nc_);
    pscz_.resize(static_cast<std::size_t>(ns_) * nc_ * nz_);
    psczy_.resize(static_cast<std::size_t>(ns_) * nc_ * nz_ * ny_);
  }

  RelayTerms eval(const Parameterization& p) {
    std::fill(psy_.begin(), psy_.end(), 0.0);
    std::fill(psc_.begin(), psc_.end(), 0.0);
    std::fill(pscz_.begin(), pscz_.end(), 0.0);
    std::fill(psczy_.begin(), psczy_.end(), 0.0);
    double hy_scx = 0;

    const double* ps = spec_->state_pmf.weights().data();
    for (int s = 0; s < ns_; ++s) {
      if (ps[s] == 0) continue;
      for (int c = 0; c < nc_; ++c) {
        double wc = ps[s] * p.coop[static_cast<std::size_t>(c)];
        if (wc == 0) continue;
        psc_[static_cast<std::size_t>(s) * nc_ + c] = wc;
        const double* xrow = p.input1.data() + (static_cast<std::size_t>(c) * ns_ + s) * nx_;
        for (int x = 0; x < nx_; ++x) {
          double w = wc * xrow[x];
          if (w == 0) continue;
          int z = nodelay_ ? zt_[static_cast<std::size_t>(s) * nx_ + x]
                           : zt_[(static_cast<std::size_t>(s) * nx_ + x) * nxr_ + c];
          int xr = nodelay_ ? p.relay_map[static_cast<std::size_t>(c) * nz_ + z] : c;
          std::size_t row_idx = (static_cast<std::size_t>(s) * nx_ + x) * nxr_ + static_cast<std::size_t>(xr);
          hy_scx += w * row_h_[row_idx];
          std::size_t scz = (static_cast<std::size_t>(s) * nc_ + c) * nz_ + static_cast<std::size_t>(z);
          pscz_[scz] += w;
          const double* yrow = chan_ + row_idx * static_cast<std::size_t>(ny_);
          for (int y = 0; y < ny_; ++y) {
            double wy = w * yrow[y];
            if (wy == 0) continue;
            psy_[static_cast<std::size_t>(s) * ny_ + y] += wy;
            psczy_[scz * static_cast<std::size_t>(ny_) + static_cast<std::size_t>(y)] += wy;
          }
        }
      }
    }

    RelayTerms t;
    double h_sy = entropy_of_weights(psy_);
    double h_scz = entropy_of_weights(pscz_);
    double h_sc = entropy_of_weights(psc_);
    double h_sczy = entropy_of_weights(psczy_);
    t.coop_info = clamp0(h_sy - state_h_ - hy_scx);
    t.crib_entropy = clamp0(h_scz - h_sc);
    t.direct_info = clamp0(h_sczy - h_scz - hy_scx);
    return t;
  }

 private:
  const ChannelSpec* spec_;
  int ns_, nx_, nxr_, ny_, nz_, nc_;
  bool nodelay_;
  const double* chan_;
  double state_h_ = 0;
  std::vector<double> row_h_;
  std::vector<int> zt_;
  std::vector<double> psy_, psc_, pscz_, psczy_;
};

class MacEvaluator {
 public:
  MacEvaluator(const ChannelSpec& spec, int coop)
      : spec_(&spec),
        t1_(spec.states[0].size),
        t2_(spec.states[1].size),
        n1_(spec.inputs[0].size),
        n2_(spec.inputs[1].size),
        ny_(spec.output.size),
        m1_(spec.cribs[0].size),
        m2_(spec.cribs[1].size),
        nu_(coop),
        causal_(spec.kind == ChannelKind::kStateMacCausal) {
    chan_ = spec.channel.raw().data();
    row_h_.resize(static_cast<std::size_t>(t1_) * t2_ * n1_ * n2_);
    for (std::size_t r = 0; r < row_h_.size(); ++r) row_h_[r] = entropy_of_weights(spec.channel.row(r));
    z1_.resize(static_cast<std::size_t>(t1_) * n1_);
    for (int s = 0; s < t1_; ++s)
      for (int x = 0; x < n1_; ++x) z1_[static_cast<std::size_t>(s) * n1_ + x] = spec.z_mac(0, s, x);
    z2_.resize(static_cast<std::size_t>(t2_) * n2_);
    for (int s = 0; s < t2_; ++s)
      for (int x = 0; x < n2_; ++x) z2_[static_cast<std::size_t>(s) * n2_ + x] = spec.z_mac(1, s, x);

    a_.resize(static_cast<std::size_t>(nu_) * n2_ * m1_ * t1_ * t2_ * ny_);
    b_.resize(static_cast<std::size_t>(nu_) * n1_ * m2_ * t1_ * t2_ * ny_);
    c_.resize(static_cast<std::size_t>(nu_) * m1_ * m2_ * t1_ * t2_ * ny_);
    d_.resize(static_cast<std::size_t>(t1_) * t2_ * ny_);
    e1_.resize(static_cast<std::size_t>(nu_) * t1_ * m1_);
    e2_.resize(static_cast<std::size_t>(nu_) * t2_ * (causal_ ? m1_ : 1) * m2_);
    f_.resize(static_cast<std::size_t>(nu_) * t1_ * t2_ * m1_ * m2_);
  }

  MacTerms eval(const Parameterization& p) {
    std::fill(a_.begin(), a_.end(), 0.0);
    std::fill(b_.begin(), b_.end(), 0.0);
    std::fill(c_.begin(), c_.end(), 0.0);
    std::fill(d_.begin(), d_.end(), 0.0);
    std::fill(e1_.begin(), e1_.end(), 0.0);
    std::fill(e2_.begin(), e2_.end(), 0.0);
    std::fill(f_.begin(), f_.end(), 0.0);
    double hy_all = 0;

    const double* ps = spec_->state_pmf.weights().data();
    for (int u = 0; u < nu_; ++u) {
      double pu = p.coop[static_cast<std::size_t>(u)];
      if (pu == 0) continue;
      for (int s1 = 0; s1 < t1_; ++s1)
        for (int s2 = 0; s2 < t2_; ++s2) {
          double ws = pu * ps[s1 * t2_ + s2];
          if (ws == 0) continue;
          const double* row1 = p.input1.data() + (static_cast<std::size_t>(u) * t1_ + s1) * n1_;
          for (int x1 = 0; x1 < n1_; ++x1) {
            double w1 = ws * row1[x1];
            if (w1 == 0) continue;
            int z1 = z1_[static_cast<std::size_t>(s1) * n1_ + x1];
            e1_[(static_cast<std::size_t>(u) * t1_ + s1) * m1_ + z1] += w1;
            const double* row2 =
                causal_ ? p.input2.data() + ((static_cast<std::size_t>(u) * t2_ + s2) * m1_ + z1) * n2_
                        : p.input2.data() + (static_cast<std::size_t>(u) * t2_ + s2) * n2_;
            for (int x2 = 0; x2 < n2_; ++x2) {
              double w = w1 * row2[x2];
              if (w == 0) continue;
              int z2 = z2_[static_cast<std::size_t>(s2) * n2_ + x2];
              std::size_t row_idx =
                  ((static_cast<std::size_t>(s1) * t2_ + s2) * n1_ + x1) * n2_ + static_cast<std::size_t>(x2);
              hy_all += w * row_h_[row_idx];
              if (causal_)
                e2_[((static_cast<std::size_t>(u) * t2_ + s2) * m1_ + z1) * m2_ + z2] += w;
              else
                e2_[(static_cast<std::size_t>(u) * t2_ + s2) * m2_ + z2] += w;
              f_[(((static_cast<std::size_t>(u) * t1_ + s1) * t2_ + s2) * m1_ + z1) * m2_ + z2] += w;
              std::size_t ss = static_cast<std::size_t>(s1) * t2_ + s2;
              std::size_t ai = ((((static_cast<std::size_t>(u) * n2_ + x2) * m1_ + z1) * t1_ * t2_) + ss) * ny_;
              std::size_t bi = ((((static_cast<std::size_t>(u) * n1_ + x1) * m2_ + z2) * t1_ * t2_) + ss) * ny_;
              std::size_t ci = ((((static_cast<std::size_t>(u) * m1_ + z1) * m2_ + z2) * t1_ * t2_) + ss) * ny_;
              const double* yrow = chan_ + row_idx * static_cast<std::size_t>(ny_);
              for (int y = 0; y < ny_; ++y) {
                double wy = w * yrow[y];
                if (wy == 0) continue;
                a_[ai + y] += wy;
                b_[bi + y] += wy;
                c_[ci + y] += wy;
                d_[ss * ny_ + y] += wy;
              }
            }
          }
        }
    }

    MacTerms t;
    t.i1 = clamp0(cond_entropy(a_, ny_) - hy_all);
    t.i2 = clamp0(cond_entropy(b_, ny_) - hy_all);
    t.i12 = clamp0(cond_entropy(c_, ny_) - hy_all);
    t.itot = clamp0(cond_entropy(d_, ny_) - hy_all);
    t.h1 = cond_entropy(e1_, m1_);
    t.h2 = cond_entropy(e2_, m2_);
    t.h12 = cond_entropy(f_, m1_ * m2_);
    return t;
  }

 private:
  const ChannelSpec* spec_;
  int t1_, t2_, n1_, n2_, ny_, m1_, m2_, nu_;
  bool causal_;
  const double* chan_;
  std::vector<double> row_h_;
  std::vector<int> z1_, z2_;
  std::vector<double> a_, b_, c_, d_, e1_, e2_, f_;
};

RelayTerms eval_relay_terms(const ChannelSpec& spec, const Parameterization& param) {
  if (!is_relay_kind(spec.kind)) throw Error(Error::kKind, "relay terms requested for a MAC kind");
  validate_parameterization(spec, param);
  RelayEvaluator ev(spec, coop_size(spec, param));
  return ev.eval(param);
}

MacTerms eval_mac_terms(const ChannelSpec& spec, const Parameterization& param) {
  if (!is_mac_kind(spec.kind)) throw Error(Error::kKind, "MAC terms requested for a relay kind");
  validate_parameterization(spec, param);
  MacEvaluator ev(spec, param.u_size);
  return ev.eval(param);
}

MacPolytope polytope_from_terms(const MacTerms& t) {
  MacPolytope p;
  p.r1_cap = t.i1 + t.h1;
  p.r2_cap = t.i2 + t.h2;
  p.sum_cap_joint = t.i12 + t.h12;
  p.sum_cap_total = t.itot;
  return p;
}

double eval_objective(const ChannelSpec& spec, const Parameterization& param) {
  RelayTerms t = eval_relay_terms(spec, param);
  return std::min(t.coop_info, t.crib_entropy + t.direct_info);
}

MacPolytope eval_polytope(const ChannelSpec& spec, const Parameterization& param) {
  return polytope_from_terms(eval_mac_terms(spec, param));
}

ConstraintSystem build_constraints(const ChannelSpec& spec, const Parameterization& param) {
  ConstraintSystem sys;
  if (is_relay_kind(spec.kind)) {
    RelayTerms t = eval_relay_terms(spec, param);
    sys.variables = {"R_prime", "R_dprime", "R_tilde"};
    sys.rows = {
        {"bin_cover", {{"R_prime", 1.0}, {"R_tilde", -1.0}}, 0.0},
        {"crib_entropy", {{"R_prime", 1.0}}, t.crib_entropy},
        {"direct_info", {{"R_dprime", 1.0}}, t.direct_info},
        {"coop_info", {{"R_tilde", 1.0}, {"R_dprime", 1.0}}, t.coop_info},
    };
  } else {
    MacTerms t = eval_mac_terms(spec, param);
    sys.variables = {"R1_prime", "R1_dprime", "R1_tilde", "R2_prime", "R2_dprime", "R2_tilde"};
    sys.rows = {
        {"bin_cover_1", {{"R1_prime", 1.0}, {"R1_tilde", -1.0}}, 0.0},
        {"crib_entropy_1", {{"R1_prime", 1.0}}, t.h1},
        {"bin_cover_2", {{"R2_prime", 1.0}, {"R2_tilde", -1.0}}, 0.0},
        {"crib_entropy_2", {{"R2_prime", 1.0}}, t.h2},
        {"direct_info_2", {{"R2_dprime", 1.0}}, t.i2},
        {"direct_info_1", {{"R1_dprime", 1.0}}, t.i1},
        {"direct_info_sum", {{"R1_dprime", 1.0}, {"R2_dprime", 1.0}}, t.i12},
        {"coop_info_total",
         {{"R1_tilde", 1.0}, {"R2_tilde", 1.0}, {"R1_dprime", 1.0}, {"R2_dprime", 1.0}},
         t.itot},
    };
  }
  return sys;
}

// ---------------------------------------------------------------------------
// Simplex grids and the enumeration layout.

namespace {

using u128 = unsigned __int128;
constexpr u128 kCountCap = static_cast<u128>(1) << 100;

u128 comb_capped(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  u128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (r > kCountCap) return kCountCap;
  }
  return r;
}

std::mutex g_grid_mutex;
std::map<std::pair<int, int>, std::vector<std::vector<double>>> g_grid_cache;

void build_simplex(int cells, int m, int pos, int remaining, std::vector<int>& nums,
                   std::vector<std::vector<double>>& out) {
  if (pos == cells - 1) {
    nums[static_cast<std::size_t>(pos)] = remaining;
    std::vector<double> row(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) row[static_cast<std::size_t>(i)] = static_cast<double>(nums[i]) / m;
    out.push_back(std::move(row));
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    nums[static_cast<std::size_t>(pos)] = v;
    build_simplex(cells, m, pos + 1, remaining - v, nums, out);
  }
}

const std::vector<std::vector<double>>& simplex_grid(int cells, int m) {
  std::lock_guard<std::mutex> lock(g_grid_mutex);
  auto key = std::make_pair(cells, m);
  auto it = g_grid_cache.find(key);
  if (it != g_grid_cache.end()) return it->second;
  std::vector<std::vector<double>> grid;
  std::vector<int> nums(static_cast<std::size_t>(cells));
  build_simplex(cells, m, 0, m, nums, grid);
  return g_grid_cache.emplace(key, std::move(grid)).first->second;
}

// Which of the parameterization vectors a dial writes into.
enum class Target { kCoop, kInput1, kInput2 };

struct Dial {
  Target target = Target::kCoop;
  int offset = 0;  // start of the row inside the target vector
  int row_len = 0;
  const std::vector<std::vector<double>>* grid = nullptr;
};

struct EnumLayout {
  std::vector<Dial> dials;
  std::vector<std::vector<int>> maps;  // no-delay kind; empty otherwise
  std::uint64_t total = 0;
  double step_small = 0, step_big = 0;
  std::uint64_t maps_total = 0;
  bool input2_compact = false;  // z1-independent restriction in force
  int compact2_size = 0;
};

struct FactorShape {
  Target target;
  int rows;      // number of conditional rows (1 for the coop marginal)
  int row_len;
  int cells;     // rows * row_len, decides the step coarsening
};

std::vector<FactorShape> factor_shapes(const ChannelSpec& spec, int nc, bool z1_independent) {
  std::vector<FactorShape> shapes;
  shapes.push_back({Target::kCoop, 1, nc, nc});
  if (is_relay_kind(spec.kind)) {
    int rows = nc * spec.states[0].size;
    shapes.push_back({Target::kInput1, rows, spec.inputs[0].size, rows * spec.inputs[0].size});
  } else {
    int rows1 = nc * spec.states[0].size;
    shapes.push_back({Target::kInput1, rows1, spec.inputs[0].size, rows1 * spec.inputs[0].size});
    int rows2 = nc * spec.states[1].size;
    if (spec.kind == ChannelKind::kStateMacCausal && !z1_independent) rows2 *= spec.cribs[0].size;
    shapes.push_back({Target::kInput2, rows2, spec.inputs[1].size, rows2 * spec.inputs[1].size});
  }
  return shapes;
}

std::uint64_t resolve_map_count(const ChannelSpec& spec, int nc, const SolveOptions& opts,
                                std::uint64_t& maps_total) {
  if (spec.kind != ChannelKind::kStateRelayNoDelay) {
    maps_total = 0;
    return 1;
  }
  u128 total = 1;
  for (int i = 0; i < nc * spec.cribs[0].size; ++i) {
    total *= static_cast<unsigned>(spec.relay_input.size);
    if (total > kCountCap) break;
  }
  maps_total = total > kCountCap ? std::numeric_limits<std::uint64_t>::max()
                                 : static_cast<std::uint64_t>(total);
  if (opts.map_mode == SolveOptions::MapMode::kExhaustive) {
    if (maps_total > static_cast<std::uint64_t>(opts.map_cap))
      throw Error(Error::kBudget, "relay-map space too large for exhaustive enumeration");
    return maps_total;
  }
  if (opts.map_mode == SolveOptions::MapMode::kSampled)
    return std::min<std::uint64_t>(maps_total, static_cast<std::uint64_t>(opts.map_cap));
  return std::min<std::uint64_t>(maps_total, static_cast<std::uint64_t>(opts.map_cap));
}

// Step ladder: the requested level first, then halvings while even, then the
// fixed coarse tail. Any level chosen from the ladder of step h is a subgrid
// of some level of the ladder of step h/2, which keeps refinement monotone.
std::vector<int> step_ladder(int m0) {
  std::vector<int> ms;
  int m = m0;
  while (m >= 2 && m % 2 == 0) {
    ms.push_back(m);
    m /= 2;
  }
  for (int t : {4, 2})
    if (ms.empty() || t < ms.back()) ms.push_back(t);
  return ms;
}

EnumLayout make_layout(const ChannelSpec& spec, int nc, const SolveOptions& opts) {
  double inv = 1.0 / opts.grid_step;
  int m0 = static_cast<int>(std::llround(inv));
  if (!(opts.grid_step > 0) || std::abs(inv - m0) > 1e-6 || m0 % 2 != 0)
    throw Error(Error::kInvalid, "grid step must be the reciprocal of an even integer (e.g. 0.05)");

  auto shapes = factor_shapes(spec, nc, opts.z1_independent);
  EnumLayout layout;
  std::uint64_t n_maps = resolve_map_count(spec, nc, opts, layout.maps_total);

  int chosen_m = 0;
  for (int m : step_ladder(m0)) {
    u128 count = n_maps;
    for (const auto& sh : shapes) {
      int den = sh.cells <= 4 ? m : m / 2;
      u128 per_row = comb_capped(den + sh.row_len - 1, sh.row_len - 1);
      for (int r = 0; r < sh.rows && count <= kCountCap; ++r) {
        count *= per_row;
        if (count > static_cast<u128>(opts.enum_cap)) break;
      }
      if (count > static_cast<u128>(opts.enum_cap)) break;
    }
    if (count <= static_cast<u128>(opts.enum_cap)) {
      chosen_m = m;
      break;
    }
  }
  if (chosen_m == 0)
    throw Error(Error::kBudget, "alphabets too large for exhaustive grid enumeration; raise enum_cap");

  layout.step_small = 1.0 / chosen_m;
  layout.step_big = 2.0 / chosen_m;
  layout.input2_compact = opts.z1_independent && spec.kind == ChannelKind::kStateMacCausal;

  std::uint64_t total = 1;
  for (const auto& sh : shapes) {
    int den = sh.cells <= 4 ? chosen_m : chosen_m / 2;
    const auto& grid = simplex_grid(sh.row_len, den);
    for (int r = 0; r < sh.rows; ++r) {
      Dial d;
      d.target = sh.target;
      d.offset = r * sh.row_len;
      d.row_len = sh.row_len;
      d.grid = &grid;
      layout.dials.push_back(d);
      total *= grid.size();
    }
    if (sh.target == Target::kInput2) layout.compact2_size = sh.rows * sh.row_len;
  }

  if (spec.kind == ChannelKind::kStateRelayNoDelay) {
    int cells = nc * spec.cribs[0].size;
    int nxr = spec.relay_input.size;
    if (layout.maps_total <= static_cast<std::uint64_t>(opts.map_cap) &&
        opts.map_mode != SolveOptions::MapMode::kSampled) {
      for (std::uint64_t code = 0; code < layout.maps_total; ++code) {
        std::vector<int> map(static_cast<std::size_t>(cells));
        std::uint64_t rem = code;
        for (int i = 0; i < cells; ++i) {
          map[static_cast<std::size_t>(i)] = static_cast<int>(rem % static_cast<std::uint64_t>(nxr));
          rem /= static_cast<std::uint64_t>(nxr);
        }
        layout.maps.push_back(std::move(map));
      }
    } else {
      RngStream rng = RngStream(opts.seed).sub("relay-maps");
      for (std::uint64_t k = 0; k < n_maps; ++k) {
        std::vector<int> map(static_cast<std::size_t>(cells));
        for (int i = 0; i < cells; ++i)
          map[static_cast<std::size_t>(i)] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(nxr)));
        layout.maps.push_back(std::move(map));
      }
    }
    total *= layout.maps.size();
  }

  layout.total = total;
  return layout;
}

// Writes the grid point `index` into a parameterization. `compact2` receives
// the unexpanded encoder-2 rows when the z1-independent restriction is on.
void assemble(const EnumLayout& layout, std::uint64_t index, Parameterization& out,
              std::vector<double>& compact2) {
  std::uint64_t rem = index;
  if (!layout.maps.empty()) {
    std::uint64_t n = layout.maps.size();
    const auto& map = layout.maps[static_cast<std::size_t>(rem % n)];
    rem /= n;
    out.relay_map = map;
  }
  for (std::size_t d = layout.dials.size(); d-- > 0;) {
    const Dial& dial = layout.dials[d];
    std::uint64_t n = dial.grid->size();
    const auto& row = (*dial.grid)[static_cast<std::size_t>(rem % n)];
    rem /= n;
    double* dst = nullptr;
    switch (dial.target) {
      case Target::kCoop: dst = out.coop.data() + dial.offset; break;
      case Target::kInput1: dst = out.input1.data() + dial.offset; break;
      case Target::kInput2:
        dst = (layout.input2_compact ? compact2.data() : out.input2.data()) + dial.offset;
        break;
    }
    std::copy(row.begin(), row.end(), dst);
  }
}

void expand_compact2(const ChannelSpec& spec, int nc, const std::vector<double>& compact2,
                     Parameterization& out) {
  int t2 = spec.states[1].size, m1 = spec.cribs[0].size, n2 = spec.inputs[1].size;
  for (int u = 0; u < nc; ++u)
    for (int s2 = 0; s2 < t2; ++s2) {
      const double* src = compact2.data() + (static_cast<std::size_t>(u) * t2 + s2) * n2;
      for (int z1 = 0; z1 < m1; ++z1) {
        double* dst =
            out.input2.data() + ((static_cast<std::size_t>(u) * t2 + s2) * m1 + z1) * n2;
        std::copy(src, src + n2, dst);
      }
    }
}

Parameterization blank_parameterization(const ChannelSpec& spec, int nc) {
  Parameterization p;
  p.kind = spec.kind;
  p.u_size = nc;
  p.coop.assign(static_cast<std::size_t>(nc), 0.0);
  if (is_relay_kind(spec.kind)) {
    p.input1.assign(static_cast<std::size_t>(nc) * spec.states[0].size * spec.inputs[0].size, 0.0);
    if (spec.kind == ChannelKind::kStateRelayNoDelay)
      p.relay_map.assign(static_cast<std::size_t>(nc) * spec.cribs[0].size, 0);
  } else {
    p.input1.assign(static_cast<std::size_t>(nc) * spec.states[0].size * spec.inputs[0].size, 0.0);
    std::size_t sz2 = static_cast<std::size_t>(nc) * spec.states[1].size * spec.inputs[1].size;
    if (spec.kind == ChannelKind::kStateMacCausal) sz2 *= static_cast<std::size_t>(spec.cribs[0].size);
    p.input2.assign(sz2, 0.0);
  }
  if (spec.kind == ChannelKind::kRelay || spec.kind == ChannelKind::kStateRelay)
    p.u_size = 1;  // no auxiliary
  return p;
}

// Rows the polish phase may perturb, as (target vector, offset, len, step).
struct RowRef {
  Target target;
  int offset;
  int len;
  double step;
};

}  // namespace

// ---------------------------------------------------------------------------

bool RateRegion::contains(double r1, double r2, double slack) const {
  if (boundary.empty()) return false;
  if (r1 < -slack || r2 < -slack) return false;
  double last_r1 = boundary.back().r1;
  if (r1 > last_r1 + slack) return false;
  std::size_t k = 0;
  if (r1 > slack) {
    double idx = (r1 - slack) / r1_step;
    k = static_cast<std::size_t>(std::ceil(idx - 1e-12));
    if (k >= boundary.size()) k = boundary.size() - 1;
  }
  return r2 <= boundary[k].r2 + slack;
}

double RateRegion::sum_rate_max() const {
  double best = 0;
  for (const auto& p : boundary) best = std::max(best, p.r1 + p.r2);
  return best;
}

namespace {

const char* kMacLabels[3] = {"r2_bound", "sum_bound_joint", "sum_bound_total"};

struct MacAccum {
  std::vector<double> r2max;   // per r1 grid index; -1 = no polytope reaches
  std::vector<int8_t> label;
  double best_sum = -1;
  double best_sum_itot = -1;   // tie-break: prefer total-information headroom
  Parameterization best_sum_param;

  void init(std::size_t k) {
    r2max.assign(k, -1.0);
    label.assign(k, 0);
  }

  void add(const MacPolytope& poly, double step, const Parameterization& p) {
    double sum_cap = std::min(poly.sum_cap_joint, poly.sum_cap_total);
    double sum_here = std::min(sum_cap, poly.r1_cap + poly.r2_cap);
    if (sum_here > best_sum + kTiny ||
        (sum_here > best_sum - kTiny && poly.sum_cap_total > best_sum_itot + kTiny)) {
      best_sum = sum_here;
      best_sum_itot = poly.sum_cap_total;
      best_sum_param = p;
    }
    for (std::size_t k = 0; k < r2max.size(); ++k) {
      double r1 = static_cast<double>(k) * step;
      if (r1 > poly.r1_cap + kTiny) break;
      double from_sum = sum_cap - r1;
      double r2 = std::min(poly.r2_cap, from_sum);
      if (r2 < -kTiny) break;
      r2 = std::max(0.0, r2);
      if (r2 > r2max[k] + kTiny) {
        r2max[k] = r2;
        if (poly.r2_cap <= from_sum + kTiny)
          label[k] = 0;
        else
          label[k] = poly.sum_cap_joint <= poly.sum_cap_total + kTiny ? 1 : 2;
      }
    }
  }

  void merge(const MacAccum& other) {
    for (std::size_t k = 0; k < r2max.size(); ++k)
      if (other.r2max[k] > r2max[k] + kTiny) {
        r2max[k] = other.r2max[k];
        label[k] = other.label[k];
      }
    if (other.best_sum > best_sum + kTiny ||
        (other.best_sum > best_sum - kTiny && other.best_sum_itot > best_sum_itot + kTiny)) {
      best_sum = other.best_sum;
      best_sum_itot = other.best_sum_itot;
      best_sum_param = other.best_sum_param;
    }
  }
};

double support_value(const MacPolytope& poly, double w) {
  double sum_cap = std::min(poly.sum_cap_joint, poly.sum_cap_total);
  double best = 0;
  auto consider = [&](double r1, double r2) {
    if (r1 < 0 || r2 < 0) return;
    best = std::max(best, w * r1 + (1 - w) * r2);
  };
  consider(std::min(poly.r1_cap, sum_cap), 0);
  consider(0, std::min(poly.r2_cap, sum_cap));
  consider(poly.r1_cap, std::min(poly.r2_cap, sum_cap - poly.r1_cap));
  consider(std::min(poly.r1_cap, sum_cap - poly.r2_cap), poly.r2_cap);
  return best;
}

}  // namespace

namespace {

// Mutable view of one perturbable row of a parameterization.
double* row_base(Parameterization& p, std::vector<double>& compact2, bool use_compact2,
                 const RowRef& row) {
  switch (row.target) {
    case Target::kCoop: return p.coop.data() + row.offset;
    case Target::kInput1: return p.input1.data() + row.offset;
    case Target::kInput2: return (use_compact2 ? compact2.data() : p.input2.data()) + row.offset;
  }
  return nullptr;
}

}  // namespace

Solution solve(const ChannelSpec& spec, const SolveOptions& opts) {
  spec.validate();
  if (opts.z1_independent && spec.kind != ChannelKind::kStateMacCausal)
    throw Error(Error::kInvalid, "the z1-independent restriction applies only to state_mac_causal");

  const bool relay = is_relay_kind(spec.kind);
  const int cap = u_cardinality_cap(spec);
  int nc;
  if (spec.kind == ChannelKind::kRelay || spec.kind == ChannelKind::kStateRelay) {
    nc = spec.relay_input.size;
  } else {
    nc = opts.u_size > 0 ? opts.u_size : std::min(3, cap);
    if (nc < 1 || nc > cap)
      throw Error(Error::kInvalid, "u_size " + std::to_string(nc) + " outside the cardinality cap " +
                                       std::to_string(cap));
  }

  EnumLayout layout = make_layout(spec, nc, opts);

  Solution sol;
  sol.kind = spec.kind;
  sol.is_region = !relay;
  sol.base_step = opts.grid_step;
  sol.cert_step_small = layout.step_small;
  sol.cert_step_big = layout.step_big;
  sol.grid_points = layout.total;
  sol.u_size = nc;
  sol.u_cap = cap;
  sol.maps_total = layout.maps_total;
  sol.maps_searched = layout.maps.size();

  // r1 grid extent for MAC regions: r1 <= i1 + h1 <= log2|Y| + log2|Z1|.
  std::size_t region_len = 1;
  if (!relay) {
    double rmax = std::log2(static_cast<double>(spec.output.size)) +
                  std::log2(static_cast<double>(spec.cribs[0].size));
    region_len = static_cast<std::size_t>(std::floor(rmax / opts.grid_step + 1e-9)) + 2;
  }

  struct ChunkOut {
    double best = kNegInf;
    double best_coop = kNegInf;  // tie-break: prefer cooperative headroom
    std::uint64_t index = 0;
    MacAccum mac;
    std::vector<double> wbest;
    std::vector<std::uint64_t> wbest_idx;
  };

  const int n_weights = relay ? 1 : static_cast<int>(std::llround(1.0 / opts.weight_step)) + 1;
  const std::uint64_t n_chunks = std::min<std::uint64_t>(layout.total, 64);
  std::vector<ChunkOut> chunk_out(n_chunks);
  std::atomic<std::uint64_t> next_chunk{0};

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() { try {
    Parameterization p = blank_parameterization(spec, nc);
    std::vector<double> compact2(static_cast<std::size_t>(layout.input2_compact ? layout.compact2_size : 0));
    std::optional<RelayEvaluator> rev;
    std::optional<MacEvaluator> mev;
    if (relay)
      rev.emplace(spec, nc);
    else
      mev.emplace(spec, nc);

    for (;;) {
      std::uint64_t chunk = next_chunk.fetch_add(1);
      if (chunk >= n_chunks) break;
      std::uint64_t lo = layout.total * chunk / n_chunks;
      std::uint64_t hi = layout.total * (chunk + 1) / n_chunks;
      ChunkOut& out = chunk_out[chunk];
      if (!relay) {
        out.mac.init(region_len);
        out.wbest.assign(static_cast<std::size_t>(n_weights), kNegInf);
        out.wbest_idx.assign(static_cast<std::size_t>(n_weights), 0);
      }
      for (std::uint64_t idx = lo; idx < hi; ++idx) {
        assemble(layout, idx, p, compact2);
        if (layout.input2_compact) expand_compact2(spec, nc, compact2, p);
        if (relay) {
          RelayTerms t = rev->eval(p);
          double v = std::min(t.coop_info, t.crib_entropy + t.direct_info);
          if (v > out.best + kTiny || (v > out.best - kTiny && t.coop_info > out.best_coop + kTiny)) {
            out.best = v;
            out.best_coop = t.coop_info;
            out.index = idx;
          }
        } else {
          MacPolytope poly = polytope_from_terms(mev->eval(p));
          out.mac.add(poly, opts.grid_step, p);
          for (int wi = 0; wi < n_weights; ++wi) {
            double v = support_value(poly, wi * opts.weight_step);
            if (v > out.wbest[static_cast<std::size_t>(wi)] + kTiny) {
              out.wbest[static_cast<std::size_t>(wi)] = v;
              out.wbest_idx[static_cast<std::size_t>(wi)] = idx;
            }
          }
        }
      }
    }
  } catch (...) {
    std::lock_guard<std::mutex> lock(failure_mutex);
    if (!failure) failure = std::current_exception();
  } };

  int n_threads = static_cast<int>(std::min<std::uint64_t>(
      static_cast<std::uint64_t>(hw_threads(opts.threads)), n_chunks));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  // Deterministic merge in chunk order.
  double grid_best = kNegInf;
  double grid_best_coop = kNegInf;
  std::uint64_t grid_best_idx = 0;
  MacAccum mac;
  std::vector<double> wbest(static_cast<std::size_t>(n_weights), kNegInf);
  std::vector<std::uint64_t> wbest_idx(static_cast<std::size_t>(n_weights), 0);
  if (!relay) mac.init(region_len);
  for (const auto& out : chunk_out) {
    if (relay) {
      if (out.best > grid_best + kTiny ||
          (out.best > grid_best - kTiny && out.best_coop > grid_best_coop + kTiny)) {
        grid_best = out.best;
        grid_best_coop = out.best_coop;
        grid_best_idx = out.index;
      }
    } else {
      mac.merge(out.mac);
      for (int wi = 0; wi < n_weights; ++wi)
        if (out.wbest[static_cast<std::size_t>(wi)] > wbest[static_cast<std::size_t>(wi)] + kTiny) {
          wbest[static_cast<std::size_t>(wi)] = out.wbest[static_cast<std::size_t>(wi)];
          wbest_idx[static_cast<std::size_t>(wi)] = out.wbest_idx[static_cast<std::size_t>(wi)];
        }
    }
  }

  // Polish phase: coordinate ascent over simplex rows (and, for the no-delay
  // kind, single relay-map cells), halving the move size on rounds without
  // improvement. Every MAC evaluation also feeds the region accumulator, so
  // polish can only grow the reported set; the grid result stands as the
  // certificate either way.
  std::optional<RelayEvaluator> rev;
  std::optional<MacEvaluator> mev;
  if (relay)
    rev.emplace(spec, nc);
  else
    mev.emplace(spec, nc);

  std::vector<RowRef> rows;
  for (const auto& sh : factor_shapes(spec, nc, opts.z1_independent)) {
    double step = sh.cells <= 4 ? layout.step_small : layout.step_big;
    for (int r = 0; r < sh.rows; ++r) rows.push_back({sh.target, r * sh.row_len, sh.row_len, step});
  }

  Parameterization work = blank_parameterization(spec, nc);
  std::vector<double> compact2(static_cast<std::size_t>(layout.input2_compact ? layout.compact2_size : 0));

  // Relay objective, or the w-weighted support of the MAC polytope.
  auto objective = [&](Parameterization& p, double w) -> double {
    if (layout.input2_compact) expand_compact2(spec, nc, compact2, p);
    if (relay) {
      RelayTerms t = rev->eval(p);
      return std::min(t.coop_info, t.crib_entropy + t.direct_info);
    }
    MacPolytope poly = polytope_from_terms(mev->eval(p));
    mac.add(poly, opts.grid_step, p);
    return support_value(poly, w);
  };

  auto ascend = [&](Parameterization& p, double w, double delta0) -> double {
    double current = objective(p, w);
    std::vector<double> deltas;
    for (const auto& row : rows) deltas.push_back(delta0 > 0 ? delta0 : row.step * 0.5);

    for (int round = 0; round < opts.ascent_rounds; ++round) {
      double best_gain = kTiny;
      int best_row = -1, best_i = 0, best_j = 0;
      double best_d = 0;
      int best_map_cell = -1, best_map_val = 0;
      for (std::size_t ri = 0; ri < rows.size(); ++ri) {
        double* base = row_base(p, compact2, layout.input2_compact, rows[ri]);
        for (int i = 0; i < rows[ri].len; ++i) {
          if (base[i] <= 0) continue;
          double d = std::min(deltas[ri], base[i]);
          if (d <= 1e-9) continue;
          for (int j = 0; j < rows[ri].len; ++j) {
            if (j == i) continue;
            base[i] -= d;
            base[j] += d;
            double v = objective(p, w);
            base[i] += d;
            base[j] -= d;
            if (v - current > best_gain) {
              best_gain = v - current;
              best_row = static_cast<int>(ri);
              best_i = i;
              best_j = j;
              best_d = d;
              best_map_cell = -1;
            }
          }
        }
      }
      if (spec.kind == ChannelKind::kStateRelayNoDelay) {
        for (int cell = 0; cell < static_cast<int>(p.relay_map.size()); ++cell) {
          int old = p.relay_map[static_cast<std::size_t>(cell)];
          for (int v = 0; v < spec.relay_input.size; ++v) {
            if (v == old) continue;
            p.relay_map[static_cast<std::size_t>(cell)] = v;
            double val = objective(p, w);
            p.relay_map[static_cast<std::size_t>(cell)] = old;
            if (val - current > best_gain) {
              best_gain = val - current;
              best_map_cell = cell;
              best_map_val = v;
              best_row = -1;
            }
          }
        }
      }
      if (best_row >= 0) {
        double* base = row_base(p, compact2, layout.input2_compact, rows[static_cast<std::size_t>(best_row)]);
        base[best_i] -= best_d;
        base[best_j] += best_d;
        current += best_gain;
      } else if (best_map_cell >= 0) {
        p.relay_map[static_cast<std::size_t>(best_map_cell)] = best_map_val;
        current += best_gain;
      } else {
        for (double& d : deltas) d *= 0.5;
      }
    }
    return current;
  };

  // Restart parameterizations are drawn continuously, independent of the grid
  // step, so refining the step never changes what this phase explores.
  auto load_restart = [&](int r) {
    RngStream rr = RngStream(opts.seed).sub("restarts").sub(static_cast<std::uint64_t>(r));
    work = random_parameterization(spec, nc, rr);
    if (layout.input2_compact) {
      int t2 = spec.states[1].size, m1 = spec.cribs[0].size, n2 = spec.inputs[1].size;
      for (int u = 0; u < nc; ++u)
        for (int s2 = 0; s2 < t2; ++s2) {
          const double* src =
              work.input2.data() + ((static_cast<std::size_t>(u) * t2 + s2) * m1) * n2;
          std::copy(src, src + n2,
                    compact2.data() + (static_cast<std::size_t>(u) * t2 + s2) * n2);
        }
      expand_compact2(spec, nc, compact2, work);
    }
  };

  if (relay) {
    double best_value = grid_best;
    assemble(layout, grid_best_idx, work, compact2);
    Parameterization best_param = work;
    double polished = ascend(work, 0, 0);
    if (polished > best_value + kTiny) {
      best_value = polished;
      best_param = work;
    }
    for (int r = 0; r < opts.restarts; ++r) {
      load_restart(r);
      double v = ascend(work, 0, 0.25);
      if (v > best_value + kTiny) {
        best_value = v;
        best_param = work;
      }
    }
    sol.value = std::max(best_value, 0.0);
    sol.argmax = best_param;
  } else {
    // Sharpen each sweep direction from its grid winner, then from restarts.
    for (int wi = 0; wi < n_weights; ++wi) {
      assemble(layout, wbest_idx[static_cast<std::size_t>(wi)], work, compact2);
      ascend(work, wi * opts.weight_step, 0);
    }
    for (int r = 0; r < opts.restarts; ++r) {
      load_restart(r);
      ascend(work, (r % n_weights) * opts.weight_step, 0.25);
    }

    RateRegion region;
    region.r1_step = opts.grid_step;
    for (std::size_t k = 0; k < mac.r2max.size(); ++k) {
      if (mac.r2max[k] < -0.5) break;
      double r2 = std::max(0.0, mac.r2max[k]);
      if (!region.boundary.empty()) r2 = std::min(r2, region.boundary.back().r2);
      region.boundary.push_back(
          {static_cast<double>(k) * opts.grid_step, r2, kMacLabels[mac.label[k]]});
    }
    sol.region = std::move(region);
    sol.value = sol.region.sum_rate_max();
    sol.argmax = mac.best_sum_param;
  }

  return sol;
}

// ---------------------------------------------------------------------------
// Fourier-Motzkin consistency.

namespace {

// Grid search over the auxiliary rates. The tilde variables appear only in
// R' <= R~ and in the total-information row, so their smallest admissible
// grid value R~ = R' dominates; the search runs over the split points.
bool relay_aux_feasible(double rate, double h, double i, double itot, double step) {
  const double e = 1e-9;
  int max_rp = static_cast<int>(std::floor(rate / step + 0.5));
  for (int kp = 0; kp <= max_rp; ++kp) {
    double rp = kp * step;
    if (rp > rate + e || rp > h + e) continue;
    double rpp = rate - rp;
    if (rpp < -e || rpp > i + e) continue;
    if (rp + rpp <= itot + e) return true;  // R~ = R'
  }
  return false;
}

bool mac_aux_feasible(double r1, double r2, const MacTerms& t, double step) {
  const double e = 1e-9;
  int max1 = static_cast<int>(std::floor(r1 / step + 0.5));
  int max2 = static_cast<int>(std::floor(r2 / step + 0.5));
  for (int k1 = 0; k1 <= max1; ++k1) {
    double rp1 = k1 * step;
    if (rp1 > r1 + e || rp1 > t.h1 + e) continue;
    double rpp1 = r1 - rp1;
    if (rpp1 > t.i1 + e) continue;
    for (int k2 = 0; k2 <= max2; ++k2) {
      double rp2 = k2 * step;
      if (rp2 > r2 + e || rp2 > t.h2 + e) continue;
      double rpp2 = r2 - rp2;
      if (rpp2 > t.i2 + e) continue;
      if (rpp1 + rpp2 > t.i12 + e) continue;
      if (rp1 + rp2 + rpp1 + rpp2 <= t.itot + e) return true;  // R~k = R'k
    }
  }
  return false;
}

}  // namespace

FmReport fm_consistency_check(const ChannelSpec& spec, const Parameterization& param, double rate_step) {
  if (!(rate_step > 0)) throw Error(Error::kInvalid, "fm check: rate step must be positive");
  const double e = 1e-9;
  FmReport report;
  report.samples = 1;

  if (is_relay_kind(spec.kind)) {
    RelayTerms t = eval_relay_terms(spec, param);
    double h = t.crib_entropy, i = t.direct_info, itot = t.coop_info;
    double cap = std::min(itot, h + i);
    int kmax = static_cast<int>(std::ceil(cap / rate_step)) + 2;
    for (int k = 0; k <= kmax; ++k) {
      double rate = k * rate_step;
      bool region = rate <= cap + e;
      bool aux = relay_aux_feasible(rate, h, i, itot, rate_step);
      if (region == aux) continue;
      bool near_boundary = std::abs(rate - cap) <= rate_step + e;
      if (region && !aux && near_boundary) continue;
      report.passed = false;
      report.failures = 1;
      report.counterexample = FmCounterexample{rate, 0, region, aux, 0};
      return report;
    }
  } else {
    MacTerms t = eval_mac_terms(spec, param);
    double a1 = t.i1 + t.h1, a2 = t.i2 + t.h2;
    double asum = std::min(t.i12 + t.h12, t.itot);
    int k1max = static_cast<int>(std::ceil(a1 / rate_step)) + 2;
    int k2max = static_cast<int>(std::ceil(a2 / rate_step)) + 2;
    for (int k1 = 0; k1 <= k1max; ++k1)
      for (int k2 = 0; k2 <= k2max; ++k2) {
        double r1 = k1 * rate_step, r2 = k2 * rate_step;
        bool region = r1 <= a1 + e && r2 <= a2 + e && r1 + r2 <= asum + e;
        bool aux = mac_aux_feasible(r1, r2, t, rate_step);
        if (region == aux) continue;
        bool near_boundary = a1 - r1 <= rate_step + e || a2 - r2 <= rate_step + e ||
                             asum - (r1 + r2) <= rate_step + e;
        if (region && !aux && near_boundary) continue;
        report.passed = false;
        report.failures = 1;
        report.counterexample = FmCounterexample{r1, r2, region, aux, 0};
        return report;
      }
  }
  return report;
}

Parameterization random_parameterization(const ChannelSpec& spec, int u_size, RngStream& rng) {
  int nc = (spec.kind == ChannelKind::kRelay || spec.kind == ChannelKind::kStateRelay)
               ? spec.relay_input.size
               : u_size;
  Parameterization p = blank_parameterization(spec, nc);

  auto fill_rows = [&rng](std::vector<double>& vec, int row_len) {
    for (std::size_t r = 0; r < vec.size() / static_cast<std::size_t>(row_len); ++r) {
      double total = 0;
      for (int v = 0; v < row_len; ++v) {
        double g = -std::log(std::max(rng.next_unit(), 1e-300));
        vec[r * static_cast<std::size_t>(row_len) + static_cast<std::size_t>(v)] = g;
        total += g;
      }
      for (int v = 0; v < row_len; ++v)
        vec[r * static_cast<std::size_t>(row_len) + static_cast<std::size_t>(v)] /= total;
    }
  };

  fill_rows(p.coop, static_cast<int>(p.coop.size()));
  fill_rows(p.input1, spec.inputs[0].size);
  if (is_mac_kind(spec.kind)) fill_rows(p.input2, spec.inputs[1].size);
  for (auto& v : p.relay_map) v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.relay_input.size)));
  return p;
}

FmReport fm_check_sampled(const ChannelSpec& spec, int samples, double rate_step, std::uint64_t seed) {
  if (samples < 1) throw Error(Error::kInvalid, "fm check: samples must be at least 1");
  FmReport total;
  total.samples = samples;
  int cap = u_cardinality_cap(spec);
  int u = cap > 0 ? std::min(3, cap) : 1;
  RngStream root = RngStream(seed).sub("fm-samples");
  for (int s = 0; s < samples; ++s) {
    RngStream rng = root.sub(static_cast<std::uint64_t>(s));
    Parameterization p = random_parameterization(spec, u, rng);
    FmReport one = fm_consistency_check(spec, p, rate_step);
    if (!one.passed) {
      total.failures += 1;
      total.passed = false;
      if (!total.counterexample) {
        total.counterexample = one.counterexample;
        total.counterexample->sample = s;
      }
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Special-case reductions.

namespace {

bool same_tables(const ChannelSpec& a, const ChannelSpec& b) {
  auto ar = a.channel.raw();
  auto br = b.channel.raw();
  if (ar.size() != br.size()) return false;
  for (std::size_t i = 0; i < ar.size(); ++i)
    if (std::abs(ar[i] - br[i]) > 1e-12) return false;
  if (a.links.size() != b.links.size()) return false;
  for (std::size_t l = 0; l < a.links.size(); ++l)
    if (a.links[l].table != b.links[l].table) return false;
  return true;
}

double region_deviation(const RateRegion& a, const RateRegion& b, bool& comparable) {
  comparable = true;
  std::size_t na = a.boundary.size(), nb = b.boundary.size();
  if (na + 1 < nb || nb + 1 < na) {
    comparable = false;
    return 1e9;
  }
  double dev = 0;
  for (std::size_t k = 0; k < std::max(na, nb); ++k) {
    double ra = k < na ? a.boundary[k].r2 : 0.0;
    double rb = k < nb ? b.boundary[k].r2 : 0.0;
    dev = std::max(dev, std::abs(ra - rb));
  }
  return dev;
}

}  // namespace

SpecialCaseReport special_case_checks(const ChannelSpec& reduced, const ChannelSpec& base,
                                      const SolveOptions& options) {
  SpecialCaseReport report;

  if (reduced.kind == ChannelKind::kStateRelay && base.kind == ChannelKind::kRelay) {
    if (reduced.states[0].size != 1 || !same_tables(reduced, base))
      throw Error(Error::kKind, "special case pairing mismatch: need a |S|=1 state_relay and the same relay");
    Solution a = solve(reduced, options);
    Solution b = solve(base, options);
    double dev = std::abs(a.value - b.value);
    report.entries.push_back({"state_collapse", dev <= 0.02, dev,
                              "optima " + std::to_string(a.value) + " vs " + std::to_string(b.value)});
  } else if (reduced.kind == ChannelKind::kStateMacCausal && base.kind == ChannelKind::kStateMac) {
    if (!same_tables(reduced, base))
      throw Error(Error::kKind, "special case pairing mismatch: causal/strictly-causal channels differ");
    SolveOptions restricted = options;
    restricted.z1_independent = true;
    Solution a = solve(reduced, restricted);
    Solution b = solve(base, options);
    bool comparable = true;
    double dev = region_deviation(a.region, b.region, comparable);
    report.entries.push_back({"causal_collapse", comparable && dev <= 0.02, dev,
                              "max boundary gap over the shared r1 grid"});
  } else if (reduced.kind == ChannelKind::kStateMac && base.kind == ChannelKind::kStateMac &&
             reduced.cribs[0].size == 1 && reduced.cribs[1].size == 1) {
    // With |Z1| = |Z2| = 1 the cribbed-entropy terms vanish and the total
    // sum-rate bound can never cut below the joint one.
    RngStream rng = RngStream(options.seed).sub("unit-crib");
    int u = std::min(3, u_cardinality_cap(reduced));
    bool ok = true;
    double worst = 0;
    for (int s = 0; s < 20; ++s) {
      RngStream r = rng.sub(static_cast<std::uint64_t>(s));
      Parameterization p = random_parameterization(reduced, u, r);
      MacTerms t = eval_mac_terms(reduced, p);
      worst = std::max(worst, t.h12);
      if (t.h12 > 1e-9 || t.itot < t.i12 + t.h12 - 1e-9) ok = false;
    }
    report.entries.push_back({"unit_crib_redundancy", ok, worst,
                              "H(Z1,Z2|U,S1,S2) must vanish and the total bound must dominate"});
  } else {
    throw Error(Error::kKind, "special case pairing mismatch");
  }

  for (const auto& entry : report.entries) report.passed = report.passed && entry.passed;
  return report;
}

}  // namespace binf
