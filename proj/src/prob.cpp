#include "prob.hpp"

#include <algorithm>
#include <cmath>

namespace binf {

namespace {

void check_alphabet(const Alphabet& a) {
  if (a.size < 1) throw Error(Error::kInvalid, "alphabet '" + a.name + "' must have size >= 1");
}

void check_weights(std::span<const double> w, std::size_t expected, const std::string& what) {
  if (w.size() != expected)
    throw Error(Error::kInvalid, what + ": expected " + std::to_string(expected) + " weights, got " +
                                     std::to_string(w.size()));
  double total = 0;
  for (double v : w) {
    if (!(v >= 0)) throw Error(Error::kInvalid, what + ": negative or non-finite weight");
    total += v;
  }
  if (std::abs(total - 1.0) > kMassTol)
    throw Error(Error::kInvalid, what + ": weights sum to " + std::to_string(total) + ", expected 1");
}

}  // namespace

Pmf::Pmf(Alphabet alphabet, std::vector<double> weights)
    : alphabet_(std::move(alphabet)), weights_(std::move(weights)) {
  check_alphabet(alphabet_);
  check_weights(weights_, static_cast<std::size_t>(alphabet_.size), "pmf over '" + alphabet_.name + "'");
}

JointPmf::JointPmf(std::vector<Alphabet> axes, std::vector<double> weights)
    : axes_(std::move(axes)), weights_(std::move(weights)) {
  if (axes_.empty()) throw Error(Error::kInvalid, "joint pmf needs at least one axis");
  std::size_t cells = 1;
  for (const auto& a : axes_) {
    check_alphabet(a);
    cells *= static_cast<std::size_t>(a.size);
    if (cells > kMaxCells) throw Error(Error::kBudget, "joint pmf exceeds the dense cell cap");
  }
  check_weights(weights_, cells, "joint pmf");
}

std::size_t JointPmf::flat_index(std::span<const int> symbols) const {
  if (symbols.size() != axes_.size()) throw Error(Error::kInvalid, "symbol tuple arity mismatch");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    if (symbols[k] < 0 || symbols[k] >= axes_[k].size)
      throw Error(Error::kInvalid, "symbol out of range on axis '" + axes_[k].name + "'");
    idx = idx * static_cast<std::size_t>(axes_[k].size) + static_cast<std::size_t>(symbols[k]);
  }
  return idx;
}

ConditionalPmf::ConditionalPmf(std::vector<Alphabet> given_axes, Alphabet target, std::vector<double> rows)
    : given_axes_(std::move(given_axes)), target_(std::move(target)), rows_(std::move(rows)) {
  check_alphabet(target_);
  std::size_t row_count = 1;
  for (const auto& a : given_axes_) {
    check_alphabet(a);
    row_count *= static_cast<std::size_t>(a.size);
  }
  if (row_count * static_cast<std::size_t>(target_.size) > kMaxCells)
    throw Error(Error::kBudget, "conditional pmf exceeds the dense cell cap");
  if (rows_.size() != row_count * static_cast<std::size_t>(target_.size))
    throw Error(Error::kInvalid, "conditional pmf '" + target_.name + "': row table has wrong size");
  for (std::size_t r = 0; r < row_count; ++r)
    check_weights(row(r), static_cast<std::size_t>(target_.size),
                  "conditional row " + std::to_string(r) + " of '" + target_.name + "'");
}

std::span<const double> ConditionalPmf::row(std::size_t row_index) const {
  std::size_t w = static_cast<std::size_t>(target_.size);
  return {rows_.data() + row_index * w, w};
}

std::span<const double> ConditionalPmf::row_for(std::span<const int> given_symbols) const {
  if (given_symbols.size() != given_axes_.size())
    throw Error(Error::kInvalid, "conditional '" + target_.name + "': given tuple arity mismatch");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < given_axes_.size(); ++k) {
    if (given_symbols[k] < 0 || given_symbols[k] >= given_axes_[k].size)
      throw Error(Error::kInvalid, "conditional '" + target_.name + "': given symbol out of range");
    idx = idx * static_cast<std::size_t>(given_axes_[k].size) + static_cast<std::size_t>(given_symbols[k]);
  }
  return row(idx);
}

JointPmf compose_joint(const std::vector<Factor>& factors) {
  if (factors.empty()) throw Error(Error::kInvalid, "compose_joint: no factors");
  int num_axes = 0;
  for (const auto& f : factors) num_axes = std::max(num_axes, f.target_axis + 1);

  std::vector<const Factor*> producer(static_cast<std::size_t>(num_axes), nullptr);
  std::vector<Alphabet> axes(static_cast<std::size_t>(num_axes));
  for (const auto& f : factors) {
    if ((f.pmf == nullptr) == (f.cond == nullptr))
      throw Error(Error::kInvalid, "compose_joint: factor must hold exactly one of pmf/conditional");
    if (f.target_axis < 0 || f.target_axis >= num_axes)
      throw Error(Error::kInvalid, "compose_joint: target axis out of range");
    if (producer[static_cast<std::size_t>(f.target_axis)] != nullptr)
      throw Error(Error::kInvalid, "compose_joint: axis produced by two factors");
    producer[static_cast<std::size_t>(f.target_axis)] = &f;
    axes[static_cast<std::size_t>(f.target_axis)] = f.pmf ? f.pmf->alphabet() : f.cond->target();
    if (f.pmf && !f.given_axes.empty())
      throw Error(Error::kInvalid, "compose_joint: marginal factor cannot have given axes");
    if (f.cond && f.given_axes.size() != f.cond->given_axes().size())
      throw Error(Error::kInvalid, "compose_joint: given-axis wiring arity mismatch");
  }
  for (int a = 0; a < num_axes; ++a)
    if (!producer[static_cast<std::size_t>(a)])
      throw Error(Error::kInvalid, "compose_joint: axis " + std::to_string(a) + " has no producing factor");

  // Wiring must reference in-range axes with matching alphabet sizes.
  for (const auto& f : factors) {
    for (std::size_t k = 0; k < f.given_axes.size(); ++k) {
      int g = f.given_axes[k];
      if (g < 0 || g >= num_axes) throw Error(Error::kInvalid, "compose_joint: given axis out of range");
      if (axes[static_cast<std::size_t>(g)].size != f.cond->given_axes()[k].size)
        throw Error(Error::kInvalid, "compose_joint: alphabet mismatch on axis " + std::to_string(g));
    }
  }

  // Acyclicity: repeatedly place factors whose inputs are all placed.
  std::vector<bool> placed(static_cast<std::size_t>(num_axes), false);
  int placed_count = 0;
  while (placed_count < num_axes) {
    bool progressed = false;
    for (int a = 0; a < num_axes; ++a) {
      if (placed[static_cast<std::size_t>(a)]) continue;
      const Factor* f = producer[static_cast<std::size_t>(a)];
      bool ready = true;
      for (int g : f->given_axes) ready = ready && placed[static_cast<std::size_t>(g)];
      if (ready) {
        placed[static_cast<std::size_t>(a)] = true;
        ++placed_count;
        progressed = true;
      }
    }
    if (!progressed) throw Error(Error::kInvalid, "compose_joint: cyclic axis wiring");
  }

  std::size_t cells = 1;
  for (const auto& a : axes) {
    cells *= static_cast<std::size_t>(a.size);
    if (cells > kMaxCells) throw Error(Error::kBudget, "compose_joint: result exceeds the dense cell cap");
  }

  std::vector<double> weights(cells);
  std::vector<int> sym(static_cast<std::size_t>(num_axes), 0);
  std::vector<int> given_buf;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double w = 1.0;
    for (const auto& f : factors) {
      if (f.pmf) {
        w *= (*f.pmf)[sym[static_cast<std::size_t>(f.target_axis)]];
      } else {
        given_buf.clear();
        for (int g : f.given_axes) given_buf.push_back(sym[static_cast<std::size_t>(g)]);
        w *= f.cond->row_for(given_buf)[static_cast<std::size_t>(sym[static_cast<std::size_t>(f.target_axis)])];
      }
      if (w == 0) break;
    }
    weights[cell] = w;
    for (int k = num_axes - 1; k >= 0; --k) {
      if (++sym[static_cast<std::size_t>(k)] < axes[static_cast<std::size_t>(k)].size) break;
      sym[static_cast<std::size_t>(k)] = 0;
    }
  }
  return JointPmf(std::move(axes), std::move(weights));
}

JointPmf marginalize(const JointPmf& joint, std::span<const int> keep_axes) {
  if (keep_axes.empty()) throw Error(Error::kInvalid, "marginalize: keep_axes must be non-empty");
  const auto& axes = joint.axes();
  std::vector<bool> seen(axes.size(), false);
  std::vector<Alphabet> out_axes;
  for (int a : keep_axes) {
    if (a < 0 || a >= static_cast<int>(axes.size()))
      throw Error(Error::kInvalid, "marginalize: axis out of range");
    if (seen[static_cast<std::size_t>(a)]) throw Error(Error::kInvalid, "marginalize: duplicate axis");
    seen[static_cast<std::size_t>(a)] = true;
    out_axes.push_back(axes[static_cast<std::size_t>(a)]);
  }

  std::size_t out_cells = 1;
  for (const auto& a : out_axes) out_cells *= static_cast<std::size_t>(a.size);
  std::vector<double> out(out_cells, 0.0);

  std::vector<int> sym(axes.size(), 0);
  for (double w : joint.weights()) {
    std::size_t idx = 0;
    for (int a : keep_axes)
      idx = idx * static_cast<std::size_t>(axes[static_cast<std::size_t>(a)].size) +
            static_cast<std::size_t>(sym[static_cast<std::size_t>(a)]);
    out[idx] += w;
    for (int k = static_cast<int>(axes.size()) - 1; k >= 0; --k) {
      if (++sym[static_cast<std::size_t>(k)] < axes[static_cast<std::size_t>(k)].size) break;
      sym[static_cast<std::size_t>(k)] = 0;
    }
  }
  // Summation preserves mass, so the constructor's checks pass.
  return JointPmf(std::move(out_axes), std::move(out));
}

double entropy_of_weights(std::span<const double> weights) {
  double h = 0;
  for (double p : weights)
    if (p > 0) h -= p * std::log2(p);
  return h;
}

namespace {

double entropy_of_axes(const JointPmf& joint, std::span<const int> axes) {
  if (axes.empty()) return 0.0;
  return entropy_of_weights(marginalize(joint, axes).weights());
}

void check_disjoint(std::span<const int> a, std::span<const int> b, const char* what) {
  for (int x : a)
    for (int y : b)
      if (x == y) throw Error(Error::kInvalid, std::string(what) + ": axis subsets overlap");
}

std::vector<int> concat(std::span<const int> a, std::span<const int> b) {
  std::vector<int> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

double entropy(const JointPmf& joint, std::span<const int> axes, std::span<const int> given_axes) {
  if (axes.empty()) throw Error(Error::kInvalid, "entropy: axes must be non-empty");
  check_disjoint(axes, given_axes, "entropy");
  double joint_h = entropy_of_axes(joint, concat(axes, given_axes));
  double given_h = entropy_of_axes(joint, given_axes);
  return joint_h - given_h;
}

double mutual_information(const JointPmf& joint, std::span<const int> left, std::span<const int> right,
                          std::span<const int> given) {
  if (left.empty() || right.empty())
    throw Error(Error::kInvalid, "mutual_information: left and right must be non-empty");
  check_disjoint(left, right, "mutual_information");
  check_disjoint(left, given, "mutual_information");
  check_disjoint(right, given, "mutual_information");
  double h_left_given = entropy(joint, left, given);
  auto rg = concat(right, given);
  double h_left_both = entropy(joint, left, rg);
  double value = h_left_given - h_left_both;
  return value < 0 ? 0.0 : value;
}

}  // namespace binf
