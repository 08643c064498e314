#include "typicality.hpp"

#include <cmath>

namespace binf {

namespace {

std::size_t check_tuple(const SequenceTuple& tuple, const std::vector<Alphabet>& axes) {
  if (tuple.sequences.empty()) throw Error(Error::kInvalid, "sequence tuple is empty");
  if (tuple.sequences.size() != axes.size())
    throw Error(Error::kInvalid, "sequence tuple arity does not match the reference axes");
  std::size_t n = tuple.sequences[0].size();
  if (n == 0) throw Error(Error::kInvalid, "sequence tuple has length 0");
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (tuple.sequences[k].size() != n) throw Error(Error::kInvalid, "sequence length mismatch in tuple");
    for (int sym : tuple.sequences[k])
      if (sym < 0 || sym >= axes[k].size)
        throw Error(Error::kInvalid, "sequence symbol out of range on axis '" + axes[k].name + "'");
  }
  return n;
}

}  // namespace

JointPmf empirical_distribution(const SequenceTuple& tuple, const std::vector<Alphabet>& axes) {
  std::size_t n = check_tuple(tuple, axes);
  std::size_t cells = 1;
  for (const auto& a : axes) cells *= static_cast<std::size_t>(a.size);
  if (cells > kMaxCells) throw Error(Error::kBudget, "empirical distribution exceeds the dense cell cap");

  std::vector<double> weights(cells, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < axes.size(); ++k)
      idx = idx * static_cast<std::size_t>(axes[k].size) +
            static_cast<std::size_t>(tuple.sequences[k][i]);
    weights[idx] += 1.0 / static_cast<double>(n);
  }
  return JointPmf(axes, std::move(weights));
}

bool is_strongly_typical(const SequenceTuple& tuple, const JointPmf& reference,
                         const TypicalityParams& params) {
  params.validate();
  std::size_t n = check_tuple(tuple, reference.axes());

  std::vector<std::size_t> counts(reference.cell_count(), 0);
  const auto& axes = reference.axes();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < axes.size(); ++k)
      idx = idx * static_cast<std::size_t>(axes[k].size) +
            static_cast<std::size_t>(tuple.sequences[k][i]);
    ++counts[idx];
  }

  auto ref = reference.weights();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    double type = static_cast<double>(counts[c]) / static_cast<double>(n);
    double p = ref[c];
    if (p == 0.0) {
      if (counts[c] != 0) return false;
      continue;
    }
    if (std::abs(type - p) > params.epsilon * p + 1e-12) return false;
  }
  return true;
}

}  // namespace binf
