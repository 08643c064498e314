#ifndef BINF_TYPICALITY_HPP
#define BINF_TYPICALITY_HPP

#include <vector>

#include "prob.hpp"

namespace binf {

struct TypicalityParams {
  double epsilon = 0.2;  // relative slack
  int n = 1;             // block length

  void validate() const {
    if (!(epsilon > 0)) throw Error(Error::kInvalid, "typicality: epsilon must be positive");
    if (n < 1) throw Error(Error::kInvalid, "typicality: n must be at least 1");
  }
};

// Equal-length symbol sequences, one per axis of a reference joint, in the
// reference's axis order.
struct SequenceTuple {
  std::vector<std::vector<int>> sequences;
};

// Joint type of the tuple: cell weight = occurrence count / n.
JointPmf empirical_distribution(const SequenceTuple& tuple, const std::vector<Alphabet>& axes);

// Strong typicality: |type(a) - p(a)| <= epsilon * p(a) for every cell, and
// type(a) = 0 wherever p(a) = 0.
bool is_strongly_typical(const SequenceTuple& tuple, const JointPmf& reference, const TypicalityParams& params);

}  // namespace binf

#endif
