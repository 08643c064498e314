#ifndef BINF_PROB_HPP
#define BINF_PROB_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace binf {

// Library-wide error with a coarse code for the C boundary.
class Error : public std::runtime_error {
 public:
  enum Code {
    kInvalid = 1,  // bad value, failed validation
    kKind = 2,     // operation applied to the wrong channel kind
    kBudget = 3,   // configured cap exceeded
    kIo = 4,       // file system failure
    kParse = 5,    // malformed document
  };

  Error(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

inline constexpr double kMassTol = 1e-9;          // normalization tolerance on construction
inline constexpr std::size_t kMaxCells = 10'000'000;  // dense-table cell cap

// Structural invariant check that stays on in release builds.
inline void internal_check(bool ok, const char* what) {
  if (!ok) throw Error(Error::kInvalid, std::string("internal invariant violated: ") + what);
}

struct Alphabet {
  std::string name;
  int size = 0;

  bool operator==(const Alphabet&) const = default;
};

// Probability mass function over one alphabet. Weights are validated on
// construction and never silently renormalized.
class Pmf {
 public:
  Pmf() = default;
  Pmf(Alphabet alphabet, std::vector<double> weights);

  const Alphabet& alphabet() const { return alphabet_; }
  std::span<const double> weights() const { return weights_; }
  double operator[](int symbol) const { return weights_[static_cast<std::size_t>(symbol)]; }
  int size() const { return alphabet_.size; }

 private:
  Alphabet alphabet_;
  std::vector<double> weights_;
};

// Dense joint law over an ordered list of alphabets. Row-major storage, last
// axis fastest.
class JointPmf {
 public:
  JointPmf() = default;
  JointPmf(std::vector<Alphabet> axes, std::vector<double> weights);

  const std::vector<Alphabet>& axes() const { return axes_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t cell_count() const { return weights_.size(); }

  std::size_t flat_index(std::span<const int> symbols) const;
  double at(std::span<const int> symbols) const { return weights_[flat_index(symbols)]; }

 private:
  std::vector<Alphabet> axes_;
  std::vector<double> weights_;
};

// p(target | given...). Rows stored contiguously: row-major over the given
// axes, each row of length |target|, each row summing to 1.
class ConditionalPmf {
 public:
  ConditionalPmf() = default;
  ConditionalPmf(std::vector<Alphabet> given_axes, Alphabet target, std::vector<double> rows);

  const std::vector<Alphabet>& given_axes() const { return given_axes_; }
  const Alphabet& target() const { return target_; }
  std::size_t row_count() const { return rows_.size() / static_cast<std::size_t>(target_.size); }
  std::span<const double> row(std::size_t row_index) const;
  std::span<const double> row_for(std::span<const int> given_symbols) const;
  std::span<const double> raw() const { return rows_; }

 private:
  std::vector<Alphabet> given_axes_;
  Alphabet target_;
  std::vector<double> rows_;
};

// One factor of a joint factorization: either a marginal Pmf producing
// `target_axis`, or a ConditionalPmf producing `target_axis` from
// `given_axes` (joint axis indices, in the conditional's declared order).
struct Factor {
  const Pmf* pmf = nullptr;
  const ConditionalPmf* cond = nullptr;
  std::vector<int> given_axes;
  int target_axis = 0;
};

// Multiplies the factors into a dense joint. Every axis must be produced by
// exactly one factor and the given/target wiring must be acyclic.
JointPmf compose_joint(const std::vector<Factor>& factors);

JointPmf marginalize(const JointPmf& joint, std::span<const int> keep_axes);

// H(axes | given_axes) in bits. 0 log 0 = 0; zero-mass conditioning rows
// contribute nothing.
double entropy(const JointPmf& joint, std::span<const int> axes, std::span<const int> given_axes = {});

// I(left ; right | given) in bits, clamped into [0, inf).
double mutual_information(const JointPmf& joint, std::span<const int> left, std::span<const int> right,
                          std::span<const int> given = {});

// -sum p log2 p over an arbitrary weight table (need not sum to 1).
double entropy_of_weights(std::span<const double> weights);

}  // namespace binf

#endif
