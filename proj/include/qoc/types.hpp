#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

// Conventions used throughout:
//   - frequencies and rates are angular, in rad/ns
//   - times are in ns
//   - config files use ordinary frequencies (GHz/MHz) and ns; conversion
//     to angular units happens once, at the config boundary.
namespace qoc {

using cd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using SparseOp = Eigen::SparseMatrix<cd>;

inline constexpr double two_pi = 6.283185307179586476925286766559;
inline constexpr cd ci{0.0, 1.0};

inline double from_GHz(double f) { return two_pi * f; }
inline double from_MHz(double f) { return two_pi * 1e-3 * f; }
inline double to_GHz(double w) { return w / two_pi; }
inline double to_MHz(double w) { return 1e3 * w / two_pi; }

// Numerical failure during integration or optimization (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Refusal of a validation run that would exceed the memory cap (exit code 4).
class ValidationCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

inline double hermiticity_defect(const Matrix& a) {
  return max_abs(a - a.adjoint());
}

// Tr[A B] for dense A, B of matching size.
inline cd trace_of_product(const Matrix& a, const Matrix& b) {
  return (a.transpose().cwiseProduct(b)).sum();
}

// Tr[S X] with S sparse.
inline cd trace_of_product(const SparseOp& s, const Matrix& x) {
  cd acc{0.0, 0.0};
  for (int k = 0; k < s.outerSize(); ++k)
    for (SparseOp::InnerIterator it(s, k); it; ++it)
      acc += it.value() * x(it.col(), it.row());
  return acc;
}

inline Matrix hermitize(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

}  // namespace qoc
