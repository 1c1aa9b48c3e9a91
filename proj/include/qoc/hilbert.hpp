#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qoc/types.hpp"

namespace qoc::hilbert {

// --- truncated Fock-space operators -------------------------------------

inline Matrix lowering(int n) {
  if (n < 2) throw std::invalid_argument("bosonic ops need dimension >= 2");
  Matrix a = Matrix::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) a(k, k + 1) = std::sqrt(double(k + 1));
  return a;
}

inline Matrix raising(int n) { return lowering(n).adjoint(); }

inline Matrix number(int n) {
  Matrix m = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) m(k, k) = double(k);
  return m;
}

inline Matrix projector(int n, int level) {
  if (level < 0 || level >= n) throw std::invalid_argument("projector level out of range");
  Matrix m = Matrix::Zero(n, n);
  m(level, level) = 1.0;
  return m;
}

// Projector onto all levels >= first.
inline Matrix projector_at_or_above(int n, int first) {
  Matrix m = Matrix::Zero(n, n);
  for (int k = std::max(first, 0); k < n; ++k) m(k, k) = 1.0;
  return m;
}

// --- transmon charge-basis diagonalization ------------------------------

struct TransmonEigenbasis {
  RealVector energies;      // rad/ns, gauged to energies[0] = 0, ascending
  Matrix charge_op;         // n-hat in the eigenbasis, phase-gauged
  Matrix lowering_op;       // b-hat: superdiagonal, <0|b|1> = 1
  Matrix charge_lowering;   // superdiagonal |n_{k,k+1}|, used for couplings/drives
  int n_levels = 0;

  double anharmonicity() const {
    return (energies[2] - energies[1]) - (energies[1] - energies[0]);
  }
};

// Diagonalizes 4 E_C n^2 - E_J cos(phi) on a symmetric charge grid -n..n.
// Eigenvector phases are gauged so that <k+1| n |k> is positive imaginary.
inline TransmonEigenbasis diagonalize_transmon(double ec, double ej, int n_charge,
                                               int n_levels) {
  if (ec <= 0.0) throw std::invalid_argument("E_C must be positive");
  if (ej < 0.0) throw std::invalid_argument("E_J must be nonnegative");
  if (n_charge % 2 == 0) throw std::invalid_argument("charge grid size must be odd");
  if (n_levels < 2 || n_levels > n_charge)
    throw std::invalid_argument("n_levels out of range");
  if (n_charge < 4 * n_levels)
    throw std::invalid_argument("charge grid too small for requested levels");

  const int half = (n_charge - 1) / 2;
  RealMatrix h = RealMatrix::Zero(n_charge, n_charge);
  for (int i = 0; i < n_charge; ++i) {
    const double nq = double(i - half);
    h(i, i) = 4.0 * ec * nq * nq;
    if (i + 1 < n_charge) {
      h(i, i + 1) = -0.5 * ej;
      h(i + 1, i) = -0.5 * ej;
    }
  }
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(h);
  if (es.info() != Eigen::Success)
    throw NumericalError("transmon eigensolver failed to converge");

  // sort by energy, ties broken by charge expectation (degenerate E_J = 0 case)
  std::vector<int> order(n_charge);
  std::iota(order.begin(), order.end(), 0);
  const RealVector& ev = es.eigenvalues();
  const RealMatrix& vec = es.eigenvectors();
  auto charge_expect = [&](int c) {
    double acc = 0.0;
    for (int i = 0; i < n_charge; ++i)
      acc += vec(i, c) * vec(i, c) * double(i - half);
    return acc;
  };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(ev[a] - ev[b]) > 1e-12 * std::max(1.0, std::abs(ev[a])))
      return ev[a] < ev[b];
    return charge_expect(a) < charge_expect(b);
  });

  TransmonEigenbasis out;
  out.n_levels = n_levels;
  out.energies.resize(n_levels);
  for (int k = 0; k < n_levels; ++k) out.energies[k] = ev[order[k]] - ev[order[0]];

  RealMatrix n_charge_basis = RealMatrix::Zero(n_charge, n_charge);
  for (int i = 0; i < n_charge; ++i) n_charge_basis(i, i) = double(i - half);
  RealMatrix kept(n_charge, n_levels);
  for (int k = 0; k < n_levels; ++k) kept.col(k) = vec.col(order[k]);
  RealMatrix n_eig = kept.transpose() * n_charge_basis * kept;

  // phase gauge: |k~> = c_k |k> with c_{k+1} chosen so <k+1|n|k> = +i |.|
  std::vector<cd> phase(n_levels);
  phase[0] = 1.0;
  for (int k = 0; k + 1 < n_levels; ++k) {
    const double elem = n_eig(k + 1, k);
    const double sgn = (elem >= 0.0) ? 1.0 : -1.0;
    phase[k + 1] = -ci * sgn * phase[k];
  }
  out.charge_op = Matrix::Zero(n_levels, n_levels);
  for (int j = 0; j < n_levels; ++j)
    for (int k = 0; k < n_levels; ++k)
      out.charge_op(j, k) = std::conj(phase[j]) * phase[k] * n_eig(j, k);

  out.charge_lowering = Matrix::Zero(n_levels, n_levels);
  out.lowering_op = Matrix::Zero(n_levels, n_levels);
  const double n01 = std::abs(out.charge_op(1, 0));
  for (int k = 0; k + 1 < n_levels; ++k) {
    const double elem = std::abs(out.charge_op(k + 1, k));
    out.charge_lowering(k, k + 1) = elem;
    out.lowering_op(k, k + 1) = elem / n01;
  }
  return out;
}

// --- resonator-filter normal modes ---------------------------------------

struct NormalModeBasis {
  std::array<double, 2> mode_freqs{};          // ascending, rad/ns
  double hybridization_angle = 0.0;            // rad
  std::array<double, 2> transmon_couplings{};  // g * resonator projection
  std::array<double, 2> decay_rates{};         // kappa * filter projection^2
  std::array<cd, 2> drive_weights{};           // filter-operator projections
  std::array<std::array<double, 2>, 2> vectors{};  // vectors[i] = (res, fil) of mode i
};

// Diagonalizes the RWA beam-splitter form of the resonator-filter pair:
//   omega_r a'a + omega_f f'f + J (a'f + f'a).
// The transmon couples through the resonator quadrature, decay through the filter.
inline NormalModeBasis diagonalize_filter_chain(double omega_r, double omega_f,
                                                double j_rf, double kappa, double g) {
  if (j_rf < 0.0) throw std::invalid_argument("J must be nonnegative");
  if (kappa <= 0.0) throw std::invalid_argument("kappa must be positive");
  if (j_rf == 0.0 && omega_r == omega_f)
    throw std::invalid_argument("degenerate resonator-filter pair: hybridization angle undefined");

  const double mean = 0.5 * (omega_r + omega_f);
  const double split = std::hypot(0.5 * (omega_f - omega_r), j_rf);
  const double theta = 0.5 * std::atan2(2.0 * j_rf, omega_f - omega_r);

  NormalModeBasis out;
  out.mode_freqs = {mean - split, mean + split};
  out.hybridization_angle = theta;
  std::array<std::array<double, 2>, 2> v = {{{std::cos(theta), -std::sin(theta)},
                                             {std::sin(theta), std::cos(theta)}}};
  for (auto& vi : v) {
    // gauge: resonator component nonnegative; filter component positive if res is 0
    if (vi[0] < 0.0 || (vi[0] == 0.0 && vi[1] < 0.0)) {
      vi[0] = -vi[0];
      vi[1] = -vi[1];
    }
  }
  out.vectors = v;
  for (int i = 0; i < 2; ++i) {
    out.transmon_couplings[i] = g * v[i][0];
    out.decay_rates[i] = kappa * v[i][1] * v[i][1];
    out.drive_weights[i] = v[i][1];
  }
  return out;
}

// --- composite space ------------------------------------------------------

// Tensor ordering: transmon (x) driven mode (x) undriven mode.
struct CompositeSpace {
  int n_t = 0, n_d = 0, n_u = 0;

  CompositeSpace() = default;
  CompositeSpace(int nt, int nd, int nu) : n_t(nt), n_d(nd), n_u(nu) {
    if (nt < 1 || nd < 1 || nu < 1)
      throw std::invalid_argument("composite dimensions must be positive");
  }

  int dim() const { return n_t * n_d * n_u; }
  int subsystem_dim(int s) const {
    switch (s) {
      case 0: return n_t;
      case 1: return n_d;
      case 2: return n_u;
      default: throw std::invalid_argument("subsystem index out of range");
    }
  }
  int index(int t, int d, int u) const { return (t * n_d + d) * n_u + u; }

  // Kronecker embedding with identities on the other factors.
  SparseOp embed(int subsystem, const Matrix& op) const {
    const int ds = subsystem_dim(subsystem);
    if (op.rows() != ds || op.cols() != ds)
      throw std::invalid_argument("embed: operator dimension mismatch");
    const int pre = (subsystem == 0) ? 1 : (subsystem == 1 ? n_t : n_t * n_d);
    const int post = (subsystem == 0) ? n_d * n_u : (subsystem == 1 ? n_u : 1);
    std::vector<Eigen::Triplet<cd>> trips;
    trips.reserve(size_t(ds) * 2 * pre * post);
    for (int r = 0; r < ds; ++r)
      for (int c = 0; c < ds; ++c) {
        const cd val = op(r, c);
        if (val == cd(0.0, 0.0)) continue;
        for (int p = 0; p < pre; ++p)
          for (int q = 0; q < post; ++q)
            trips.emplace_back((p * ds + r) * post + q, (p * ds + c) * post + q, val);
      }
    SparseOp out(dim(), dim());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
  }

  // Product A (x) B (x) C of per-subsystem operators, as a sparse full-space matrix.
  SparseOp kron3(const Matrix& a, const Matrix& b, const Matrix& c) const {
    if (a.rows() != n_t || b.rows() != n_d || c.rows() != n_u)
      throw std::invalid_argument("kron3: operator dimension mismatch");
    std::vector<Eigen::Triplet<cd>> trips;
    for (int i1 = 0; i1 < n_t; ++i1)
      for (int j1 = 0; j1 < n_t; ++j1) {
        const cd va = a(i1, j1);
        if (va == cd(0.0, 0.0)) continue;
        for (int i2 = 0; i2 < n_d; ++i2)
          for (int j2 = 0; j2 < n_d; ++j2) {
            const cd vb = b(i2, j2);
            if (vb == cd(0.0, 0.0)) continue;
            for (int i3 = 0; i3 < n_u; ++i3)
              for (int j3 = 0; j3 < n_u; ++j3) {
                const cd vc = c(i3, j3);
                if (vc == cd(0.0, 0.0)) continue;
                trips.emplace_back(index(i1, i2, i3), index(j1, j2, j3), va * vb * vc);
              }
          }
      }
    SparseOp out(dim(), dim());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
  }
};

}  // namespace qoc::hilbert
