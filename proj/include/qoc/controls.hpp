#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qoc/types.hpp"

namespace qoc::controls {

inline constexpr double default_bin = 1.0;                    // ns
inline constexpr double default_omega0 = two_pi * 0.4255;     // rad/ns
inline constexpr double default_bandwidth = two_pi * 0.250;   // rad/ns

// Gaussian-filtered pixel basis function,
//   zeta_j(t) = 1/2 [erf(omega0 (t - j tau0)/2) - erf(omega0 (t - (j+1) tau0)/2)].
inline double zeta_basis(int j, double t, double tau0, double omega0) {
  if (j < 0) throw std::invalid_argument("pixel index must be nonnegative");
  const double a = 0.5 * omega0 * (t - j * tau0);
  const double b = 0.5 * omega0 * (t - (j + 1) * tau0);
  return 0.5 * (std::erf(a) - std::erf(b));
}

// Pixelized complex envelope on a fixed bin grid with gaussian-filter smoothing.
// The carrier detuning is an optimization parameter and lives alongside the
// pixels in the flat parameter vector; the copy here is the seed value.
struct PixelPulse {
  Vector amplitudes;                   // rad/ns
  double bin = default_bin;            // ns
  double filter_bandwidth = default_bandwidth;
  double filter_omega0 = default_omega0;
  double duration = 0.0;               // ns
  double carrier_detuning = 0.0;       // rad/ns

  int n_pixels() const { return int(amplitudes.size()); }

  cd envelope(double t) const {
    return envelope_from(amplitudes, t, bin, filter_omega0);
  }

  static cd envelope_from(const Eigen::Ref<const Vector>& pix, double t, double tau0,
                          double omega0) {
    // zeta_j support is a few filter widths around pixel j
    const double cut = 8.0 / omega0;
    const int n = int(pix.size());
    int lo = int(std::floor((t - cut) / tau0)) - 1;
    int hi = int(std::ceil((t + cut) / tau0));
    lo = std::max(lo, 0);
    hi = std::min(hi, n - 1);
    cd acc{0.0, 0.0};
    for (int j = lo; j <= hi; ++j) acc += pix[j] * zeta_basis(j, t, tau0, omega0);
    return acc;
  }

  static PixelPulse flat_top(double amplitude, double duration, double bin = default_bin,
                             double omega0 = default_omega0) {
    PixelPulse p;
    const int n = std::max(1, int(std::floor(duration / bin + 1e-9)));
    p.amplitudes = Vector::Constant(n, cd(amplitude, 0.0));
    p.bin = bin;
    p.filter_omega0 = omega0;
    p.duration = duration;
    return p;
  }
};

// One RWA drive contribution  H += c(t,theta) A + h.c.  with
//   c(t,theta) = (weight/2) Omega(t;theta) exp(i (base_rate - delta) t),
// where Omega is the pixel envelope and delta the carrier detuning parameter
// (carrier = reference + delta; base_rate = mode frequency - reference).
struct DriveTerm {
  std::string name;
  SparseOp op;       // raising-type component
  SparseOp op_dag;
  cd weight{1.0, 0.0};
  double base_rate = 0.0;   // rad/ns
  double bin = default_bin;
  double omega0 = default_omega0;
  double duration = 0.0;
  int pixel_offset = 0;     // theta slice: [offset, offset + 2 n_pixels)
  int n_pixels = 0;
  int detuning_index = -1;  // theta slot; < 0 means fixed_detuning is used
  double fixed_detuning = 0.0;

  double detuning(const RealVector& theta) const {
    return detuning_index >= 0 ? theta[detuning_index] : fixed_detuning;
  }

  cd envelope(double t, const RealVector& theta) const {
    const double cut = 8.0 / omega0;
    int lo = std::max(0, int(std::floor((t - cut) / bin)) - 1);
    int hi = std::min(n_pixels - 1, int(std::ceil((t + cut) / bin)));
    cd acc{0.0, 0.0};
    for (int j = lo; j <= hi; ++j) {
      const cd pix{theta[pixel_offset + 2 * j], theta[pixel_offset + 2 * j + 1]};
      acc += pix * zeta_basis(j, t, bin, omega0);
    }
    return acc;
  }

  cd coefficient(double t, const RealVector& theta) const {
    const double rate = base_rate - detuning(theta);
    return 0.5 * weight * envelope(t, theta) * std::exp(ci * rate * t);
  }

  // Gradient contributions of this drive's parameters given the pairing scalar
  //   S = Tr[A (rho phi - phi rho)],
  // accumulating  w_dt * 2 Im(dc/dp * S)  into grad (see adjoint::backward_pass).
  void accumulate_gradient(double t, const RealVector& theta, cd s, double w_dt,
                           RealVector& grad) const {
    const double rate = base_rate - detuning(theta);
    const cd half_phase = 0.5 * weight * std::exp(ci * rate * t);
    const cd ps = half_phase * s;
    const double cut = 8.0 / omega0;
    int lo = std::max(0, int(std::floor((t - cut) / bin)) - 1);
    int hi = std::min(n_pixels - 1, int(std::ceil((t + cut) / bin)));
    cd env{0.0, 0.0};
    for (int j = lo; j <= hi; ++j) {
      const double z = zeta_basis(j, t, bin, omega0);
      const cd pix{theta[pixel_offset + 2 * j], theta[pixel_offset + 2 * j + 1]};
      env += pix * z;
      grad[pixel_offset + 2 * j] += w_dt * 2.0 * z * std::imag(ps);
      grad[pixel_offset + 2 * j + 1] += w_dt * 2.0 * z * std::real(ps);
    }
    if (detuning_index >= 0) {
      // dc/ddelta = -i t c
      const cd c = half_phase * env;
      grad[detuning_index] += w_dt * (-2.0 * t) * std::real(c * s);
    }
  }
};

// Per-parameter contributions of d/dtheta Tr[phi' dL/dtheta rho] for one drive,
// as used by the gradient integral. Returns the same values that
// accumulate_gradient adds (with unit quadrature weight).
inline RealVector liouvillian_param_derivative(const DriveTerm& drive, double t,
                                               const RealVector& theta,
                                               const Matrix& phi, const Matrix& rho) {
  Matrix a_rho = drive.op * rho;
  Matrix a_phi = drive.op * phi;
  const cd s = trace_of_product(a_rho, phi) - trace_of_product(a_phi, rho);
  RealVector grad = RealVector::Zero(theta.size());
  drive.accumulate_gradient(t, theta, s, 1.0, grad);
  return grad;
}

}  // namespace qoc::controls
