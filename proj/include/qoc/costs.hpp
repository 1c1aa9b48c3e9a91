#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "qoc/lindblad.hpp"

namespace qoc::costs {

using lindblad::LindbladGenerator;
using lindblad::RecordOp;
using lindblad::Trajectory;

// --- SNR and derived quantities -------------------------------------------

// sqrt(2 eta kappa int_0^tau_m |beta_e - beta_g|^2 dt), left-Riemann on the
// record grid (1 ns bins by default).
inline double snr(const Vector& beta_g, const Vector& beta_e, double eta, double kappa,
                  double tau_m, double dt = 1.0) {
  if (beta_g.size() != beta_e.size())
    throw std::invalid_argument("snr: mismatched record grids");
  double q = 0.0;
  const int n = int(beta_g.size());
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    if (t >= tau_m - 1e-9) break;
    q += std::norm(beta_e[k] - beta_g[k]) * dt;
  }
  return std::sqrt(2.0 * eta * kappa * q);
}

// eps_a = 1/2 erfc(SNR/2) + tau_m / (2 T1)
inline double assignment_error(double snr_value, double tau_m, double t1) {
  if (snr_value < 0.0) throw std::invalid_argument("assignment_error: negative SNR");
  return 0.5 * std::erfc(0.5 * snr_value) + tau_m / (2.0 * t1);
}

// SNR(tau_m) = alpha sqrt(2 eta kappa) (sqrt(tau_m) - sqrt(tau_m0)) with
// alpha = 2 |Omega_f sin(2 phi)| / kappa and phi = arctan(2 chi / kappa).
// All three of (kappa, chi, Omega_f) refer to the readout normal mode:
// its decay rate, dispersive half-shift, and RWA drive amplitude. With those
// conventions the formula reproduces the bare-kappa SNR of Eq.-(6)-style
// records exactly in the linear regime.
struct SnrFitModel {
  double alpha = 0.0;
  double phi_angle = 0.0;
  double tau_m0 = 0.0;
  double max_residual = 0.0;  // relative, over the fitted samples
};

inline SnrFitModel snr_fit(double kappa, double chi, double omega_f, double eta,
                           const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 3) throw std::invalid_argument("snr_fit: need at least 3 samples");
  SnrFitModel m;
  m.phi_angle = std::atan(2.0 * chi / kappa);
  m.alpha = 2.0 * std::abs(omega_f * std::sin(2.0 * m.phi_angle)) / kappa;
  const double a = m.alpha * std::sqrt(2.0 * eta * kappa);
  if (!(a > 0.0)) throw std::invalid_argument("snr_fit: degenerate fit (alpha = 0)");
  double s = 0.0;
  for (const auto& [tau, y] : samples) s += std::sqrt(tau) - y / a;
  s /= double(samples.size());
  m.tau_m0 = s > 0.0 ? s * s : 0.0;
  const double sq0 = s > 0.0 ? s : 0.0;
  for (const auto& [tau, y] : samples) {
    const double model = a * (std::sqrt(tau) - sq0);
    if (y > 0.0) m.max_residual = std::max(m.max_residual, std::abs(y - model) / y);
  }
  return m;
}

// --- cost terms -------------------------------------------------------------

// Adjoint seed contribution at one save time: phi += 2 Herm(coeff * op).
struct AdjointKick {
  int op_index = -1;
  cd coeff{0.0, 0.0};
};

// Linear combination of named records, evaluated per save index.
struct RecordCombination {
  std::vector<std::pair<std::string, cd>> parts;

  cd eval(const Trajectory& traj, int k) const {
    cd acc{0.0, 0.0};
    for (const auto& [name, c] : parts) acc += c * traj.record(name)[k];
    return acc;
  }
};

// 1/SNR over the pointer-state records of the (g, e) trajectory pair.
struct InverseSnr {
  double eta = 0.6;
  double kappa = two_pi * 0.030;
  RecordCombination field;  // beta(t) per trajectory
  int traj_g = 0, traj_e = 1;
};

// (1/tau_m) int ReLU(|Omega(t)| - Omega_max) dt for one drive envelope.
struct AmplitudePenalty {
  int drive_index = 0;
  double omega_max = two_pi * 0.200;
};

// Time-averaged population of forbidden levels (record = projector sum).
struct ForbiddenStates {
  std::vector<int> trajs;
  std::string record;
};

// (1/tau_m) int ReLU(nbar(t) - cap) dt with nbar a real record combination.
struct PhotonCap {
  std::vector<int> trajs;
  RecordCombination nbar;
  double cap = 16.0;
};

// log10(1 - |<g00|rho(tau_m)|g00>|^2), clamped at 1e-12; `square` selects the
// literal squared form, otherwise plain population 1 - p.
struct ResetInfidelity {
  int traj = 0;
  std::string record = "p_g00";
  bool square = true;
};

using TermVariant =
    std::variant<InverseSnr, AmplitudePenalty, ForbiddenStates, PhotonCap, ResetInfidelity>;

struct WeightedTerm {
  std::string label;
  double weight = 1.0;
  TermVariant term;
};

struct CostSpec {
  std::vector<WeightedTerm> terms;
  double snr_floor = 1e-9;       // clamp for 1/SNR at zero drive
  double reset_floor = 1e-12;    // clamp for log10(1 - p^2)
};

struct Seeds {
  double total = 0.0;
  std::vector<double> term_values;  // weighted contributions, per term
  // kicks[traj][save_index] -> adjoint kicks
  std::vector<std::vector<std::vector<AdjointKick>>> kicks;
  RealVector dc_dtheta;
};

namespace detail {

inline int op_index(const std::vector<RecordOp>& ops, const std::string& name) {
  for (size_t i = 0; i < ops.size(); ++i)
    if (ops[i].name == name) return int(i);
  throw std::invalid_argument("cost term references unknown record op: " + name);
}

// Wirtinger convention: dC = 2 Re[dc_df * df] for the combination value
// f = sum_i c_i e^{i phase t} Tr[op_i rho]; the emitted kicks reproduce this
// through phi += 2 Herm(coeff * op).
inline void emit_kicks(const RecordCombination& comb, const std::vector<RecordOp>& ops,
                       double t, cd dc_df, double weight,
                       std::vector<AdjointKick>& out) {
  for (const auto& [name, c] : comb.parts) {
    const int idx = op_index(ops, name);
    const cd phase = std::exp(ci * ops[idx].phase_rate * t);
    out.push_back({idx, weight * dc_df * c * phase});
  }
}

}  // namespace detail

// Total weighted cost, adjoint kicks per trajectory and save time, and the
// direct parameter partial. Trajectories must carry every referenced record.
inline Seeds cost_value_and_seeds(const CostSpec& spec,
                                  const std::vector<Trajectory>& trajs,
                                  const RealVector& theta, const LindbladGenerator& gen,
                                  const std::vector<RecordOp>& record_ops,
                                  double tau_m) {
  Seeds seeds;
  seeds.dc_dtheta = RealVector::Zero(theta.size());
  const int n_save = trajs.empty() ? 0 : int(trajs[0].save_times.size());
  seeds.kicks.assign(trajs.size(), std::vector<std::vector<AdjointKick>>(n_save));
  const double grid_dt =
      n_save > 1 ? trajs[0].save_times[1] - trajs[0].save_times[0] : 1.0;

  for (const auto& wt : spec.terms) {
    double value = 0.0;
    const double w = wt.weight;

    if (const auto* t = std::get_if<InverseSnr>(&wt.term)) {
      const auto& tg = trajs.at(t->traj_g);
      const auto& te = trajs.at(t->traj_e);
      double q = 0.0;
      std::vector<cd> diff(n_save, cd(0, 0));
      int active = 0;
      for (int k = 0; k < n_save; ++k) {
        if (tg.save_times[k] >= tau_m - 1e-9) break;
        diff[k] = t->field.eval(te, k) - t->field.eval(tg, k);
        q += std::norm(diff[k]) * grid_dt;
        active = k + 1;
      }
      const double s = std::max(std::sqrt(2.0 * t->eta * t->kappa * q), spec.snr_floor);
      value = 1.0 / s;
      const double pref = t->eta * t->kappa * grid_dt / (s * s * s);
      for (int k = 0; k < active; ++k) {
        const double tk = tg.save_times[k];
        const cd dc_dbe = -pref * std::conj(diff[k]);
        detail::emit_kicks(t->field, record_ops, tk, dc_dbe, w,
                           seeds.kicks[t->traj_e][k]);
        detail::emit_kicks(t->field, record_ops, tk, -dc_dbe, w,
                           seeds.kicks[t->traj_g][k]);
      }
    } else if (const auto* t = std::get_if<AmplitudePenalty>(&wt.term)) {
      const auto& drive = gen.drives.at(t->drive_index);
      const int nbins = int(std::floor(tau_m / grid_dt + 1e-9));
      for (int k = 0; k < nbins; ++k) {
        const double tk = k * grid_dt;
        const cd omega = drive.envelope(tk, theta);
        const double mag = std::abs(omega);
        if (mag > t->omega_max) {
          value += (mag - t->omega_max) * grid_dt / tau_m;
          const double pref = w * grid_dt / tau_m / mag;
          const double cut = 8.0 / drive.omega0;
          int lo = std::max(0, int(std::floor((tk - cut) / drive.bin)) - 1);
          int hi = std::min(drive.n_pixels - 1, int(std::ceil((tk + cut) / drive.bin)));
          for (int j = lo; j <= hi; ++j) {
            const double z = controls::zeta_basis(j, tk, drive.bin, drive.omega0);
            seeds.dc_dtheta[drive.pixel_offset + 2 * j] += pref * std::real(omega) * z;
            seeds.dc_dtheta[drive.pixel_offset + 2 * j + 1] += pref * std::imag(omega) * z;
          }
        }
      }
    } else if (const auto* t = std::get_if<ForbiddenStates>(&wt.term)) {
      for (int traj_idx : t->trajs) {
        const auto& traj = trajs.at(traj_idx);
        const auto& rec = traj.record(t->record);
        for (int k = 0; k < n_save; ++k) {
          if (traj.save_times[k] >= tau_m - 1e-9) break;
          value += std::real(rec[k]) * grid_dt / tau_m;
          const int idx = detail::op_index(record_ops, t->record);
          seeds.kicks[traj_idx][k].push_back({idx, 0.5 * w * grid_dt / tau_m});
        }
      }
    } else if (const auto* t = std::get_if<PhotonCap>(&wt.term)) {
      for (int traj_idx : t->trajs) {
        const auto& traj = trajs.at(traj_idx);
        for (int k = 0; k < n_save; ++k) {
          if (traj.save_times[k] >= tau_m - 1e-9) break;
          const double nbar = std::real(t->nbar.eval(traj, k));
          if (nbar > t->cap) {
            value += (nbar - t->cap) * grid_dt / tau_m;
            // nbar = Re(f): d(nbar) = 2 Re[(1/2) df]
            detail::emit_kicks(t->nbar, record_ops, traj.save_times[k],
                               cd(0.5 * grid_dt / tau_m, 0.0), w,
                               seeds.kicks[traj_idx][k]);
          }
        }
      }
    } else if (const auto* t = std::get_if<ResetInfidelity>(&wt.term)) {
      const auto& traj = trajs.at(t->traj);
      const int last = n_save - 1;
      const double p = std::real(traj.record(t->record)[last]);
      const double q = t->square ? 1.0 - p * p : 1.0 - p;
      const double qc = std::max(q, spec.reset_floor);
      value = std::log10(qc);
      double dv_dp = 0.0;
      if (q > spec.reset_floor)
        dv_dp = (t->square ? -2.0 * p : -1.0) / (qc * std::log(10.0));
      const int idx = detail::op_index(record_ops, t->record);
      seeds.kicks[t->traj][last].push_back({idx, 0.5 * w * dv_dp});
    }

    seeds.term_values.push_back(w * value);
    seeds.total += w * value;
  }
  return seeds;
}

}  // namespace qoc::costs
