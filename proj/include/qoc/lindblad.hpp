#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qoc/controls.hpp"
#include "qoc/types.hpp"

namespace qoc::lindblad {

// Static Hamiltonian contribution  amp e^{i phase_rate t} op + h.c.
// (rotating-frame couplings; phase_rate = 0 gives a time-independent term).
struct StaticTerm {
  std::string name;
  SparseOp op;
  SparseOp op_dag;
  cd amp{0.0, 0.0};
  double phase_rate = 0.0;
};

struct DensityMatrix {
  Matrix matrix;
  double time = 0.0;
};

// Named scalar record  value(t) = e^{i phase_rate t} Tr[op rho(t)].
struct RecordOp {
  std::string name;
  SparseOp op;
  double phase_rate = 0.0;

  cd eval(double t, const Matrix& rho) const {
    return std::exp(ci * phase_rate * t) * trace_of_product(op, rho);
  }
};

// Time/parameter-dependent Liouvillian, applied directly to N x N matrices.
// The Liouvillian is never materialized as an N^2 x N^2 matrix; operators are
// kept sparse and states dense, so one application costs O(nnz * N).
class LindbladGenerator {
 public:
  int dim = 0;
  SparseOp h_static;                          // Hermitian
  std::vector<StaticTerm> couplings;          // h.c. added implicitly
  std::vector<controls::DriveTerm> drives;    // h.c. added implicitly
  std::vector<SparseOp> jump_ops;             // sqrt(rate) absorbed
  int n_params = 0;
  std::vector<std::string> param_names;

  void finalize() {
    jump_dag_.clear();
    pair_ops_.clear();
    pair_dag_.clear();
    SparseOp ksum(dim, dim);
    for (const auto& l : jump_ops) {
      jump_dag_.push_back(l.adjoint());
      ksum += SparseOp(jump_dag_.back() * l);
    }
    k_half_ = 0.5 * ksum;
    for (const auto& lj : jump_ops)
      for (const auto& lk : jump_ops) {
        pair_ops_.emplace_back(lj * lk);
        pair_dag_.emplace_back(pair_ops_.back().adjoint());
      }
    finalized_ = true;
  }
  bool finalized() const { return finalized_; }

  // frozen drive/coupling coefficients at one time
  struct Coeffs {
    double t = 0.0;
    std::vector<cd> c;  // couplings then drives
  };

  Coeffs eval_coeffs(double t, const RealVector& theta) const {
    Coeffs out;
    out.t = t;
    out.c.reserve(couplings.size() + drives.size());
    for (const auto& s : couplings) out.c.push_back(s.amp * std::exp(ci * s.phase_rate * t));
    for (const auto& d : drives) out.c.push_back(d.coefficient(t, theta));
    return out;
  }

  // out = H X (left) or X H (right)
  template <bool Left>
  void mul_h(const Coeffs& co, const Matrix& x, Matrix& out) const {
    if constexpr (Left) out.noalias() = h_static * x;
    else out.noalias() = x * h_static;
    size_t i = 0;
    for (const auto& s : couplings) {
      const cd c = co.c[i++];
      if constexpr (Left) {
        out.noalias() += c * (s.op * x);
        out.noalias() += std::conj(c) * (s.op_dag * x);
      } else {
        out.noalias() += c * (x * s.op);
        out.noalias() += std::conj(c) * (x * s.op_dag);
      }
    }
    for (const auto& d : drives) {
      const cd c = co.c[i++];
      if constexpr (Left) {
        out.noalias() += c * (d.op * x);
        out.noalias() += std::conj(c) * (d.op_dag * x);
      } else {
        out.noalias() += c * (x * d.op);
        out.noalias() += std::conj(c) * (x * d.op_dag);
      }
    }
  }

  // out = G X with G = -iH - 1/2 sum L'L
  void apply_g_left(const Coeffs& co, const Matrix& x, Matrix& out, Matrix& tmp) const {
    mul_h<true>(co, x, tmp);
    out.noalias() = -ci * tmp;
    out.noalias() -= k_half_ * x;
  }

  // out = X G' = i X H - X (1/2 sum L'L)
  void apply_g_right(const Coeffs& co, const Matrix& x, Matrix& out, Matrix& tmp) const {
    mul_h<false>(co, x, tmp);
    out.noalias() = ci * tmp;
    out.noalias() -= x * k_half_;
  }

  Matrix hamiltonian(double t, const RealVector& theta) const {
    Matrix h = Matrix(h_static);
    const Coeffs co = eval_coeffs(t, theta);
    size_t i = 0;
    for (const auto& s : couplings) {
      const cd c = co.c[i++];
      h += c * Matrix(s.op) + std::conj(c) * Matrix(s.op_dag);
    }
    for (const auto& d : drives) {
      const cd c = co.c[i++];
      h += c * Matrix(d.op) + std::conj(c) * Matrix(d.op_dag);
    }
    return h;
  }

  // L rho = -i[H, rho] + sum_k (L_k rho L_k' - 1/2 {L_k'L_k, rho})
  void apply_liouvillian(const Coeffs& co, const Matrix& rho, Matrix& out,
                         Matrix& tmp) const {
    mul_h<true>(co, rho, tmp);
    out.noalias() = -ci * tmp;
    mul_h<false>(co, rho, tmp);
    out.noalias() += ci * tmp;
    for (size_t k = 0; k < jump_ops.size(); ++k) {
      tmp.noalias() = jump_ops[k] * rho;
      out.noalias() += tmp * jump_dag_[k];
    }
    tmp.noalias() = k_half_ * rho;
    out.noalias() -= tmp;
    tmp.noalias() = rho * k_half_;
    out.noalias() -= tmp;
  }

  Matrix apply_liouvillian(double t, const RealVector& theta, const Matrix& rho) const {
    Matrix out(dim, dim), tmp(dim, dim);
    apply_liouvillian(eval_coeffs(t, theta), rho, out, tmp);
    return out;
  }

  // Returns the right-hand side of the adjoint equation, i.e. -L' phi:
  //   -i[H, phi] - sum_k (L_k' phi L_k - 1/2 {L_k'L_k, phi})
  void apply_adjoint_liouvillian(const Coeffs& co, const Matrix& phi, Matrix& out,
                                 Matrix& tmp) const {
    mul_h<true>(co, phi, tmp);
    out.noalias() = -ci * tmp;
    mul_h<false>(co, phi, tmp);
    out.noalias() += ci * tmp;
    for (size_t k = 0; k < jump_ops.size(); ++k) {
      tmp.noalias() = jump_dag_[k] * phi;
      out.noalias() -= tmp * jump_ops[k];
    }
    tmp.noalias() = k_half_ * phi;
    out.noalias() += tmp;
    tmp.noalias() = phi * k_half_;
    out.noalias() += tmp;
  }

  Matrix apply_adjoint_liouvillian(double t, const RealVector& theta,
                                   const Matrix& phi) const {
    Matrix out(dim, dim), tmp(dim, dim);
    apply_adjoint_liouvillian(eval_coeffs(t, theta), phi, out, tmp);
    return out;
  }

  const std::vector<SparseOp>& jump_dags() const { return jump_dag_; }
  const SparseOp& k_half() const { return k_half_; }
  const std::vector<SparseOp>& pair_ops() const { return pair_ops_; }
  const std::vector<SparseOp>& pair_dags() const { return pair_dag_; }

 private:
  std::vector<SparseOp> jump_dag_;
  SparseOp k_half_;
  std::vector<SparseOp> pair_ops_;  // L_j L_k, row-major over (j, k)
  std::vector<SparseOp> pair_dag_;
  bool finalized_ = false;
};

// --- steppers --------------------------------------------------------------

struct RouchonWorkspace {
  Matrix x1, x2, y, t0, t1, t2, acc, htmp;
  void resize(int n) {
    for (Matrix* m : {&x1, &x2, &y, &t0, &t1, &t2, &acc, &htmp})
      if (m->rows() != n) m->setZero(n, n);
  }
};

// One fixed step of the second-order Rouchon scheme: a Kraus-form update
//   M0 = 1 + dt G + dt^2/2 G^2,
//   M_k = sqrt(dt) (L_k + dt/2 (G L_k + L_k G)),
//   M_jk = dt/sqrt(2) L_j L_k,
// with G = -iH(t + dt/2) - 1/2 sum L'L, renormalized to unit trace.
// Completely positive by construction.
inline void rouchon2_step_inplace(const LindbladGenerator& gen, double t,
                                  const RealVector& theta, Matrix& rho, double dt,
                                  RouchonWorkspace& ws) {
  ws.resize(gen.dim);
  const auto co = gen.eval_coeffs(t + 0.5 * dt, theta);
  const double h = dt;

  gen.apply_g_left(co, rho, ws.x1, ws.htmp);
  gen.apply_g_left(co, ws.x1, ws.x2, ws.htmp);
  ws.y = rho + h * ws.x1 + (0.5 * h * h) * ws.x2;
  gen.apply_g_right(co, ws.y, ws.t0, ws.htmp);
  gen.apply_g_right(co, ws.t0, ws.t1, ws.htmp);
  ws.acc = ws.y + h * ws.t0 + (0.5 * h * h) * ws.t1;

  const auto& jumps = gen.jump_ops;
  const auto& jdags = gen.jump_dags();
  for (size_t k = 0; k < jumps.size(); ++k) {
    // T = U rho with U = L + dt/2 (G L + L G)
    ws.t0.noalias() = jumps[k] * rho;
    gen.apply_g_left(co, ws.t0, ws.t1, ws.htmp);
    ws.t1.noalias() += jumps[k] * ws.x1;
    ws.y = ws.t0 + (0.5 * h) * ws.t1;
    // acc += dt * (T U')
    ws.t0.noalias() = ws.y * jdags[k];
    gen.apply_g_right(co, ws.t0, ws.t1, ws.htmp);
    gen.apply_g_right(co, ws.y, ws.t2, ws.htmp);
    ws.t1.noalias() += ws.t2 * jdags[k];
    ws.acc.noalias() += h * ws.t0;
    ws.acc.noalias() += (0.5 * h * h) * ws.t1;
  }
  const auto& pairs = gen.pair_ops();
  const auto& pair_dags = gen.pair_dags();
  for (size_t p = 0; p < pairs.size(); ++p) {
    ws.t0.noalias() = pairs[p] * rho;
    ws.t1.noalias() = ws.t0 * pair_dags[p];
    ws.acc.noalias() += (0.5 * h * h) * ws.t1;
  }
  const double tr = ws.acc.real().trace();
  if (!(tr > 0.0) || !std::isfinite(tr))
    throw NumericalError("rouchon2: nonpositive trace after step");
  rho = ws.acc / tr;
}

inline DensityMatrix rouchon2_step(const LindbladGenerator& gen, double t,
                                   const RealVector& theta, const Matrix& rho,
                                   double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rouchon2: dt must be positive");
  RouchonWorkspace ws;
  Matrix out = rho;
  rouchon2_step_inplace(gen, t, theta, out, dt, ws);
  return {std::move(out), t + dt};
}

// Second-order expansion step  y <- y + s dt A(tm) y + (dt^2/2) A(tm)^2 y
// used for the reverse-time master equation (A = -L) and the adjoint
// equation (A = -L'), both integrated in the direction of decreasing t.
enum class ReverseKind { density, adjoint };

inline void reverse_step_inplace(const LindbladGenerator& gen, double t,
                                 const RealVector& theta, Matrix& y, double dt,
                                 ReverseKind kind, RouchonWorkspace& ws) {
  ws.resize(gen.dim);
  const auto co = gen.eval_coeffs(t - 0.5 * dt, theta);
  if (kind == ReverseKind::density) {
    // y(t - dt) = y - dt L y + dt^2/2 L^2 y
    gen.apply_liouvillian(co, y, ws.x1, ws.htmp);
    gen.apply_liouvillian(co, ws.x1, ws.x2, ws.htmp);
    y.noalias() -= dt * ws.x1;
    y.noalias() += (0.5 * dt * dt) * ws.x2;
  } else {
    // d phi/dt = -L' phi; stepping t -> t - dt:
    // phi(t - dt) = phi + dt L' phi + dt^2/2 L'^2 phi
    gen.apply_adjoint_liouvillian(co, y, ws.x1, ws.htmp);  // returns -L' phi
    gen.apply_adjoint_liouvillian(co, ws.x1, ws.x2, ws.htmp);
    y.noalias() -= dt * ws.x1;
    y.noalias() += (0.5 * dt * dt) * ws.x2;
  }
}

// --- Dormand-Prince 4(5) -----------------------------------------------

struct Dp45Config {
  double tol = 1e-8;        // atol = rtol = tol, max-abs entrywise norm
  double dt_min = 1e-7;     // ns (1e-16 s)
  double dt_max = 1.0;      // ns
  double dt_init = 0.01;    // ns
  double safety = 0.9;
};

struct Dp45Workspace {
  std::array<Matrix, 7> k;
  Matrix y5, y4, ytmp;
  void resize(int n) {
    for (auto& m : k)
      if (m.rows() != n) m.setZero(n, n);
    for (Matrix* m : {&y5, &y4, &ytmp})
      if (m->rows() != n) m->setZero(n, n);
  }
};

namespace dp45_detail {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp45_detail

// One embedded 4/5 attempt in integration direction dir (+1 forward, -1 reverse).
// rhs(t, y, out) evaluates dy/dt. Returns whether the step was accepted, the
// (signed) step actually taken and a suggestion for the next step size.
template <class Rhs>
struct Dp45Step {
  bool accepted = false;
  double dt_done = 0.0;
  double dt_next = 0.0;
  double error = 0.0;
};

template <class Rhs>
inline Dp45Step<Rhs> dp45_try_step(const Rhs& rhs, double t, const Matrix& y, double h,
                                   double dir, const Dp45Config& cfg,
                                   Dp45Workspace& ws) {
  using namespace dp45_detail;
  ws.resize(int(y.rows()));
  const double s = dir * h;
  rhs(t, y, ws.k[0]);
  ws.ytmp = y + s * (a21 * ws.k[0]);
  rhs(t + s * c2, ws.ytmp, ws.k[1]);
  ws.ytmp = y + s * (a31 * ws.k[0] + a32 * ws.k[1]);
  rhs(t + s * c3, ws.ytmp, ws.k[2]);
  ws.ytmp = y + s * (a41 * ws.k[0] + a42 * ws.k[1] + a43 * ws.k[2]);
  rhs(t + s * c4, ws.ytmp, ws.k[3]);
  ws.ytmp = y + s * (a51 * ws.k[0] + a52 * ws.k[1] + a53 * ws.k[2] + a54 * ws.k[3]);
  rhs(t + s * c5, ws.ytmp, ws.k[4]);
  ws.ytmp = y + s * (a61 * ws.k[0] + a62 * ws.k[1] + a63 * ws.k[2] + a64 * ws.k[3] +
                     a65 * ws.k[4]);
  rhs(t + s, ws.ytmp, ws.k[5]);
  ws.y5 = y + s * (b1 * ws.k[0] + b3 * ws.k[2] + b4 * ws.k[3] + b5 * ws.k[4] +
                   b6 * ws.k[5]);
  rhs(t + s, ws.y5, ws.k[6]);

  ws.ytmp = s * (e1 * ws.k[0] + e3 * ws.k[2] + e4 * ws.k[3] + e5 * ws.k[4] +
                 e6 * ws.k[5] + e7 * ws.k[6]);
  double err = 0.0;
  for (int c = 0; c < ws.ytmp.cols(); ++c)
    for (int r = 0; r < ws.ytmp.rows(); ++r) {
      const double scale =
          cfg.tol + cfg.tol * std::max(std::abs(y(r, c)), std::abs(ws.y5(r, c)));
      err = std::max(err, std::abs(ws.ytmp(r, c)) / scale);
    }

  Dp45Step<Rhs> out;
  out.error = err;
  out.accepted = std::isfinite(err) && err <= 1.0;
  const double factor =
      (err > 0.0 && std::isfinite(err))
          ? std::clamp(cfg.safety * std::pow(err, -0.2), 0.2, 5.0)
          : (std::isfinite(err) ? 5.0 : 0.2);
  out.dt_done = h;
  out.dt_next = std::clamp(h * factor, cfg.dt_min, cfg.dt_max);
  return out;
}

// Spec-shaped single adaptive step of the master equation.
inline std::tuple<DensityMatrix, double, double> dp45_step(
    const LindbladGenerator& gen, double t, const RealVector& theta, const Matrix& rho,
    double dt, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("dp45: tol must be positive");
  Dp45Config cfg;
  cfg.tol = tol;
  Dp45Workspace ws;
  Matrix tmp(gen.dim, gen.dim);
  auto rhs = [&](double tt, const Matrix& y, Matrix& out) {
    gen.apply_liouvillian(gen.eval_coeffs(tt, theta), y, out, tmp);
  };
  double h = std::clamp(dt, cfg.dt_min, cfg.dt_max);
  Matrix y = rho;
  for (;;) {
    auto step = dp45_try_step(rhs, t, y, h, +1.0, cfg, ws);
    if (step.accepted)
      return {DensityMatrix{ws.y5, t + h}, h, step.dt_next};
    if (step.dt_next <= cfg.dt_min || h <= cfg.dt_min)
      throw NumericalError("dp45: step size underflow (stiff problem?)");
    h = step.dt_next;
  }
}

// --- trajectory integration ----------------------------------------------

struct Trajectory {
  RealVector save_times;
  std::vector<Matrix> states;  // empty unless requested
  std::vector<std::pair<std::string, Vector>> scalar_records;
  Matrix final_state;
  double final_time = 0.0;
  long step_count = 0;

  const Vector& record(const std::string& name) const {
    for (const auto& [n, v] : scalar_records)
      if (n == name) return v;
    throw std::invalid_argument("trajectory record not found: " + name);
  }
  bool has_record(const std::string& name) const {
    for (const auto& [n, v] : scalar_records)
      if (n == name) return true;
    return false;
  }
};

struct SolverConfig {
  enum class Method { rouchon2, dp45 };
  Method method = Method::rouchon2;
  double dt = 0.003;   // ns, fixed step
  double tol = 1e-8;   // dp45
  double dt_init = 0.01;
  double dt_max = 1.0;
};

struct IntegrateOptions {
  bool store_states = false;
  const std::vector<RecordOp>* records = nullptr;
};

// Fixed-step substep targets covering (a, b]; deterministic, replayable reversed.
inline std::vector<double> substep_times(double a, double b, double dt) {
  std::vector<double> out;
  const double span = b - a;
  const long n_full = long(std::floor(span / dt + 1e-9));
  out.reserve(size_t(n_full) + 1);
  for (long i = 1; i <= n_full; ++i) out.push_back(a + double(i) * dt);
  if (out.empty() || b - out.back() > 1e-9 * std::max(1.0, std::abs(b))) out.push_back(b);
  else out.back() = b;
  return out;
}

inline Trajectory integrate(const LindbladGenerator& gen, const RealVector& theta,
                            const Matrix& rho0, double t0, double tn,
                            const RealVector& save_times, const SolverConfig& solver,
                            const IntegrateOptions& opts = {}) {
  if (!(t0 <= tn)) throw std::invalid_argument("integrate: t0 must be <= tn");
  std::vector<double> saves(save_times.data(), save_times.data() + save_times.size());
  for (size_t i = 1; i < saves.size(); ++i)
    if (saves[i] <= saves[i - 1])
      throw std::invalid_argument("integrate: save times must be strictly increasing");
  for (double s : saves)
    if (s < t0 - 1e-12 || s > tn + 1e-12)
      throw std::invalid_argument("integrate: save time outside [t0, tn]");

  Trajectory traj;
  traj.save_times = save_times;
  const int n_rec = opts.records ? int(opts.records->size()) : 0;
  std::vector<Vector> recs(n_rec, Vector::Zero(save_times.size()));

  Matrix rho = rho0;
  double t = t0;
  RouchonWorkspace rws;
  Dp45Workspace dws;
  Matrix tmp(gen.dim, gen.dim);
  auto rhs = [&](double tt, const Matrix& y, Matrix& out) {
    gen.apply_liouvillian(gen.eval_coeffs(tt, theta), y, out, tmp);
  };
  Dp45Config cfg;
  cfg.tol = solver.tol;
  cfg.dt_max = solver.dt_max;
  double h_next = solver.dt_init;

  auto do_record = [&](int save_idx) {
    for (int r = 0; r < n_rec; ++r)
      recs[r][save_idx] = (*opts.records)[r].eval(t, rho);
    if (opts.store_states) traj.states.push_back(rho);
  };

  int save_idx = 0;
  // leading saves exactly at t0
  while (save_idx < int(saves.size()) && saves[save_idx] <= t0 + 1e-12) {
    do_record(save_idx);
    ++save_idx;
  }
  std::vector<double> events(saves.begin() + save_idx, saves.end());
  if (events.empty() || events.back() < tn - 1e-12) events.push_back(tn);

  for (double target : events) {
    if (solver.method == SolverConfig::Method::rouchon2) {
      for (double tt : substep_times(t, target, solver.dt)) {
        if (tt - t < 1e-15) continue;
        rouchon2_step_inplace(gen, t, theta, rho, tt - t, rws);
        t = tt;
        ++traj.step_count;
      }
      t = target;
    } else {
      while (t < target - 1e-12) {
        double h = std::min(h_next, target - t);
        for (;;) {
          auto step = dp45_try_step(rhs, t, rho, h, +1.0, cfg, dws);
          if (step.accepted) {
            rho = dws.y5;
            t += h;
            h_next = step.dt_next;
            ++traj.step_count;
            break;
          }
          if (step.dt_next <= cfg.dt_min || h <= cfg.dt_min)
            throw NumericalError("dp45: step size underflow (stiff problem?)");
          h = step.dt_next;
        }
      }
      t = target;
    }
    if (save_idx < int(saves.size()) && std::abs(saves[save_idx] - t) <= 1e-9) {
      do_record(save_idx);
      ++save_idx;
    }
  }
  traj.final_state = rho;
  traj.final_time = t;
  if (opts.records)
    for (int r = 0; r < n_rec; ++r)
      traj.scalar_records.emplace_back((*opts.records)[r].name, std::move(recs[r]));
  return traj;
}

}  // namespace qoc::lindblad
