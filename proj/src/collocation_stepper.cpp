#include "haarsim/collocation_stepper.hpp"

#include "haarsim/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace haarsim {

namespace {

using Factor = KroneckerSumOperator::Factor;

std::vector<Factor> factors_with(const std::vector<AxisOperators>& axes, std::size_t axis,
                                 const Factor& m) {
  std::vector<Factor> f;
  for (std::size_t a = 0; a < axes.size(); ++a) f.push_back(a == axis ? m : axes[a].n0);
  return f;
}

std::vector<const Eigen::MatrixXd*> raw(const std::vector<Factor>& f) {
  std::vector<const Eigen::MatrixXd*> r;
  for (const auto& m : f) r.push_back(m.get());
  return r;
}

bool all_equal(const Eigen::VectorXd& s) {
  return s.size() == 0 || (s.array() == s[0]).all();
}

/// Adds sum_a [diag(s_a) D2_a + diag(s'_a) D1_a] scaled by `coeff` to `op`,
/// where D2_a/D1_a are the second/first derivative along axis a of the
/// tensor Neumann basis. Constant coefficients become plain multipliers and
/// vanishing derivatives are skipped.
void add_divergence(KroneckerSumOperator& op, const std::vector<AxisOperators>& axes,
                    const std::vector<Eigen::VectorXd>& s, const std::vector<Eigen::VectorXd>& sd,
                    double coeff) {
  for (std::size_t a = 0; a < axes.size(); ++a) {
    if (all_equal(s[a])) {
      if (s[a][0] != 0.0) op.add_term(factors_with(axes, a, axes[a].n2), {}, coeff * s[a][0]);
    } else {
      op.add_term(factors_with(axes, a, axes[a].n2), s[a], coeff);
    }
    if (!sd[a].isZero(0.0)) op.add_term(factors_with(axes, a, axes[a].n1), sd[a], coeff);
  }
}

/// Right preconditioner: exact inverse of the block system with every
/// conductivity replaced by its mean over the collocation points and the
/// derivative terms dropped. Per axis S = N2 N0^{-1} = X diag(lambda) X^{-1};
/// the mean operator is diagonal in the tensor eigenbasis, leaving a 2x2 solve
/// per mode. The constant mode (lambda = 0 on every axis) carries the
/// compatibility absorber instead of the u_e component.
class FastDiagPreconditioner final : public LinearOperator {
 public:
  FastDiagPreconditioner(const std::vector<AxisOperators>& axes, const std::vector<double>& si,
                         const std::vector<double>& se, double cm, double dt)
      : cm_(cm), dt_(dt) {
    n_ = 1;
    std::vector<Eigen::VectorXd> lambda;
    std::vector<std::size_t> zero;
    double kappa = 1.0;
    for (const auto& ax : axes) {
      const Eigen::MatrixXd n0inv = ax.n0->partialPivLu().inverse();
      const Eigen::MatrixXd s = *ax.n2 * n0inv;
      Eigen::EigenSolver<Eigen::MatrixXd> es(s);
      if (es.info() != Eigen::Success) throw NumericalError("preconditioner eigensolve failed", 0.0);
      const Eigen::VectorXd im = es.eigenvalues().imag();
      const Eigen::VectorXd re = es.eigenvalues().real();
      if (im.cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, re.cwiseAbs().maxCoeff())) {
        throw NumericalError("axis operator has complex spectrum", im.cwiseAbs().maxCoeff());
      }
      const Eigen::MatrixXd x = es.pseudoEigenvectors();
      const Eigen::MatrixXd xinv = x.partialPivLu().inverse();
      Eigen::Index z = 0;
      re.cwiseAbs().minCoeff(&z);
      kappa *= (xinv * Eigen::VectorXd::Ones(x.rows()))[z];
      xinv_.push_back(std::make_shared<const Eigen::MatrixXd>(xinv));
      t_.push_back(std::make_shared<const Eigen::MatrixXd>(n0inv * x));
      lambda.push_back(re);
      zero.push_back(static_cast<std::size_t>(z));
      n_ *= static_cast<std::size_t>(ax.size());
    }

    double se_sum = 0.0;
    double sie_sum = 0.0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      se_sum += se[a];
      sie_sum += si[a] + se[a];
    }
    absorber_scale_ = sie_sum * kappa;
    row1_coupling_ = se_sum * kappa;

    li_.resize(static_cast<Eigen::Index>(n_));
    le_.resize(static_cast<Eigen::Index>(n_));
    zero_flat_ = 0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      zero_flat_ = zero_flat_ * static_cast<std::size_t>(axes[a].size()) + zero[a];
    }
    for (std::size_t q = 0; q < n_; ++q) {
      std::size_t rem = q;
      double li = 0.0;
      double le = 0.0;
      for (std::size_t a = axes.size(); a-- > 0;) {
        const auto na = static_cast<std::size_t>(axes[a].size());
        const double lam = lambda[a][static_cast<Eigen::Index>(rem % na)];
        rem /= na;
        li += si[a] * lam;
        le += se[a] * lam;
      }
      li_[static_cast<Eigen::Index>(q)] = li;
      le_[static_cast<Eigen::Index>(q)] = le;
    }
  }

  std::size_t dim() const override { return 2 * n_; }

  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& out) const override {
    const auto n = static_cast<Eigen::Index>(n_);
    const Eigen::VectorXd h1 = kron_apply(raw(xinv_), r.head(n));
    const Eigen::VectorXd h2 = kron_apply(raw(xinv_), r.tail(n));
    Eigen::VectorXd vh(n);
    Eigen::VectorXd uh(n);
    for (Eigen::Index q = 0; q < n; ++q) {
      const double li = li_[q];
      const double le = le_[q];
      const double lie = li + le;
      const double det = cm_ * lie - dt_ * le * li;
      if (std::abs(det) <= 1e-14 * (cm_ * std::abs(lie) + dt_ * std::abs(le * li)) || det == 0.0) {
        vh[q] = h1[q] / cm_;
        uh[q] = 0.0;
      } else {
        vh[q] = (lie * h1[q] - le * h2[q]) / det;
        uh[q] = (cm_ * h2[q] - dt_ * li * h1[q]) / det;
      }
    }
    const auto z = static_cast<Eigen::Index>(zero_flat_);
    const double babs = absorber_scale_ != 0.0 ? h2[z] / absorber_scale_ : 0.0;
    vh[z] = (h1[z] - row1_coupling_ * babs) / cm_;
    uh[z] = 0.0;

    out.resize(2 * n);
    out.head(n) = kron_apply(raw(t_), vh);
    out.tail(n) = kron_apply(raw(t_), uh);
    out[n] = babs;
  }

 private:
  std::vector<Factor> xinv_;
  std::vector<Factor> t_;
  Eigen::VectorXd li_, le_;
  std::size_t n_ = 0;
  std::size_t zero_flat_ = 0;
  double absorber_scale_ = 0.0;
  double row1_coupling_ = 0.0;
  double cm_;
  double dt_;
};

}  // namespace

AxisOperators::AxisOperators(const HaarBasis& b) : basis(b), y(collocation_grid(b).y) {
  const OperatorMatrices m = assemble_matrices(b);
  Eigen::MatrixXd n0 = m.P2.transpose();
  Eigen::MatrixXd n1 = m.P1.transpose();
  Eigen::MatrixXd n2 = m.H.transpose();
  n0.col(0).setOnes();
  n1.col(0).setZero();
  n2.col(0).setZero();
  const Eigen::VectorXd d = m.H.rowwise().squaredNorm();
  this->n0 = std::make_shared<const Eigen::MatrixXd>(std::move(n0));
  this->n1 = std::make_shared<const Eigen::MatrixXd>(std::move(n1));
  this->n2 = std::make_shared<const Eigen::MatrixXd>(std::move(n2));
  ht = std::make_shared<const Eigen::MatrixXd>(m.H.transpose());
  ht_inv = std::make_shared<const Eigen::MatrixXd>(d.cwiseInverse().asDiagonal() * m.H);
}

void SteppingConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("time step dt must be positive");
  gmres.validate();
}

CollocationStepper::CollocationStepper(BidomainProblem problem, std::vector<int> levels,
                                       SteppingConfig cfg)
    : problem_(std::move(problem)), cfg_(std::move(cfg)) {
  problem_.validate();
  cfg_.validate();
  const int d = problem_.domain.dim;
  if (levels.size() == 1) levels.resize(static_cast<std::size_t>(d), levels[0]);
  if (levels.size() != static_cast<std::size_t>(d)) {
    throw DomainError("one resolution level per axis is required");
  }
  npts_ = 1;
  for (int a = 0; a < d; ++a) {
    axes_.emplace_back(HaarBasis(problem_.domain.lo[a], problem_.domain.hi[a], levels[a]));
    npts_ *= static_cast<std::size_t>(axes_.back().size());
  }
  if (cfg_.anchor_index >= npts_) throw DomainError("anchor index outside the collocation grid");

  const double ratio = problem_.t_final / cfg_.dt;
  steps_ = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(static_cast<double>(steps_) * cfg_.dt - problem_.t_final) >
      1e-9 * std::max(problem_.t_final, cfg_.dt)) {
    throw DomainError("dt must divide the final time into a whole number of steps");
  }

  coords_.resize(npts_);
  absorber_.resize(static_cast<Eigen::Index>(npts_));
  for (std::size_t p = 0; p < npts_; ++p) {
    std::size_t rem = p;
    Point x{0.0, 0.0, 0.0};
    double g = 0.0;
    for (int a = d - 1; a >= 0; --a) {
      const auto n = static_cast<std::size_t>(axes_[a].size());
      x[a] = axes_[a].y[rem % n];
      rem /= n;
      const double r = x[a] - problem_.domain.lo[a];
      g += 0.5 * r * r;
    }
    coords_[p] = x;
    absorber_[static_cast<Eigen::Index>(p)] = g;
  }
  build_operators();
}

std::vector<std::size_t> CollocationStepper::shape() const {
  std::vector<std::size_t> s;
  for (const auto& a : axes_) s.push_back(static_cast<std::size_t>(a.size()));
  return s;
}

Point CollocationStepper::point(std::size_t flat) const {
  if (flat >= npts_) throw DomainError("collocation index out of range");
  return coords_[flat];
}

double CollocationStepper::cell_volume() const {
  double v = 1.0;
  for (const auto& a : axes_) v *= a.basis.dx();
  return v;
}

void CollocationStepper::build_operators() {
  const int d = dim();
  const auto n = static_cast<Eigen::Index>(npts_);
  std::vector<Eigen::VectorXd> se(d), sed(d), sie(d), sied(d);
  sigma_i_.assign(d, Eigen::VectorXd(n));
  sigma_i_d_.assign(d, Eigen::VectorXd(n));
  sigma_i_varies_.assign(d, false);
  for (int a = 0; a < d; ++a) {
    se[a].resize(n);
    sed[a].resize(n);
    for (Eigen::Index p = 0; p < n; ++p) {
      const Point& x = coords_[static_cast<std::size_t>(p)];
      const auto ci = conductivity_at(problem_.conductivity, problem_.domain, a, Medium::intra, x);
      const auto ce = conductivity_at(problem_.conductivity, problem_.domain, a, Medium::extra, x);
      sigma_i_[a][p] = ci.value;
      sigma_i_d_[a][p] = ci.derivative;
      se[a][p] = ce.value;
      sed[a][p] = ce.derivative;
    }
    sie[a] = sigma_i_[a] + se[a];
    sied[a] = sigma_i_d_[a] + sed[a];
    sigma_i_varies_[a] = !sigma_i_d_[a].isZero(0.0);
  }
  bool degenerate = true;
  for (int a = 0; a < d; ++a) degenerate = degenerate && sie[a].isZero(0.0);
  if (degenerate) {
    throw AssemblyError("conductivities vanish identically; the u_e equation is singular");
  }

  // Column for the absorber g = sum_a (x_a - A_a)^2 / 2 under div(s grad .).
  auto absorber_column = [&](const std::vector<Eigen::VectorXd>& s,
                             const std::vector<Eigen::VectorXd>& sd) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < d; ++a) {
      for (Eigen::Index p = 0; p < n; ++p) {
        const double r = coords_[static_cast<std::size_t>(p)][a] - problem_.domain.lo[a];
        col[p] += s[a][p] + sd[a][p] * r;
      }
    }
    return col;
  };

  std::vector<Factor> all_n0;
  std::vector<Factor> all_ht;
  std::vector<Factor> all_ht_inv;
  for (const auto& ax : axes_) {
    all_n0.push_back(ax.n0);
    all_ht.push_back(ax.ht);
    all_ht_inv.push_back(ax.ht_inv);
  }

  auto k11 = std::make_shared<KroneckerSumOperator>(npts_);
  k11->add_term(all_n0, {}, problem_.cm);

  auto k12 = std::make_shared<KroneckerSumOperator>(npts_);
  add_divergence(*k12, axes_, se, sed, 1.0);
  k12->add_column(0, absorber_column(se, sed));

  auto k21 = std::make_shared<KroneckerSumOperator>(npts_);
  add_divergence(*k21, axes_, sigma_i_, sigma_i_d_, cfg_.dt);

  auto k22 = std::make_shared<KroneckerSumOperator>(npts_);
  add_divergence(*k22, axes_, sie, sied, 1.0);
  k22->add_column(0, absorber_column(sie, sied));

  k_ = std::make_shared<BlockOperator2x2>(k11, k12, k21->term_count() ? k21 : nullptr, k22,
                                          npts_, npts_);

  if (cfg_.preconditioned) {
    std::vector<double> mi(d), me(d);
    for (int a = 0; a < d; ++a) {
      mi[a] = sigma_i_[a].mean();
      me[a] = se[a].mean();
    }
    precond_ = std::make_shared<FastDiagPreconditioner>(axes_, mi, me, problem_.cm, cfg_.dt);
  }

  auto hs = std::make_shared<KroneckerSumOperator>(npts_);
  hs->add_term(all_ht);
  hsys_ = hs;
  auto hi = std::make_shared<KroneckerSumOperator>(npts_);
  hi->add_term(all_ht_inv);
  hsys_inv_ = hi;
}

BidomainState CollocationStepper::initial_state() const {
  const int d = dim();
  const auto n = static_cast<Eigen::Index>(npts_);
  BidomainState s;
  s.v.resize(n);
  s.ue = Eigen::VectorXd::Zero(n);
  s.w.assign(problem_.w0.size(), Eigen::VectorXd(n));
  s.trace_vxx.assign(d, Eigen::VectorXd(n));
  s.trace_vx.assign(d, Eigen::VectorXd(n));
  for (Eigen::Index p = 0; p < n; ++p) {
    const Point& x = coords_[static_cast<std::size_t>(p)];
    s.v[p] = initial_value(problem_.v0, problem_.domain, x);
    for (std::size_t k = 0; k < s.w.size(); ++k) {
      s.w[k][p] = initial_value(problem_.w0[k], problem_.domain, x);
    }
    for (int a = 0; a < d; ++a) {
      s.trace_vxx[a][p] = initial_derivative(problem_.v0, problem_.domain, a, 2, x);
      s.trace_vx[a][p] = initial_derivative(problem_.v0, problem_.domain, a, 1, x);
    }
  }
  return s;
}

std::pair<OperatorPtr, Eigen::VectorXd> CollocationStepper::assemble_gating(
    const BidomainState& s, std::size_t gate) const {
  if (gate >= s.w.size()) throw DomainError("gate index out of range");
  Eigen::VectorXd c(static_cast<Eigen::Index>(npts_));
  for (Eigen::Index p = 0; p < c.size(); ++p) {
    c[p] = gating_rate(problem_.ionic, s.v[p], s.w[gate][p], gate);
  }
  return {hsys_, std::move(c)};
}

std::vector<Eigen::VectorXd> CollocationStepper::step_gating(const BidomainState& s,
                                                             StepDiagnostics* diag) const {
  std::vector<Eigen::VectorXd> next;
  for (std::size_t k = 0; k < s.w.size(); ++k) {
    auto [op, c] = assemble_gating(s, k);
    SolveResult r = gmres_solve(*op, c, {}, cfg_.gmres, hsys_inv_.get());
    if (diag) diag->gating.push_back(r.stats);
    if (!r.stats.converged) {
      std::ostringstream msg;
      msg << "gating solve did not converge at step " << s.step << " (relative residual "
          << r.stats.final_relative_residual << ")";
      throw StepError(msg.str(), s.step);
    }
    next.push_back(s.w[k] + cfg_.dt * (*op)(r.x));
  }
  return next;
}

StepSystems CollocationStepper::assemble_vue(const BidomainState& s,
                                             const std::vector<Eigen::VectorXd>& w_next) const {
  const auto n = static_cast<Eigen::Index>(npts_);
  const double t1 = time_at(s.step + 1);
  const int d = dim();
  StepSystems sys;
  sys.k = k_;
  sys.hsys = hsys_;
  sys.b.resize(2 * n);
  std::vector<double> wp(w_next.size());
  for (Eigen::Index p = 0; p < n; ++p) {
    const Point& x = coords_[static_cast<std::size_t>(p)];
    for (std::size_t k = 0; k < wp.size(); ++k) wp[k] = w_next[k][p];
    const double i1 = stimulus_value(problem_.stimulus.intra, d, x, t1);
    const double i2 = stimulus_value(problem_.stimulus.extra, d, x, t1);
    sys.b[p] = ionic_current(problem_.ionic, s.v[p], wp) + i2;
    double div = 0.0;
    for (int a = 0; a < d; ++a) {
      div += sigma_i_[a][p] * s.trace_vxx[a][p];
      if (sigma_i_varies_[a]) div += sigma_i_d_[a][p] * s.trace_vx[a][p];
    }
    sys.b[n + p] = -div - (i1 - i2);
  }
  for (std::size_t k = 0; k < w_next.size(); ++k) {
    sys.c.push_back(assemble_gating(s, k).second);
  }
  return sys;
}

Eigen::VectorXd CollocationStepper::reconstruct_ue(const Eigen::VectorXd& beta) const {
  std::vector<const Eigen::MatrixXd*> f;
  for (const auto& ax : axes_) f.push_back(ax.n0.get());
  Eigen::VectorXd ue = kron_apply(f, beta);
  // The constant tensor mode is swapped for the absorber g.
  ue += beta[0] * (absorber_.array() - 1.0).matrix();
  return ue;
}

void CollocationStepper::anchor(Eigen::VectorXd& ue) const {
  const double shift =
      cfg_.anchor == AnchorMode::point ? ue[static_cast<Eigen::Index>(cfg_.anchor_index)] : ue.mean();
  ue.array() -= shift;
}

void CollocationStepper::step_vue(BidomainState& s, const std::vector<Eigen::VectorXd>& w_next,
                                  StepDiagnostics* diag) const {
  const StepSystems sys = assemble_vue(s, w_next);
  const Eigen::VectorXd x0 = cfg_.gmres.warm_start ? s.coeffs : Eigen::VectorXd();
  SolveResult r = gmres_solve(*sys.k, sys.b, x0, cfg_.gmres, precond_.get());
  if (diag) diag->vue = r.stats;
  if (!r.stats.converged) {
    std::ostringstream msg;
    msg << "(v, u_e) solve did not converge at step " << s.step << " (relative residual "
        << r.stats.final_relative_residual << " after " << r.stats.iterations << " iterations)";
    throw StepError(msg.str(), s.step);
  }
  const auto n = static_cast<Eigen::Index>(npts_);
  const Eigen::VectorXd alpha = r.x.head(n);
  const double dt = cfg_.dt;

  std::vector<const Eigen::MatrixXd*> f;
  for (const auto& ax : axes_) f.push_back(ax.n0.get());
  s.v += dt * kron_apply(f, alpha);
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    f[a] = axes_[a].n2.get();
    s.trace_vxx[a] += dt * kron_apply(f, alpha);
    f[a] = axes_[a].n1.get();
    s.trace_vx[a] += dt * kron_apply(f, alpha);
    f[a] = axes_[a].n0.get();
  }
  s.ue = reconstruct_ue(r.x.tail(n));
  anchor(s.ue);
  s.coeffs = std::move(r.x);
}

StepDiagnostics CollocationStepper::step(BidomainState& s) const {
  StepDiagnostics diag;
  diag.step = s.step;
  std::vector<Eigen::VectorXd> w_next = step_gating(s, &diag);
  if (!cfg_.freeze_v) step_vue(s, w_next, &diag);
  s.w = std::move(w_next);
  s.step += 1;
  s.t = time_at(s.step);
  return diag;
}

Trajectory CollocationStepper::run() const {
  Trajectory tr;
  BidomainState s = initial_state();
  tr.snapshots.push_back(s);
  for (std::size_t k = 0; k < steps_; ++k) {
    try {
      tr.diagnostics.push_back(step(s));
    } catch (const StepError& e) {
      tr.failed = true;
      tr.failure_step = e.step();
      tr.failure_message = e.what();
      tr.snapshots.push_back(s);
      return tr;
    }
    const bool last = s.step == steps_;
    if (last || (cfg_.snapshot_every != 0 && s.step % cfg_.snapshot_every == 0)) {
      tr.snapshots.push_back(s);
    }
  }
  return tr;
}

}  // namespace haarsim
