#include <steptime/step_adapter.h>

#include <cmath>
#include <limits>
#include <sstream>

namespace steptime
{

namespace
{

constexpr int n_vars = 9;
constexpr int i_du = 0;
constexpr int i_tau = 2;
constexpr int i_b = 3;
constexpr int i_psi = 5;

Eigen::RowVectorXd unit_row(std::initializer_list<std::pair<int, double>> entries)
{
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n_vars);
  for(const auto & [i, v] : entries)
  {
    r(i) = v;
  }
  return r;
}

} // namespace

void CostWeights::validate() const
{
  for(double a : {alpha1, alpha2, alpha3, alpha4})
  {
    if(!std::isfinite(a) || a < 0.0)
    {
      throw std::invalid_argument("CostWeights: weights must be finite and nonnegative");
    }
  }
}

double tau_from_timing(double T, const LipmParams & params)
{
  if(!(T >= 0.0))
  {
    throw std::domain_error("tau_from_timing: T must be nonnegative");
  }
  return std::exp(params.omega0() * T);
}

double timing_from_tau(double tau, const LipmParams & params)
{
  if(!(tau >= 1.0))
  {
    throw std::domain_error("timing_from_tau: tau must be at least 1");
  }
  return std::log(tau) / params.omega0();
}

QpProblem build_step_qp(const Vec2 & xi_mea,
                        const StanceInfo & stance,
                        const NominalGait & nominal,
                        const GaitBounds & bounds,
                        const ViabilityBounds & vbounds,
                        const CostWeights & weights,
                        const LipmParams & params,
                        const StepAdapterOptions & options)
{
  if(!xi_mea.allFinite() || !stance.u0.allFinite())
  {
    throw std::invalid_argument("adapt_step: non-finite measurement");
  }
  if(!(stance.step_elapsed >= 0.0) || !(stance.step_elapsed < bounds.T_max))
  {
    throw std::invalid_argument("adapt_step: step_elapsed must lie in [0, T_max)");
  }
  weights.validate();
  const double w = params.omega0();
  const Vec2 du_nom = nominal.displacement(stance.foot);
  const Vec2 b_nom = nominal.offset(stance.foot);

  QpProblem p = QpProblem::with_variables(n_vars);
  auto add_square = [&p](int i, double weight, double target) {
    // weight (x_i - target)^2 = 1/2 (2 weight) x_i^2 - 2 weight target x_i + const
    p.H(i, i) += 2.0 * weight;
    p.f(i) -= 2.0 * weight * target;
  };
  add_square(i_du, weights.alpha1, du_nom.x());
  add_square(i_du + 1, weights.alpha1, du_nom.y());
  add_square(i_tau, weights.alpha2, nominal.tau_nom);
  add_square(i_b, weights.alpha3, b_nom.x());
  add_square(i_b + 1, weights.alpha3, b_nom.y());
  for(int k = 0; k < 4; ++k)
  {
    add_square(i_psi + k, weights.alpha4, 0.0);
  }

  const Vec2 rate = (xi_mea - stance.u0) * std::exp(-w * stance.step_elapsed);
  p.add_equality(unit_row({{i_du, 1.0}, {i_b, 1.0}, {i_tau, -rate.x()}}), 0.0);
  p.add_equality(unit_row({{i_du + 1, 1.0}, {i_b + 1, 1.0}, {i_tau, -rate.y()}}), 0.0);

  const auto [y_lo, y_hi] = bounds.lateral_step_range(stance.foot);
  p.add_inequality(unit_row({{i_du, 1.0}}), bounds.L_min, bounds.L_max);
  p.add_inequality(unit_row({{i_du + 1, 1.0}}), y_lo, y_hi);

  const double tau_hi = std::exp(w * bounds.T_max);
  const double tau_lo = std::min(tau_hi, std::max(std::exp(w * bounds.T_min), std::exp(w * (stance.step_elapsed + options.dt_floor))));
  p.add_inequality(unit_row({{i_tau, 1.0}}), tau_lo, tau_hi);

  // b is the start offset of the next step, whose stance foot is the current swing foot
  const double inf = std::numeric_limits<double>::infinity();
  const auto [by_lo, by_hi] = lateral_offset_interval(vbounds, other(stance.foot));
  p.add_inequality(unit_row({{i_b, 1.0}, {i_psi, -1.0}}), vbounds.b_x_min, inf);
  p.add_inequality(unit_row({{i_b, 1.0}, {i_psi + 1, -1.0}}), -inf, vbounds.b_x_max);
  p.add_inequality(unit_row({{i_b + 1, 1.0}, {i_psi + 2, -1.0}}), by_lo, inf);
  p.add_inequality(unit_row({{i_b + 1, 1.0}, {i_psi + 3, -1.0}}), -inf, by_hi);
  return p;
}

StepDecision adapt_step(const Vec2 & xi_mea,
                        const StanceInfo & stance,
                        const NominalGait & nominal,
                        const GaitBounds & bounds,
                        const ViabilityBounds & vbounds,
                        const CostWeights & weights,
                        const LipmParams & params,
                        const StepAdapterOptions & options,
                        QpSolver * solver)
{
  const QpProblem p = build_step_qp(xi_mea, stance, nominal, bounds, vbounds, weights, params, options);
  // Viability first: the slacks are pinned to zero whenever that is feasible, and the penalized
  // problem is solved only otherwise.
  QpProblem hard = p;
  for(int k = 0; k < 4; ++k)
  {
    hard.add_inequality(unit_row({{i_psi + k, 1.0}}), 0.0, 0.0);
  }
  QpSolver local;
  QpSolution sol = solver != nullptr ? solver->solve_warm(hard) : local.solve(hard);
  if(sol.status == QpStatus::Infeasible)
  {
    sol = QpSolver(solver != nullptr ? solver->settings() : QpSettings{}).solve(p);
  }
  if(sol.status != QpStatus::Optimal)
  {
    std::ostringstream snap;
    snap << "xi=(" << xi_mea.x() << ", " << xi_mea.y() << ") u0=(" << stance.u0.x() << ", " << stance.u0.y()
         << ") foot=" << static_cast<int>(stance.foot) << " t=" << stance.step_elapsed
         << " kkt=" << sol.kkt_residual << " iterations=" << sol.iterations;
    throw QpFailure("stepping QP failed: " + to_string(sol.status), snap.str());
  }

  StepDecision d;
  d.status = sol.status;
  d.u_T = stance.u0 + sol.x.segment<2>(i_du);
  d.tau = sol.x(i_tau);
  d.T_adapt = timing_from_tau(d.tau, params);
  d.b = sol.x.segment<2>(i_b);
  d.psi = sol.x.segment<4>(i_psi);
  d.viability_violated = d.psi.cwiseAbs().maxCoeff() > options.slack_epsilon;
  const Vec2 du_nom = nominal.displacement(stance.foot);
  const Vec2 b_nom = nominal.offset(stance.foot);
  d.objective = weights.alpha1 * (sol.x.segment<2>(i_du) - du_nom).squaredNorm()
                + weights.alpha2 * std::pow(d.tau - nominal.tau_nom, 2) + weights.alpha3 * (d.b - b_nom).squaredNorm()
                + weights.alpha4 * d.psi.squaredNorm();
  return d;
}

StepAdapter::StepAdapter(NominalGait nominal,
                         GaitBounds bounds,
                         CostWeights weights,
                         LipmParams params,
                         StepAdapterOptions options)
: nominal_(nominal), bounds_(bounds), vbounds_(viability_bounds(bounds, params)), weights_(weights), params_(params),
  options_(options)
{
  weights_.validate();
}

StepDecision StepAdapter::decide(const Vec2 & xi_mea, const StanceInfo & stance)
{
  return adapt_step(xi_mea, stance, nominal_, bounds_, vbounds_, weights_, params_, options_, &solver_);
}

} // namespace steptime
