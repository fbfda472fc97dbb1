#include <steptime/baselines.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace steptime
{

StepDecision fixed_timing_step(const Vec2 & xi_mea,
                               const StanceInfo & stance,
                               const NominalGait & nominal,
                               const GaitBounds & bounds,
                               const LipmParams & params)
{
  if(!xi_mea.allFinite() || !stance.u0.allFinite())
  {
    throw std::invalid_argument("fixed_timing_step: non-finite measurement");
  }
  const double remaining = std::max(0.0, nominal.T_nom - stance.step_elapsed);
  const Vec2 xi_T = dcm_at_step_end(xi_mea, stance.u0, remaining, params);
  Vec2 disp = xi_T - nominal.offset(stance.foot) - stance.u0;
  const auto [y_lo, y_hi] = bounds.lateral_step_range(stance.foot);
  disp.x() = std::clamp(disp.x(), bounds.L_min, bounds.L_max);
  disp.y() = std::clamp(disp.y(), y_lo, y_hi);

  StepDecision d;
  d.u_T = stance.u0 + disp;
  d.T_adapt = nominal.T_nom;
  d.tau = nominal.tau_nom;
  d.b = xi_T - d.u_T;
  d.status = QpStatus::Optimal;
  return d;
}

void PreviewConfig::validate() const
{
  if(horizon_steps < 2 || !(interval > 0.0) || !(fixed_step_duration > 0.0))
  {
    throw std::invalid_argument("PreviewConfig: need horizon_steps >= 2, interval > 0 and fixed_step_duration > 0");
  }
  for(double w : {jerk_weight, velocity_weight, footstep_weight})
  {
    if(!std::isfinite(w) || w < 0.0)
    {
      throw std::invalid_argument("PreviewConfig: weights must be finite and nonnegative");
    }
  }
}

namespace
{

/// Affine prediction [x; v] = c + B U of one axis in the footstep variables U.
struct AxisPrediction
{
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  Eigen::Matrix<double, 2, Eigen::Dynamic> B;
};

void advance(AxisPrediction & p, double h, int footstep, double u0, double w)
{
  const double ch = std::cosh(w * h);
  const double sh = std::sinh(w * h);
  Eigen::Matrix2d A;
  A << ch, sh / w, w * sh, ch;
  const Eigen::Vector2d g(1.0 - ch, -w * sh);
  p.c = A * p.c;
  p.B = A * p.B;
  if(footstep == 0)
  {
    p.c += g * u0;
  }
  else
  {
    p.B.col(footstep - 1) += g;
  }
}

} // namespace

PreviewPlan preview_mpc_step(const LipmState & state,
                             const StanceInfo & stance,
                             const PreviewConfig & cfg,
                             const Vec2 & v_des,
                             const GaitBounds & bounds,
                             const LipmParams & params,
                             QpSolver * solvers)
{
  cfg.validate();
  bounds.validate();
  const double w = params.omega0();
  const double T_f = cfg.fixed_step_duration;
  const double horizon = cfg.horizon_steps * cfg.interval;
  const double remaining = std::max(0.0, T_f - stance.step_elapsed);

  // contact changes at remaining + i T_f; the first one is always planned
  std::vector<double> changes;
  for(double c = remaining; changes.empty() || c < horizon; c += T_f)
  {
    changes.push_back(c);
  }
  const int M = static_cast<int>(changes.size());

  std::vector<Foot> feet(static_cast<std::size_t>(M + 1));
  feet[0] = stance.foot;
  for(int i = 1; i <= M; ++i)
  {
    feet[static_cast<std::size_t>(i)] = other(feet[static_cast<std::size_t>(i - 1)]);
  }

  const NominalGait ref_gait = [&]() {
    NominalGait g;
    g.L_nom = v_des.x() * T_f;
    g.W_nom = v_des.y() * T_f;
    g.l_p = bounds.l_p;
    return g;
  }();

  PreviewPlan plan;
  plan.footstep_plan.assign(static_cast<std::size_t>(M), Vec2::Zero());
  plan.com_plan.assign(static_cast<std::size_t>(cfg.horizon_steps), Vec2::Zero());
  plan.cop_plan.assign(static_cast<std::size_t>(cfg.horizon_steps), Vec2::Zero());

  // footstep index in contact at each sample, 0 for the current stance
  std::vector<int> active(static_cast<std::size_t>(cfg.horizon_steps), 0);
  for(int axis = 0; axis < 2; ++axis)
  {
    AxisPrediction pred;
    pred.c << state.com(axis), state.com_vel(axis);
    pred.B = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, M);

    QpProblem p = QpProblem::with_variables(M);
    double t = 0.0;
    int footstep = 0;
    std::vector<Eigen::RowVectorXd> com_rows;
    std::vector<double> com_offsets;
    for(int j = 1; j <= cfg.horizon_steps; ++j)
    {
      const double t_sample = j * cfg.interval;
      while(footstep < M && changes[static_cast<std::size_t>(footstep)] <= t_sample)
      {
        advance(pred, changes[static_cast<std::size_t>(footstep)] - t, footstep, stance.u0(axis), w);
        t = changes[static_cast<std::size_t>(footstep)];
        ++footstep;
      }
      advance(pred, t_sample - t, footstep, stance.u0(axis), w);
      t = t_sample;

      // velocity tracking and jerk w^2 v
      const Eigen::RowVectorXd bv = pred.B.row(1);
      const double cv = pred.c(1);
      const double wv = cfg.velocity_weight;
      const double wj = cfg.jerk_weight * std::pow(w, 4);
      p.H += 2.0 * (wv + wj) * bv.transpose() * bv;
      p.f += 2.0 * (wv * (cv - v_des(axis)) + wj * cv) * bv.transpose();
      com_rows.push_back(pred.B.row(0));
      com_offsets.push_back(pred.c(0));
      active[static_cast<std::size_t>(j - 1)] = footstep;
    }

    double u_ref = stance.u0(axis);
    for(int i = 1; i <= M; ++i)
    {
      u_ref += ref_gait.displacement(feet[static_cast<std::size_t>(i - 1)])(axis);
      p.H(i - 1, i - 1) += 2.0 * cfg.footstep_weight;
      p.f(i - 1) -= 2.0 * cfg.footstep_weight * u_ref;

      double lo = bounds.L_min;
      double hi = bounds.L_max;
      if(axis == 1)
      {
        std::tie(lo, hi) = bounds.lateral_step_range(feet[static_cast<std::size_t>(i - 1)]);
      }
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(M);
      row(i - 1) = 1.0;
      if(i == 1)
      {
        p.add_inequality(row, stance.u0(axis) + lo, stance.u0(axis) + hi);
      }
      else
      {
        row(i - 2) = -1.0;
        p.add_inequality(row, lo, hi);
      }
    }

    QpSolver local;
    QpSolver & qp = solvers != nullptr ? solvers[axis] : local;
    const QpSolution sol = solvers != nullptr ? qp.solve_warm(p) : qp.solve(p);
    if(sol.status != QpStatus::Optimal)
    {
      std::ostringstream snap;
      snap << "axis=" << axis << " elapsed=" << stance.step_elapsed << " kkt=" << sol.kkt_residual;
      throw QpFailure("preview QP failed: " + to_string(sol.status), snap.str());
    }
    for(int i = 0; i < M; ++i)
    {
      plan.footstep_plan[static_cast<std::size_t>(i)](axis) = sol.x(i);
    }
    for(int j = 0; j < cfg.horizon_steps; ++j)
    {
      plan.com_plan[static_cast<std::size_t>(j)](axis) = com_rows[static_cast<std::size_t>(j)].dot(sol.x) + com_offsets[static_cast<std::size_t>(j)];
      const int a = active[static_cast<std::size_t>(j)];
      plan.cop_plan[static_cast<std::size_t>(j)](axis) = a == 0 ? stance.u0(axis) : sol.x(a - 1);
    }
  }

  StepDecision & d = plan.decision;
  d.u_T = plan.footstep_plan.front();
  d.T_adapt = T_f;
  d.tau = std::exp(w * T_f);
  d.b = dcm_at_step_end(dcm(state, params), stance.u0, remaining, params) - d.u_T;
  d.status = QpStatus::Optimal;
  return plan;
}

} // namespace steptime
