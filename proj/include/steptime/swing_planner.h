#pragma once

#include <steptime/lipm.h>
#include <steptime/qp_solver.h>

#include <stdexcept>

namespace steptime
{

/// Re-planning was requested less than one control period before touchdown.
class InfeasibleWindow : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct SwingSample
{
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

/** \brief Swing foot trajectory of one step.
 *
 * Height: z(t) = sum_i c_z[i] T_i(2 s - 1) with s = (t - t_z) / (T_z - t_z), zero after T_z; t_z is the
 * last vertical re-plan, so the polynomial spans what remains of the step and stays well conditioned
 * however close to touchdown it was planned. T_i are Chebyshev polynomials.
 * Horizontal: p(t) = sum_i c[i] r^i with r = (t - t_start) / (T - t_start), the segment
 * planned at the last horizontal re-plan.
 */
struct SwingPlan
{
  /// Current step duration; the plan is defined on [0, T].
  double T = 0.0;
  /// Duration the height polynomial was planned for.
  double T_z = 0.0;
  /// Start of the height polynomial's window.
  double t_z = 0.0;
  /// False for a rest plan, whose height has never been optimized.
  bool height_planned = false;
  Eigen::Matrix<double, 10, 1> c_z = Eigen::Matrix<double, 10, 1>::Zero();
  double t_start = 0.0;
  Eigen::Matrix<double, 6, 1> c_x = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> c_y = Eigen::Matrix<double, 6, 1>::Zero();
  /// State at the last re-plan time t_k (the splice point).
  double t_k = 0.0;
  SwingSample k_state;
  /// Set when the clearance rows could not all be met and only the equality rows were enforced.
  bool clearance_relaxed = false;
};

/// Foot resting at `position` on the ground for a step of duration T.
SwingPlan rest_plan(const Vec2 & position, double T);

/** \brief Position, velocity and acceleration at time t since the start of the step.
 *
 * Throws std::domain_error outside [0, T].
 */
SwingSample evaluate(const SwingPlan & plan, double t);

struct VerticalOptions
{
  double z_des = 0.05;
  double z_max = 0.10;
  double control_period = 0.001;
  /// Uniform clearance samples over the step.
  int samples = 50;
  /// Floor of the clearance samples at mid-window: 64 h s^3 (1 - s)^3 over the normalized window.
  double min_clearance = 0.01;
  /// Weight of the squared third derivative, integrated over the normalized window.
  double jerk_weight = 1e-12;
};

/** \brief Height polynomial of degree nine for a step of duration T_new, re-planned at t_now.
 *
 * Minimizes (z(T_new/2) - z_des)^2 (while the midpoint is ahead) plus a small jerk term over [t_now, T_new],
 * with z, z', z'' equal to the previous plan's values at t_now and zero at T_new. On a fresh step the
 * t_now rows are the rest state at the step start. 0 <= z <= z_max is imposed on the clearance samples
 * after t_now and at the next control instant, tightened to a floor profile that vanishes at both ends, and
 * the third derivative at touchdown must be non-positive. A plan already made for T_new is returned as is. Throws InfeasibleWindow when T_new - t_now is shorter
 * than one control period and std::runtime_error when the QP fails.
 */
SwingPlan replan_vertical(const SwingPlan & prev,
                          double t_now,
                          double T_new,
                          const VerticalOptions & options,
                          QpSolver * solver = nullptr);

/// Quintic per axis from the previous plan's state at t_now to (target, 0, 0) at T_new.
SwingPlan replan_horizontal(const SwingPlan & prev, double t_now, double T_new, const Vec2 & target, double control_period = 0.001);

/// One swing foot: re-plans both components each control cycle and freezes near touchdown.
class SwingPlanner
{
public:
  explicit SwingPlanner(VerticalOptions options = {});

  /// Starts a swing from `lift_off` toward `target` with duration T.
  void start(const Vec2 & lift_off, const Vec2 & target, double T);

  /// Re-plans at t_now for the current (T, target). Returns false when the plan was frozen.
  bool update(double t_now, double T, const Vec2 & target);

  SwingSample sample(double t) const;

  const SwingPlan & plan() const { return plan_; }

private:
  VerticalOptions options_;
  SwingPlan plan_;
  QpSolver solver_;
};

} // namespace steptime
