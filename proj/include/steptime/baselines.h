#pragma once

#include <steptime/gait_nominal.h>
#include <steptime/lipm.h>
#include <steptime/qp_solver.h>
#include <steptime/step_adapter.h>

#include <vector>

namespace steptime
{

/** \brief Step adjustment with the nominal duration.
 *
 * Lands where the predicted end-of-step DCM minus the nominal offset falls, clamped into the step box.
 */
StepDecision fixed_timing_step(const Vec2 & xi_mea,
                               const StanceInfo & stance,
                               const NominalGait & nominal,
                               const GaitBounds & bounds,
                               const LipmParams & params);

struct PreviewConfig
{
  int horizon_steps = 16;
  /// Sampling interval of the horizon [s].
  double interval = 0.1;
  double jerk_weight = 1e-4;
  double velocity_weight = 1.0;
  double footstep_weight = 1e-2;
  double fixed_step_duration = 0.5;

  /// Throws std::invalid_argument unless N >= 2 and the interval and duration are positive.
  void validate() const;
};

struct PreviewPlan
{
  /// Contact point at each horizon sample (point foot: the active footstep).
  std::vector<Vec2> cop_plan;
  /// Predicted CoM position at each horizon sample.
  std::vector<Vec2> com_plan;
  /// Planned future footsteps; the first is the landing point of the current swing foot.
  std::vector<Vec2> footstep_plan;
  /// First-cycle action in the stepping-decision form.
  StepDecision decision;
};

/** \brief Receding-horizon footstep planner with fixed step timing on a point-foot LIPM.
 *
 * The CoM is predicted exactly over the horizon for piecewise-constant contact points, so the jerk
 * of the LIPM equals omega0^2 times the CoM velocity and the footsteps are the only decision
 * variables. Each axis minimizes velocity tracking, jerk and deviation from the alternating
 * reference footsteps, with consecutive footsteps kept inside the step box. `solvers` (two
 * instances, x then y) may be passed to reuse working sets.
 */
PreviewPlan preview_mpc_step(const LipmState & state,
                             const StanceInfo & stance,
                             const PreviewConfig & cfg,
                             const Vec2 & v_des,
                             const GaitBounds & bounds,
                             const LipmParams & params,
                             QpSolver * solvers = nullptr);

} // namespace steptime
