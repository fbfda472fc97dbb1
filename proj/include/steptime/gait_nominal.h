#pragma once

#include <steptime/lipm.h>

#include <stdexcept>
#include <utility>

namespace steptime
{

/** \brief Kinematic and timing limits of a step.
 *
 * Step length is the sagittal displacement of the landing foot relative to the stance foot.
 * Lateral limits are the lateral displacement of the landing foot relative to the stance foot:
 * W_out_max toward the self-collision side of the stance leg, W_in_max away from it.
 * For a right stance foot the lateral displacement lies in [-W_out_max, W_in_max],
 * for a left stance foot in [-W_in_max, W_out_max].
 */
struct GaitBounds
{
  double L_min = -0.5;
  double L_max = 0.5;
  double W_out_max = 0.1;
  double W_in_max = 0.2;
  double T_min = 0.2;
  double T_max = 0.8;
  /// Default step width.
  double l_p = 0.1;
  /// Swing foot apex limits.
  double z_max = 0.10;
  double z_des = 0.05;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  /// Lateral displacement interval of the landing foot for the given stance foot.
  std::pair<double, double> lateral_step_range(Foot stance) const;

  /// Interval of the lateral deviation W from the default width that both feet can realize.
  std::pair<double, double> lateral_deviation_range() const;
};

class InfeasibleVelocity : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct NominalGait
{
  double L_nom = 0.0;
  double W_nom = 0.0;
  double T_nom = 0.0;
  /// e^{omega0 T_nom}
  double tau_nom = 1.0;
  double b_x_nom = 0.0;
  /// End-of-step lateral offset targets while the right (resp. left) foot is stance.
  double b_y_nom_right = 0.0;
  double b_y_nom_left = 0.0;
  double l_p = 0.0;

  /// Nominal end-of-step DCM offset while `stance` is the stance foot.
  Vec2 offset(Foot stance) const;

  /// Nominal landing displacement relative to the stance foot.
  Vec2 displacement(Foot stance) const;
};

/** \brief Nominal step length, width and duration for an average velocity.
 *
 * The duration is the midpoint of the admissible interval [B_l, B_u] formed by the timing limits
 * and, for each nonzero velocity component, the durations whose displacement stays within bounds.
 * Throws InfeasibleVelocity when the interval is empty.
 */
NominalGait nominal_gait(const Vec2 & v_des, const GaitBounds & bounds, const LipmParams & params);

/** \brief Nominal gait for an average velocity with a prescribed step duration T.
 *
 * Throws InfeasibleVelocity when v T leaves the step box.
 */
NominalGait nominal_gait_with_duration(const Vec2 & v_des, double T, const GaitBounds & bounds, const LipmParams & params);

/// Steady-gait DCM offset: b_x = L/(e^{wT}-1), b_y = (-1)^n l_p/(1+e^{wT}) - W/(1-e^{wT}).
Vec2 nominal_offset(double L, double W, double T, Foot stance, double l_p, const LipmParams & params);

/** \brief State on the periodic orbit of the nominal gait at the start of a step.
 *
 * Both the divergent and the convergent components are placed on their two-step periodic orbit,
 * so that stepping with the nominal values keeps the state periodic from the first step.
 */
LipmState nominal_initial_state(const NominalGait & nominal,
                                const Vec2 & stance_point,
                                Foot stance,
                                const LipmParams & params);

} // namespace steptime
