#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace steptime
{

/// Planar quantity, x sagittal and y lateral [m].
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/** \brief Stance foot. The numeric value is the foot index n used in the sign (-1)^n. */
enum class Foot : int
{
  Right = 1,
  Left = 2
};

inline Foot other(Foot foot)
{
  return foot == Foot::Right ? Foot::Left : Foot::Right;
}

/// (-1)^n for the given stance foot.
inline double foot_sign(Foot foot)
{
  return foot == Foot::Right ? -1.0 : 1.0;
}

/** \brief Linear inverted pendulum parameters.
 *
 * The natural frequency is derived from z0 and g on every access and never stored.
 */
class LipmParams
{
public:
  LipmParams() = default;

  /// Throws std::invalid_argument unless z0 > 0 and g > 0.
  LipmParams(double z0, double g);

  double z0() const { return z0_; }
  double g() const { return g_; }
  double omega0() const { return std::sqrt(g_ / z0_); }

private:
  double z0_ = 0.8;
  double g_ = 9.81;
};

struct LipmState
{
  Vec2 com = Vec2::Zero();
  Vec2 com_vel = Vec2::Zero();
};

struct StanceInfo
{
  /// Contact point of the stance foot.
  Vec2 u0 = Vec2::Zero();
  Foot foot = Foot::Right;
  /// Time since the start of the current step [s].
  double step_elapsed = 0.0;
};

/// Divergent component of motion, com + com_vel / omega0.
Vec2 dcm(const LipmState & state, const LipmParams & params);

/** \brief Exact solution of x'' = omega0^2 (x - u0) + a over dt with constant a.
 *
 * The external acceleration shifts the pendulum equilibrium to u0 - a / omega0^2.
 * Throws std::invalid_argument for dt < 0 or non-finite input.
 */
LipmState propagate(const LipmState & state,
                    const Vec2 & u0,
                    double dt,
                    const LipmParams & params,
                    const Vec2 & external_accel = Vec2::Zero());

/// Ballistic propagation x'' = a, used by the pendulum-frozen simulation mode.
LipmState propagate_frozen(const LipmState & state, double dt, const Vec2 & external_accel);

/// DCM at the end of the step: (xi_now - u0) e^{omega0 remaining} + u0.
Vec2 dcm_at_step_end(const Vec2 & xi_now, const Vec2 & u0, double remaining, const LipmParams & params);

/// b = xi_T - u_T.
inline Vec2 dcm_offset(const Vec2 & xi_T, const Vec2 & u_T)
{
  return xi_T - u_T;
}

/** \brief Build a state from its divergent and convergent components.
 *
 * With xi = x + x'/w and zeta = x - x'/w, x = (xi + zeta)/2 and x' = w (xi - zeta)/2.
 */
LipmState state_from_components(const Vec2 & xi, const Vec2 & zeta, const LipmParams & params);

} // namespace steptime
