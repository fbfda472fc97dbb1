#include <steptime/gait_nominal.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace steptime
{

void GaitBounds::validate() const
{
  auto fail = [](const std::string & msg) { throw std::invalid_argument("GaitBounds: " + msg); };
  if(!(L_min < L_max))
  {
    fail("L_min must be smaller than L_max");
  }
  if(!(T_min > 0.0) || !(T_min < T_max))
  {
    fail("require 0 < T_min < T_max");
  }
  if(!(l_p > 0.0))
  {
    fail("l_p must be positive");
  }
  if(!(W_out_max + W_in_max > 0.0))
  {
    fail("lateral step range is empty");
  }
  if(!(z_des > 0.0) || !(z_des <= z_max))
  {
    fail("require 0 < z_des <= z_max");
  }
}

std::pair<double, double> GaitBounds::lateral_step_range(Foot stance) const
{
  if(stance == Foot::Right)
  {
    return {-W_out_max, W_in_max};
  }
  return {-W_in_max, W_out_max};
}

std::pair<double, double> GaitBounds::lateral_deviation_range() const
{
  // right stance displacement is l_p + W, left stance displacement is -l_p + W
  const auto [r_lo, r_hi] = lateral_step_range(Foot::Right);
  const auto [l_lo, l_hi] = lateral_step_range(Foot::Left);
  return {std::max(r_lo - l_p, l_lo + l_p), std::min(r_hi - l_p, l_hi + l_p)};
}

Vec2 NominalGait::offset(Foot stance) const
{
  return {b_x_nom, stance == Foot::Right ? b_y_nom_right : b_y_nom_left};
}

Vec2 NominalGait::displacement(Foot stance) const
{
  return {L_nom, -foot_sign(stance) * l_p + W_nom};
}

namespace
{

// Shrinks [lo, hi] to the durations T > 0 with d_min <= v T <= d_max.
void restrict_duration(double v, double d_min, double d_max, double & lo, double & hi)
{
  if(v == 0.0)
  {
    return;
  }
  double a = d_min / v;
  double b = d_max / v;
  if(v < 0.0)
  {
    std::swap(a, b);
  }
  // a is the lower ratio, b the upper one; nonpositive lower ratios never bind
  if(a > 0.0)
  {
    lo = std::max(lo, a);
  }
  hi = std::min(hi, b);
}

} // namespace

NominalGait nominal_gait(const Vec2 & v_des, const GaitBounds & bounds, const LipmParams & params)
{
  bounds.validate();
  if(!v_des.allFinite())
  {
    throw std::invalid_argument("nominal_gait: non-finite velocity");
  }

  double B_l = bounds.T_min;
  double B_u = bounds.T_max;
  restrict_duration(v_des.x(), bounds.L_min, bounds.L_max, B_l, B_u);
  const auto [W_lo, W_hi] = bounds.lateral_deviation_range();
  restrict_duration(v_des.y(), W_lo, W_hi, B_l, B_u);

  if(B_l > B_u)
  {
    std::ostringstream oss;
    oss << "commanded velocity (" << v_des.x() << ", " << v_des.y() << ") is unreachable: B_l = " << B_l
        << " > B_u = " << B_u;
    throw InfeasibleVelocity(oss.str());
  }

  return nominal_gait_with_duration(v_des, 0.5 * (B_l + B_u), bounds, params);
}

NominalGait nominal_gait_with_duration(const Vec2 & v_des, double T, const GaitBounds & bounds, const LipmParams & params)
{
  bounds.validate();
  if(!(T >= bounds.T_min) || !(T <= bounds.T_max))
  {
    throw std::invalid_argument("nominal_gait_with_duration: T outside [T_min, T_max]");
  }
  const auto [W_lo, W_hi] = bounds.lateral_deviation_range();
  const double tol = 1e-12;
  if(v_des.x() * T < bounds.L_min - tol || v_des.x() * T > bounds.L_max + tol || v_des.y() * T < W_lo - tol
     || v_des.y() * T > W_hi + tol)
  {
    throw InfeasibleVelocity("commanded velocity is unreachable with the prescribed step duration");
  }
  NominalGait g;
  g.T_nom = T;
  g.L_nom = v_des.x() * g.T_nom;
  g.W_nom = v_des.y() * g.T_nom;
  g.tau_nom = std::exp(params.omega0() * g.T_nom);
  g.l_p = bounds.l_p;
  const Vec2 br = nominal_offset(g.L_nom, g.W_nom, g.T_nom, Foot::Right, bounds.l_p, params);
  const Vec2 bl = nominal_offset(g.L_nom, g.W_nom, g.T_nom, Foot::Left, bounds.l_p, params);
  g.b_x_nom = br.x();
  g.b_y_nom_right = br.y();
  g.b_y_nom_left = bl.y();
  return g;
}

Vec2 nominal_offset(double L, double W, double T, Foot stance, double l_p, const LipmParams & params)
{
  if(!(T > 0.0))
  {
    throw std::invalid_argument("nominal_offset: T must be positive");
  }
  const double e = std::exp(params.omega0() * T);
  return {L / (e - 1.0), foot_sign(stance) * l_p / (1.0 + e) - W / (1.0 - e)};
}

LipmState nominal_initial_state(const NominalGait & nominal,
                                const Vec2 & stance_point,
                                Foot stance,
                                const LipmParams & params)
{
  const double decay = std::exp(-params.omega0() * nominal.T_nom);
  const Vec2 d_this = nominal.displacement(stance);
  const Vec2 d_next = nominal.displacement(other(stance));

  // start offset of this step is the end offset of the previous one
  const Vec2 xi_rel = nominal.offset(other(stance));

  // convergent component zeta = x - x'/w relative to the stance point, two-step periodic
  Vec2 zeta_rel;
  zeta_rel.x() = -d_this.x() / (1.0 - decay);
  zeta_rel.y() = -(d_this.y() * decay + d_next.y()) / (1.0 - decay * decay);

  return state_from_components(stance_point + xi_rel, stance_point + zeta_rel, params);
}

} // namespace steptime
