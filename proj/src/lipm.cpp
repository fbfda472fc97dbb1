#include <steptime/lipm.h>

#include <stdexcept>

namespace steptime
{

LipmParams::LipmParams(double z0, double g) : z0_(z0), g_(g)
{
  if(!(z0 > 0.0) || !std::isfinite(z0))
  {
    throw std::invalid_argument("LipmParams: z0 must be positive, got " + std::to_string(z0));
  }
  if(!(g > 0.0) || !std::isfinite(g))
  {
    throw std::invalid_argument("LipmParams: g must be positive, got " + std::to_string(g));
  }
}

Vec2 dcm(const LipmState & state, const LipmParams & params)
{
  return state.com + state.com_vel / params.omega0();
}

LipmState propagate(const LipmState & state,
                    const Vec2 & u0,
                    double dt,
                    const LipmParams & params,
                    const Vec2 & external_accel)
{
  if(!(dt >= 0.0) || !std::isfinite(dt))
  {
    throw std::invalid_argument("propagate: dt must be finite and nonnegative");
  }
  if(!state.com.allFinite() || !state.com_vel.allFinite() || !u0.allFinite() || !external_accel.allFinite())
  {
    throw std::invalid_argument("propagate: non-finite input");
  }

  const double w = params.omega0();
  const Vec2 equilibrium = u0 - external_accel / (w * w);
  const double ch = std::cosh(w * dt);
  const double sh = std::sinh(w * dt);
  const Vec2 rel = state.com - equilibrium;

  LipmState out;
  out.com = equilibrium + rel * ch + state.com_vel * (sh / w);
  out.com_vel = rel * (w * sh) + state.com_vel * ch;
  return out;
}

LipmState propagate_frozen(const LipmState & state, double dt, const Vec2 & external_accel)
{
  if(!(dt >= 0.0) || !std::isfinite(dt))
  {
    throw std::invalid_argument("propagate_frozen: dt must be finite and nonnegative");
  }
  LipmState out;
  out.com = state.com + state.com_vel * dt + 0.5 * external_accel * dt * dt;
  out.com_vel = state.com_vel + external_accel * dt;
  return out;
}

Vec2 dcm_at_step_end(const Vec2 & xi_now, const Vec2 & u0, double remaining, const LipmParams & params)
{
  if(remaining < 0.0)
  {
    throw std::invalid_argument("dcm_at_step_end: remaining time must be nonnegative");
  }
  return (xi_now - u0) * std::exp(params.omega0() * remaining) + u0;
}

LipmState state_from_components(const Vec2 & xi, const Vec2 & zeta, const LipmParams & params)
{
  LipmState s;
  s.com = 0.5 * (xi + zeta);
  s.com_vel = 0.5 * params.omega0() * (xi - zeta);
  return s;
}

} // namespace steptime
