#include <steptime/parallel.h>
#include <steptime/sim_engine.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace steptime
{

std::string to_string(ControllerKind kind)
{
  switch(kind)
  {
    case ControllerKind::Adaptive:
      return "adaptive";
    case ControllerKind::FixedTiming:
      return "fixed_timing";
    case ControllerKind::Preview:
      return "preview";
  }
  return "unknown";
}

ControllerKind controller_from_string(const std::string & name)
{
  if(name == "adaptive")
  {
    return ControllerKind::Adaptive;
  }
  if(name == "fixed_timing")
  {
    return ControllerKind::FixedTiming;
  }
  if(name == "preview")
  {
    return ControllerKind::Preview;
  }
  throw std::invalid_argument("unknown controller '" + name + "' (expected adaptive, fixed_timing or preview)");
}

std::string to_string(OutcomeKind kind)
{
  switch(kind)
  {
    case OutcomeKind::Completed:
      return "COMPLETED";
    case OutcomeKind::Recovered:
      return "RECOVERED";
    case OutcomeKind::Diverged:
      return "DIVERGED";
  }
  return "UNKNOWN";
}

std::string to_string(EnvelopeStatus status)
{
  switch(status)
  {
    case EnvelopeStatus::Ok:
      return "ok";
    case EnvelopeStatus::Unbracketed:
      return "UNBRACKETED";
    case EnvelopeStatus::Unbounded:
      return "UNBOUNDED";
  }
  return "unknown";
}

Vec2 push_force(double theta_deg, double magnitude, const Vec2 & v_des)
{
  const Vec2 heading = v_des.norm() > 1e-12 ? Vec2(v_des.normalized()) : Vec2(1.0, 0.0);
  const double th = theta_deg * std::numbers::pi / 180.0;
  const Eigen::Rotation2Dd rot(th);
  return magnitude * (rot * heading);
}

void ScenarioConfig::validate() const
{
  auto fail = [](const std::string & msg) { throw std::invalid_argument("scenario: " + msg); };
  bounds.validate();
  weights.validate();
  if(controller == ControllerKind::Preview)
  {
    preview.validate();
  }
  if(!(control_period > 0.0))
  {
    fail("control_period must be positive");
  }
  if(!(duration > 0.0))
  {
    fail("duration must be positive");
  }
  if(!(mass > 0.0))
  {
    fail("mass must be positive");
  }
  if(!v_des.allFinite())
  {
    fail("v_des must be finite");
  }
  for(const auto & p : pushes)
  {
    if(!(p.duration > 0.0) || !p.force.allFinite() || !std::isfinite(p.t_start))
    {
      fail("pushes need a positive duration and finite force and start time");
    }
  }
  for(const auto & d : displacements)
  {
    if(!d.offset.allFinite() || !std::isfinite(d.t_start))
    {
      fail("contact displacements need a finite offset and start time");
    }
  }
  if(sim.min_post_steps < sim.recovery_steps || sim.recovery_steps < 1 || sim.max_post_steps < sim.min_post_steps)
  {
    fail("require 1 <= recovery_steps <= min_post_steps <= max_post_steps");
  }
  if(!(sim.divergence_factor > 0.0) || !(sim.recovery_tolerance > 0.0))
  {
    fail("divergence_factor and recovery_tolerance must be positive");
  }
}

const std::vector<std::string> & trace_columns()
{
  static const std::vector<std::string> columns = {
      "t",         "com_x",    "com_y",    "com_vel_x", "com_vel_y", "dcm_x", "dcm_y",   "u0_x",
      "u0_y",      "foot_index", "step_index", "step_elapsed", "u_T_x", "u_T_y", "T_adapt", "b_x",
      "b_y",       "psi_norm", "swing_x",  "swing_y",   "swing_z",   "status"};
  return columns;
}

namespace
{

class AdaptiveController : public Controller
{
public:
  explicit AdaptiveController(const ScenarioConfig & s)
  : gait_(nominal_gait(s.v_des, s.bounds, s.params)), adapter_(gait_, s.bounds, s.weights, s.params, s.adapter),
    params_(s.params)
  {
  }

  StepDecision decide(const LipmState & state, const StanceInfo & stance) override
  {
    return adapter_.decide(dcm(state, params_), stance);
  }

  const NominalGait & gait() const override { return gait_; }

private:
  NominalGait gait_;
  StepAdapter adapter_;
  LipmParams params_;
};

class FixedTimingController : public Controller
{
public:
  explicit FixedTimingController(const ScenarioConfig & s)
  : gait_(nominal_gait(s.v_des, s.bounds, s.params)), bounds_(s.bounds), params_(s.params)
  {
  }

  StepDecision decide(const LipmState & state, const StanceInfo & stance) override
  {
    return fixed_timing_step(dcm(state, params_), stance, gait_, bounds_, params_);
  }

  const NominalGait & gait() const override { return gait_; }

private:
  NominalGait gait_;
  GaitBounds bounds_;
  LipmParams params_;
};

class PreviewController : public Controller
{
public:
  explicit PreviewController(const ScenarioConfig & s)
  : gait_(nominal_gait_with_duration(s.v_des, s.preview.fixed_step_duration, s.bounds, s.params)), cfg_(s.preview),
    v_des_(s.v_des), bounds_(s.bounds), params_(s.params)
  {
  }

  StepDecision decide(const LipmState & state, const StanceInfo & stance) override
  {
    return preview_mpc_step(state, stance, cfg_, v_des_, bounds_, params_, solvers_).decision;
  }

  const NominalGait & gait() const override { return gait_; }

private:
  NominalGait gait_;
  PreviewConfig cfg_;
  Vec2 v_des_;
  GaitBounds bounds_;
  LipmParams params_;
  QpSolver solvers_[2];
};

struct ActivePush
{
  PushEvent event;
  std::optional<double> start;
};

constexpr double time_eps = 1e-9;

} // namespace

std::unique_ptr<Controller> make_controller(const ScenarioConfig & scenario)
{
  switch(scenario.controller)
  {
    case ControllerKind::Adaptive:
      return std::make_unique<AdaptiveController>(scenario);
    case ControllerKind::FixedTiming:
      return std::make_unique<FixedTimingController>(scenario);
    case ControllerKind::Preview:
      return std::make_unique<PreviewController>(scenario);
  }
  throw std::invalid_argument("unknown controller");
}

RunResult run(const ScenarioConfig & scenario)
{
  scenario.validate();
  const auto controller = make_controller(scenario);
  const LipmParams & params = scenario.params;
  const SimOptions & opt = scenario.sim;
  const double dt = scenario.control_period;

  RunResult result;
  result.gait = controller->gait();
  result.viability = viability_bounds(scenario.bounds, params);
  const double threshold = opt.divergence_factor * result.viability.b_x_max;
  const NominalGait & gait = result.gait;

  StanceInfo stance;
  stance.u0 = scenario.initial.stance_point;
  stance.foot = scenario.initial.first_stance;
  LipmState state = scenario.initial.nominal ? nominal_initial_state(gait, stance.u0, stance.foot, params)
                                             : scenario.initial.state;
  double t_state = 0.0;
  double step_start = 0.0;
  int step_index = 0;
  Vec2 lift_off = stance.u0 - gait.displacement(other(stance.foot));

  std::vector<ActivePush> pushes;
  for(const auto & p : scenario.pushes)
  {
    ActivePush a{p, std::nullopt};
    if(!p.at_step_start || (*p.at_step_start == stance.foot && p.t_start <= time_eps))
    {
      a.start = p.at_step_start ? 0.0 : p.t_start;
    }
    pushes.push_back(a);
  }
  std::vector<bool> displaced(scenario.displacements.size(), false);
  const bool disturbed = !scenario.pushes.empty() || !scenario.displacements.empty();

  SwingPlanner swing(VerticalOptions{scenario.bounds.z_des, scenario.bounds.z_max, dt, 50});
  bool swing_started = false;
  StepDecision decision;
  bool step_violation = false;
  std::optional<double> t_diverged;
  bool stop = false;
  double max_offset = 0.0;

  const auto n_cycles = static_cast<long long>(std::llround(scenario.duration / dt));
  if(opt.record_trace)
  {
    result.trace.reserve(static_cast<std::size_t>(n_cycles));
  }

  // end of the last disturbance, unknown while a push is still unresolved
  auto disturbance_end = [&]() -> std::optional<double> {
    double end = 0.0;
    for(const auto & p : pushes)
    {
      if(!p.start)
      {
        return std::nullopt;
      }
      end = std::max(end, *p.start + p.event.duration);
    }
    for(std::size_t i = 0; i < scenario.displacements.size(); ++i)
    {
      if(!displaced[i])
      {
        return std::nullopt;
      }
      end = std::max(end, scenario.displacements[i].t_start);
    }
    return end;
  };
  auto post_steps = [&](double end) {
    return static_cast<int>(std::count_if(result.steps.begin(), result.steps.end(),
                                          [&](const StepRecord & s) { return s.t_start >= end - time_eps; }));
  };
  auto last_steps_settled = [&]() {
    const auto n = static_cast<std::size_t>(opt.recovery_steps);
    if(result.steps.size() < n)
    {
      return false;
    }
    for(std::size_t i = result.steps.size() - n; i < result.steps.size(); ++i)
    {
      const auto & s = result.steps[i];
      if((s.end_offset - s.reference_offset).norm() > opt.recovery_tolerance * s.reference_offset.norm())
      {
        return false;
      }
    }
    return true;
  };

  for(long long k = 0; k < n_cycles && !stop; ++k)
  {
    const double t = static_cast<double>(k) * dt;
    const double t_end = static_cast<double>(k + 1) * dt;

    for(std::size_t i = 0; i < scenario.displacements.size(); ++i)
    {
      if(!displaced[i] && t >= scenario.displacements[i].t_start - time_eps)
      {
        stance.u0 += scenario.displacements[i].offset;
        displaced[i] = true;
      }
    }

    stance.step_elapsed = std::max(0.0, t - step_start);
    TraceRow row;
    row.t = t;
    row.com = state.com;
    row.com_vel = state.com_vel;
    row.dcm = dcm(state, params);
    row.u0 = stance.u0;
    row.foot_index = static_cast<int>(stance.foot);
    row.step_index = step_index;
    row.step_elapsed = stance.step_elapsed;

    if(!opt.freeze_pendulum)
    {
      try
      {
        decision = controller->decide(state, stance);
      }
      catch(const QpFailure & e)
      {
        throw SimulationError(std::string(e.what()) + " [" + e.snapshot() + "] at t=" + std::to_string(t),
                              std::move(result));
      }
      step_violation = step_violation || decision.viability_violated;
      row.u_T = decision.u_T;
      row.T_adapt = decision.T_adapt;
      row.b = decision.b;
      row.psi_norm = decision.psi.norm();
      if(decision.viability_violated)
      {
        row.status = "viability_violated";
      }

      if(opt.plan_swing)
      {
        if(!swing_started)
        {
          swing.start(lift_off, decision.u_T, decision.T_adapt);
          swing_started = true;
        }
        if(stance.step_elapsed > 0.0 && !swing.update(stance.step_elapsed, decision.T_adapt, decision.u_T))
        {
          row.status = "swing_frozen";
        }
        if(swing.plan().clearance_relaxed)
        {
          row.status = "clearance_relaxed";
        }
        row.swing = swing.sample(stance.step_elapsed).position;
      }
    }
    else
    {
      row.u_T = stance.u0;
    }
    if(opt.record_trace)
    {
      result.trace.push_back(row);
    }

    // advance to the end of the cycle, splitting at touchdown and push boundaries
    while(t_state < t_end - time_eps * 1e-3 && !stop)
    {
      double seg_end = t_end;
      bool touchdown = false;
      const double landing = step_start + decision.T_adapt;
      if(!opt.freeze_pendulum && landing <= t_end + time_eps)
      {
        seg_end = std::max(landing, t_state);
        touchdown = true;
      }
      for(const auto & p : pushes)
      {
        if(!p.start)
        {
          continue;
        }
        for(double edge : {*p.start, *p.start + p.event.duration})
        {
          if(edge > t_state + time_eps * 1e-3 && edge < seg_end - time_eps * 1e-3)
          {
            seg_end = edge;
            touchdown = false;
          }
        }
      }
      Vec2 accel = Vec2::Zero();
      for(const auto & p : pushes)
      {
        if(p.start && *p.start <= t_state + time_eps * 1e-3 && *p.start + p.event.duration >= seg_end - time_eps * 1e-3)
        {
          accel += p.event.force / scenario.mass;
        }
      }
      const double h = seg_end - t_state;
      if(h > 0.0)
      {
        state = opt.freeze_pendulum ? propagate_frozen(state, h, accel) : propagate(state, stance.u0, h, params, accel);
      }
      t_state = seg_end;

      if(touchdown)
      {
        StepRecord rec;
        rec.index = step_index;
        rec.foot = stance.foot;
        rec.t_start = step_start;
        rec.duration = decision.T_adapt;
        rec.u0 = stance.u0;
        rec.u_T = decision.u_T;
        rec.end_offset = dcm(state, params) - decision.u_T;
        rec.reference_offset = gait.offset(stance.foot);
        rec.viability_violated = step_violation;
        if(opt.plan_swing && swing_started)
        {
          rec.touchdown_mismatch = (swing.sample(swing.plan().T).position.head<2>() - decision.u_T).norm();
        }
        result.steps.push_back(rec);

        lift_off = stance.u0;
        stance.u0 = decision.u_T;
        stance.foot = other(stance.foot);
        step_start = landing;
        ++step_index;
        swing_started = false;
        step_violation = false;
        for(auto & p : pushes)
        {
          if(!p.start && p.event.at_step_start && *p.event.at_step_start == stance.foot
             && landing >= p.event.t_start - time_eps)
          {
            p.start = landing;
          }
        }
        // the next decision is needed before the rest of the cycle can be propagated
        if(t_state < t_end - time_eps * 1e-3)
        {
          stance.step_elapsed = 0.0;
          try
          {
            decision = controller->decide(state, stance);
          }
          catch(const QpFailure & e)
          {
            throw SimulationError(std::string(e.what()) + " [" + e.snapshot() + "]", std::move(result));
          }
        }

        if(opt.stop_when_settled && disturbed)
        {
          if(const auto end = disturbance_end())
          {
            const int post = post_steps(*end);
            if((post >= opt.min_post_steps && last_steps_settled()) || post >= opt.max_post_steps)
            {
              stop = true;
            }
          }
        }
      }
    }

    const double offset = (dcm(state, params) - stance.u0).norm();
    max_offset = std::max(max_offset, offset);
    if(!opt.freeze_pendulum && offset > threshold)
    {
      t_diverged = t_state;
      break;
    }
  }

  Outcome & out = result.outcome;
  out.disturbed = disturbed;
  out.max_offset = max_offset;
  out.t_diverged = t_diverged ? *t_diverged : std::numeric_limits<double>::quiet_NaN();
  out.steps_at_T_min = static_cast<int>(std::count_if(result.steps.begin(), result.steps.end(), [&](const StepRecord & s) {
    return s.duration <= scenario.bounds.T_min + 1e-6;
  }));
  const auto end = disturbance_end();
  out.post_disturbance_steps = end ? post_steps(*end) : 0;
  out.settled = (!disturbed || (end && out.post_disturbance_steps >= opt.min_post_steps)) && last_steps_settled();

  if(t_diverged)
  {
    out.kind = OutcomeKind::Diverged;
    out.note = "DCM offset exceeded the divergence threshold";
  }
  else if(opt.freeze_pendulum || !disturbed)
  {
    out.kind = OutcomeKind::Completed;
  }
  else if(out.settled)
  {
    out.kind = OutcomeKind::Recovered;
  }
  else
  {
    out.kind = OutcomeKind::Diverged;
    if(!end)
    {
      out.note = "a disturbance was never applied";
    }
    else if(out.post_disturbance_steps < opt.min_post_steps)
    {
      out.note = "too few steps after the disturbance to judge recovery";
    }
    else
    {
      out.note = "DCM offset did not settle back to the nominal offset";
    }
  }
  return result;
}

namespace
{

ScenarioConfig probe_scenario(const ScenarioConfig & base, const SweepOptions & options)
{
  ScenarioConfig s = base;
  s.pushes.clear();
  s.displacements.clear();
  s.sim.stop_when_settled = true;
  s.sim.record_trace = false;
  s.sim.plan_swing = false;
  s.duration = options.push_after + options.push_duration + s.bounds.T_max * (s.sim.max_post_steps + 4);
  return s;
}

} // namespace

bool push_recovered(const ScenarioConfig & base, double theta_deg, double force, const SweepOptions & options)
{
  ScenarioConfig s = probe_scenario(base, options);
  PushEvent push;
  push.t_start = options.push_after;
  push.duration = options.push_duration;
  push.force = push_force(theta_deg, force, base.v_des);
  push.at_step_start = Foot::Left;
  s.pushes.push_back(push);
  try
  {
    return run(s).outcome.kind == OutcomeKind::Recovered;
  }
  catch(const SimulationError &)
  {
    return false;
  }
}

std::vector<EnvelopePoint> sweep_push_envelope(const ScenarioConfig & base, const SweepOptions & options)
{
  if(!(options.tolerance > 0.0) || !(options.push_duration > 0.0) || !(options.initial_force > 0.0))
  {
    throw std::invalid_argument("sweep: tolerance, push duration and initial force must be positive");
  }
  base.validate();
  std::vector<EnvelopePoint> points(options.thetas.size());
  parallel_for(
      options.thetas.size(),
      [&](std::size_t i) {
        EnvelopePoint & pt = points[i];
        pt.theta_deg = options.thetas[i];
        auto recovered = [&](double f) {
          ++pt.probes;
          return push_recovered(base, pt.theta_deg, f, options);
        };
        if(!recovered(0.0))
        {
          pt.status = EnvelopeStatus::Unbracketed;
          return;
        }
        double lo = 0.0;
        double hi = options.initial_force;
        for(int round = 0; round < 4; ++round)
        {
          while(recovered(hi))
          {
            lo = hi;
            hi *= 2.0;
            if(hi > options.max_force)
            {
              pt.status = EnvelopeStatus::Unbounded;
              pt.max_force = lo;
              pt.impulse = lo * options.push_duration;
              return;
            }
          }
          while(hi - lo > options.tolerance)
          {
            const double mid = 0.5 * (lo + hi);
            (recovered(mid) ? lo : hi) = mid;
          }
          // look past the frontier for a recovering island
          const double step = std::max(options.tolerance, 0.05 * hi);
          bool island = false;
          for(int j = 1; j <= 3 && !island; ++j)
          {
            const double f = hi + j * step;
            if(recovered(f))
            {
              lo = f;
              hi = 2.0 * f;
              island = true;
            }
          }
          if(!island)
          {
            break;
          }
          pt.non_monotone = true;
        }
        pt.max_force = lo;
        pt.diverged_force = hi;
        pt.impulse = lo * options.push_duration;
      },
      options.serial);
  return points;
}

DisplacementSweepResult sweep_contact_displacement(const ScenarioConfig & base,
                                                   const Vec2 & direction,
                                                   double t_event,
                                                   double resolution,
                                                   double max_magnitude)
{
  if(!(resolution > 0.0) || direction.norm() == 0.0)
  {
    throw std::invalid_argument("sweep_contact_displacement: need a positive resolution and a nonzero direction");
  }
  const Vec2 dir = direction.normalized();
  DisplacementSweepResult res;
  SweepOptions timing;
  timing.push_after = t_event;
  for(int i = 1;; ++i)
  {
    const double mag = i * resolution;
    if(mag > max_magnitude + 1e-12)
    {
      res.first_failure = std::numeric_limits<double>::infinity();
      break;
    }
    ScenarioConfig s = probe_scenario(base, timing);
    s.displacements.push_back({t_event, mag * dir});
    bool ok = false;
    try
    {
      ok = run(s).outcome.kind == OutcomeKind::Recovered;
    }
    catch(const SimulationError &)
    {
    }
    if(!ok)
    {
      res.first_failure = mag;
      break;
    }
    res.max_recovered = mag;
  }
  return res;
}

} // namespace steptime
