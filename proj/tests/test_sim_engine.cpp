#include <steptime/sim_engine.h>

#include <gtest/gtest.h>

#include <cmath>

using namespace steptime;

namespace
{

ScenarioConfig walking(double duration = 3.0)
{
  ScenarioConfig s;
  s.v_des = Vec2(1.0, 0.0);
  s.duration = duration;
  return s;
}

ScenarioConfig pushed(ControllerKind kind)
{
  ScenarioConfig s = walking(10.0);
  s.controller = kind;
  PushEvent p;
  p.t_start = 1.4;
  p.duration = 0.1;
  p.force = Vec2(0.0, -325.0);
  p.at_step_start = Foot::Right;
  s.pushes.push_back(p);
  return s;
}

} // namespace

TEST(SimEngine, ControllerNames)
{
  for(auto k : {ControllerKind::Adaptive, ControllerKind::FixedTiming, ControllerKind::Preview})
  {
    EXPECT_EQ(controller_from_string(to_string(k)), k);
  }
  EXPECT_THROW(controller_from_string("mpc"), std::invalid_argument);
}

TEST(SimEngine, PushDirectionConvention)
{
  const Vec2 f0 = push_force(0.0, 10.0, Vec2::Zero());
  EXPECT_NEAR((f0 - Vec2(10.0, 0.0)).norm(), 0.0, 1e-12);
  const Vec2 f90 = push_force(90.0, 10.0, Vec2::Zero());
  EXPECT_NEAR((f90 - Vec2(0.0, 10.0)).norm(), 0.0, 1e-12);
  // measured from the direction of motion
  const Vec2 fm = push_force(90.0, 10.0, Vec2(0.0, -1.0));
  EXPECT_NEAR((fm - Vec2(10.0, 0.0)).norm(), 0.0, 1e-12);
}

TEST(SimEngine, NominalRunHoldsTheFixedPoint)
{
  const RunResult r = run(walking(3.5));
  EXPECT_EQ(r.outcome.kind, OutcomeKind::Completed);
  ASSERT_EQ(r.steps.size(), 10u);
  for(const auto & st : r.steps)
  {
    EXPECT_NEAR((st.end_offset - st.reference_offset).norm(), 0.0, 1e-9) << st.index;
    EXPECT_NEAR(st.duration, 0.35, 1e-9);
    EXPECT_LE(st.touchdown_mismatch, 1e-7);
  }
}

TEST(SimEngine, RunsAreBitIdentical)
{
  const RunResult a = run(pushed(ControllerKind::Adaptive));
  const RunResult b = run(pushed(ControllerKind::Adaptive));
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for(std::size_t i = 0; i < a.trace.size(); ++i)
  {
    const auto & x = a.trace[i];
    const auto & y = b.trace[i];
    ASSERT_TRUE(x.t == y.t && x.com == y.com && x.com_vel == y.com_vel && x.u_T == y.u_T && x.T_adapt == y.T_adapt
                && x.swing == y.swing && x.status == y.status)
        << i;
  }
}

TEST(SimEngine, NewStanceIsTheLastDecidedLanding)
{
  const RunResult r = run(pushed(ControllerKind::Adaptive));
  ASSERT_GT(r.steps.size(), 5u);
  for(std::size_t i = 1; i < r.steps.size(); ++i)
  {
    EXPECT_EQ(r.steps[i].u0, r.steps[i - 1].u_T) << i;
    EXPECT_NEAR(r.steps[i].t_start, r.steps[i - 1].t_start + r.steps[i - 1].duration, 1e-12);
  }
}

TEST(SimEngine, PushImpulseIsIntegratedExactly)
{
  ScenarioConfig s = walking(0.3);
  s.sim.freeze_pendulum = true;
  PushEvent p;
  p.t_start = 0.0104;
  p.duration = 0.1233;
  p.force = Vec2(120.0, -45.0);
  s.pushes.push_back(p);
  const RunResult r = run(s);
  const auto & first = r.trace.front();
  const auto & last = r.trace.back();
  const Vec2 dv = last.com_vel - first.com_vel;
  EXPECT_NEAR((dv * s.mass - p.force * p.duration).norm(), 0.0, 1e-9);
}

TEST(SimEngine, PushSnapsToTheStepStart)
{
  ScenarioConfig s = walking(2.0);
  PushEvent p;
  p.t_start = 1.3;
  p.duration = 0.1;
  p.force = Vec2(0.0, -100.0);
  p.at_step_start = Foot::Right;
  s.pushes.push_back(p);
  const RunResult r = run(s);
  // steps alternate right, left from t = 0 with 0.35 s each: the next right stance starts at 1.4 s
  const auto it = std::find_if(r.steps.begin(), r.steps.end(), [](const StepRecord & st) { return st.t_start > 1.3; });
  ASSERT_NE(it, r.steps.end());
  EXPECT_EQ(it->foot, Foot::Right);
  EXPECT_NEAR(it->t_start, 1.4, 1e-9);
  // nothing is disturbed before the push
  for(const auto & st : r.steps)
  {
    if(st.t_start + st.duration <= 1.4 + 1e-9)
    {
      EXPECT_NEAR((st.end_offset - st.reference_offset).norm(), 0.0, 1e-9);
    }
  }
}

TEST(SimEngine, LateralPushOutcomes)
{
  const RunResult a = run(pushed(ControllerKind::Adaptive));
  EXPECT_EQ(a.outcome.kind, OutcomeKind::Recovered);
  EXPECT_GE(a.outcome.steps_at_T_min, 1);
  const RunResult f = run(pushed(ControllerKind::FixedTiming));
  EXPECT_EQ(f.outcome.kind, OutcomeKind::Diverged);
  EXPECT_TRUE(std::isfinite(f.outcome.t_diverged));
}

TEST(SimEngine, ContactDisplacementMovesTheStancePoint)
{
  ScenarioConfig s = walking(1.0);
  s.displacements.push_back({0.5005, Vec2(-0.03, 0.01)});
  const RunResult r = run(s);
  const auto before = std::find_if(r.trace.begin(), r.trace.end(), [](const TraceRow & row) { return row.t >= 0.5; });
  const auto after = std::find_if(r.trace.begin(), r.trace.end(), [](const TraceRow & row) { return row.t >= 0.501; });
  ASSERT_NE(after, r.trace.end());
  EXPECT_NEAR((after->u0 - before->u0 - Vec2(-0.03, 0.01)).norm(), 0.0, 1e-12);
}

TEST(SimEngine, PreviewControllerWalks)
{
  ScenarioConfig s = walking(3.5);
  s.controller = ControllerKind::Preview;
  s.preview.fixed_step_duration = 0.35;
  const RunResult r = run(s);
  EXPECT_NE(r.outcome.kind, OutcomeKind::Diverged);
  ASSERT_GE(r.steps.size(), 9u);
  const double avg = (r.steps.back().u_T.x() - r.steps.front().u0.x()) / (r.steps.back().t_start + r.steps.back().duration);
  EXPECT_NEAR(avg, 1.0, 0.1);
}

TEST(SimEngine, InvalidScenariosAreRejected)
{
  ScenarioConfig s = walking();
  s.control_period = 0.0;
  EXPECT_THROW(run(s), std::invalid_argument);
  s = walking();
  s.pushes.push_back({0.0, -1.0, Vec2(1.0, 0.0), std::nullopt});
  EXPECT_THROW(run(s), std::invalid_argument);
  s = walking();
  s.v_des = Vec2(5.0, 0.0);
  EXPECT_THROW(run(s), InfeasibleVelocity);
}

TEST(SimEngine, EnvelopeBracketIsConsistent)
{
  ScenarioConfig base;
  base.duration = 30.0;
  base.sim.plan_swing = false;
  base.sim.record_trace = false;
  base.sim.stop_when_settled = true;
  SweepOptions o;
  o.thetas = {0.0, 90.0};
  o.tolerance = 10.0;
  const auto env = sweep_push_envelope(base, o);
  ASSERT_EQ(env.size(), 2u);
  for(const auto & p : env)
  {
    ASSERT_EQ(p.status, EnvelopeStatus::Ok);
    EXPECT_LE(p.diverged_force - p.max_force, o.tolerance);
    EXPECT_NEAR(p.impulse, p.max_force * o.push_duration, 1e-9);
    EXPECT_TRUE(push_recovered(base, p.theta_deg, p.max_force, o));
    EXPECT_FALSE(push_recovered(base, p.theta_deg, p.diverged_force, o));
  }
  // sagittal pushes are easier to absorb than lateral ones
  EXPECT_GT(env[0].max_force, env[1].max_force);
}

TEST(SimEngine, DisplacementSweep)
{
  ScenarioConfig base = walking(10.0);
  base.sim.plan_swing = false;
  base.sim.record_trace = false;
  base.sim.stop_when_settled = true;
  const auto r = sweep_contact_displacement(base, Vec2(-1.0, 0.0), 1.5, 0.05, 2.0);
  EXPECT_GT(r.max_recovered, 0.0);
  EXPECT_NEAR(r.first_failure - r.max_recovered, 0.05, 1e-12);
}
