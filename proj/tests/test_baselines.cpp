#include <steptime/baselines.h>

#include "oracles.h"

#include <gtest/gtest.h>

using namespace steptime;

namespace
{

const LipmParams params;
const GaitBounds table2;

} // namespace

TEST(FixedTiming, OnOrbitKeepsNominalStep)
{
  const NominalGait g = nominal_gait(Vec2(1.0, 0.0), table2, params);
  StanceInfo st;
  st.u0 = Vec2(1.0, 0.0);
  st.step_elapsed = 0.1;
  const Vec2 end_rel = g.displacement(Foot::Right) + g.offset(Foot::Right);
  const Vec2 xi = st.u0 + end_rel * std::exp(-params.omega0() * (g.T_nom - st.step_elapsed));
  const StepDecision d = fixed_timing_step(xi, st, g, table2, params);
  EXPECT_NEAR((d.u_T - st.u0 - g.displacement(Foot::Right)).norm(), 0.0, 1e-12);
  EXPECT_EQ(d.T_adapt, g.T_nom);
  EXPECT_NEAR((d.b - g.offset(Foot::Right)).norm(), 0.0, 1e-12);
}

TEST(FixedTiming, LandingIsClampedToTheStepBox)
{
  const NominalGait g = nominal_gait(Vec2(1.0, 0.0), table2, params);
  StanceInfo st;
  st.foot = Foot::Left;
  const StepDecision d = fixed_timing_step(Vec2(0.5, -0.4), st, g, table2, params);
  EXPECT_NEAR(d.u_T.x(), table2.L_max, 1e-15);
  EXPECT_NEAR(d.u_T.y(), -table2.W_in_max, 1e-15);
  EXPECT_EQ(d.T_adapt, g.T_nom);
  // the offset absorbs what the clamp could not
  EXPECT_GT(d.b.x(), g.b_x_nom);
}

TEST(Preview, PlanRespectsStepBoxAndPredictsTheLipm)
{
  PreviewConfig cfg;
  cfg.fixed_step_duration = 0.35;
  const Vec2 v(1.0, 0.0);
  const NominalGait g = nominal_gait_with_duration(v, 0.35, table2, params);
  StanceInfo st;
  st.u0 = Vec2(0.2, 0.0);
  st.foot = Foot::Right;
  st.step_elapsed = 0.12;
  LipmState s = nominal_initial_state(g, st.u0, st.foot, params);
  s.com_vel += Vec2(0.2, -0.3); // a disturbance
  const PreviewPlan plan = preview_mpc_step(s, st, cfg, v, table2, params);
  ASSERT_EQ(plan.com_plan.size(), 16u);
  // changes at 0.23, 0.58, 0.93, 1.28 within the 1.6 s horizon
  ASSERT_EQ(plan.footstep_plan.size(), 4u);
  Vec2 prev = st.u0;
  Foot f = st.foot;
  for(const Vec2 & u : plan.footstep_plan)
  {
    const Vec2 d = u - prev;
    const auto [lo, hi] = table2.lateral_step_range(f);
    EXPECT_GE(d.x(), table2.L_min - 1e-9);
    EXPECT_LE(d.x(), table2.L_max + 1e-9);
    EXPECT_GE(d.y(), lo - 1e-9);
    EXPECT_LE(d.y(), hi + 1e-9);
    prev = u;
    f = other(f);
  }
  // replay the contact sequence with an independent integrator
  Vec2 x = s.com, xd = s.com_vel;
  double t = 0.0;
  const double remaining = 0.35 - st.step_elapsed;
  for(int j = 1; j <= 16; ++j)
  {
    const double t_next = j * 0.1;
    while(t < t_next - 1e-12)
    {
      const int active = t < remaining - 1e-12 ? 0 : 1 + static_cast<int>(std::floor((t - remaining) / 0.35 + 1e-9));
      const double boundary = active == 0 ? remaining : remaining + active * 0.35;
      const double t_end = std::min(t_next, boundary);
      const Vec2 u = active == 0 ? st.u0 : plan.footstep_plan[static_cast<std::size_t>(active - 1)];
      std::tie(x, xd) = oracle::rk4_lipm(x, xd, u, params.omega0(), Vec2::Zero(), t_end - t, 2000);
      t = t_end;
    }
    EXPECT_NEAR((plan.com_plan[static_cast<std::size_t>(j - 1)] - x).norm(), 0.0, 1e-8) << j;
  }
  EXPECT_EQ(plan.decision.T_adapt, 0.35);
  EXPECT_EQ(plan.decision.u_T, plan.footstep_plan.front());
}

TEST(Preview, StepsTowardTheDisturbance)
{
  PreviewConfig cfg;
  const Vec2 v(0.0, 0.0);
  const NominalGait g = nominal_gait_with_duration(v, 0.5, table2, params);
  StanceInfo st;
  st.foot = Foot::Left;
  LipmState s = nominal_initial_state(g, st.u0, st.foot, params);
  const PreviewPlan calm = preview_mpc_step(s, st, cfg, v, table2, params);
  s.com_vel.y() -= 0.3;
  const PreviewPlan pushed = preview_mpc_step(s, st, cfg, v, table2, params);
  EXPECT_LT(pushed.decision.u_T.y(), calm.decision.u_T.y() - 0.01);
}

TEST(Preview, InvalidConfigIsRejected)
{
  PreviewConfig cfg;
  cfg.horizon_steps = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = PreviewConfig{};
  cfg.jerk_weight = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
