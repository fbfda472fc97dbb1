#include <steptime/swing_planner.h>

#include "swing_fuzz.h"

#include <gtest/gtest.h>

using namespace steptime;

TEST(SwingPlanner, RestPlanStaysOnTheGround)
{
  const SwingPlan p = rest_plan(Vec2(0.3, -0.1), 0.4);
  for(double t : {0.0, 0.2, 0.4})
  {
    const SwingSample s = evaluate(p, t);
    EXPECT_NEAR((s.position - Vec3(0.3, -0.1, 0.0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR(s.velocity.norm(), 0.0, 1e-15);
  }
  EXPECT_THROW(evaluate(p, 0.5), std::domain_error);
  EXPECT_THROW(evaluate(p, -0.1), std::domain_error);
}

TEST(SwingPlanner, FreshSwingReachesApexAndTarget)
{
  SwingPlanner planner;
  planner.start(Vec2(0.0, 0.0), Vec2(0.4, 0.2), 0.5);
  const SwingSample mid = planner.sample(0.25);
  EXPECT_NEAR(mid.position.z(), 0.05, 1e-6);
  const SwingSample end = planner.sample(0.5);
  EXPECT_NEAR((end.position - Vec3(0.4, 0.2, 0.0)).norm(), 0.0, 1e-9);
  EXPECT_NEAR(end.velocity.norm(), 0.0, 1e-8);
  EXPECT_NEAR(end.acceleration.norm(), 0.0, 1e-6);
  const SwingSample start = planner.sample(0.0);
  EXPECT_NEAR(start.position.norm(), 0.0, 1e-12);
  EXPECT_NEAR(start.velocity.norm(), 0.0, 1e-10);
}

TEST(SwingPlanner, HorizontalQuinticHitsBoundaryConditions)
{
  SwingPlan prev = rest_plan(Vec2(0.1, 0.0), 0.6);
  prev = replan_horizontal(prev, 0.0, 0.6, Vec2(0.5, 0.1));
  const SwingSample mid = evaluate(prev, 0.2);
  const SwingPlan next = replan_horizontal(prev, 0.2, 0.4, Vec2(0.3, -0.1));
  const SwingSample s = evaluate(next, 0.2);
  EXPECT_NEAR((s.position - mid.position).head<2>().norm(), 0.0, 1e-12);
  EXPECT_NEAR((s.velocity - mid.velocity).head<2>().norm(), 0.0, 1e-10);
  EXPECT_NEAR((s.acceleration - mid.acceleration).head<2>().norm(), 0.0, 1e-8);
  const SwingSample e = evaluate(next, 0.4);
  EXPECT_NEAR((e.position.head<2>() - Vec2(0.3, -0.1)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(e.velocity.head<2>().norm(), 0.0, 1e-9);
  EXPECT_NEAR(e.acceleration.head<2>().norm(), 0.0, 1e-7);
}

TEST(SwingPlanner, ReplanningTooCloseToTouchdownIsRefused)
{
  SwingPlan p = rest_plan(Vec2::Zero(), 0.4);
  EXPECT_THROW(replan_vertical(p, 0.3995, 0.4, VerticalOptions{}), InfeasibleWindow);
  EXPECT_THROW(replan_horizontal(p, 0.3995, 0.4, Vec2(0.1, 0.0)), InfeasibleWindow);
  SwingPlanner planner;
  planner.start(Vec2::Zero(), Vec2(0.3, 0.0), 0.4);
  EXPECT_FALSE(planner.update(0.3995, 0.4, Vec2(0.5, 0.0)));
  EXPECT_NEAR(planner.sample(0.4).position.x(), 0.3, 1e-9);
}

TEST(SwingPlanner, ShorteningTheStepKeepsTheSplice)
{
  SwingPlanner planner;
  planner.start(Vec2::Zero(), Vec2(0.3, 0.1), 0.6);
  for(int k = 1; k <= 150; ++k)
  {
    planner.update(k * 0.001, 0.6, Vec2(0.3, 0.1));
  }
  const SwingSample before = planner.sample(0.151);
  ASSERT_TRUE(planner.update(0.151, 0.2, Vec2(0.45, 0.05)));
  const SwingSample after = planner.sample(0.151);
  EXPECT_LE((after.acceleration - before.acceleration).norm(), 1e-6);
  EXPECT_LE((after.position - before.position).norm(), 1e-9);
  for(int j = 0; j <= 49; ++j)
  {
    const double z = planner.sample(0.151 + j * 0.001).position.z();
    EXPECT_GE(z, -1e-9);
    EXPECT_LE(z, 0.1 + 1e-9);
  }
  EXPECT_NEAR((planner.sample(0.2).position - Vec3(0.45, 0.05, 0.0)).norm(), 0.0, 1e-7);
}

TEST(SwingPlanner, FuzzedChangesAreContinuous)
{
  const auto st = fuzz::fuzz_swings(500, 17);
  EXPECT_GE(st.changes, 500);
  EXPECT_LE(st.max_acc_jump, 1e-6);
  EXPECT_LE(st.max_vel_jump, 1e-8);
  EXPECT_LE(st.max_pos_jump, 1e-9);
  EXPECT_GE(st.min_z, -1e-9);
  EXPECT_LE(st.max_z, 0.1 + 1e-9);
  EXPECT_LE(st.max_endpoint_error, 1e-7);
}
