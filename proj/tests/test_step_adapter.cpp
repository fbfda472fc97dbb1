#include <steptime/step_adapter.h>
#include <steptime/viability.h>

#include "step_oracle.h"

#include <gtest/gtest.h>

using namespace steptime;

namespace
{

const LipmParams params;
const GaitBounds table2;
const CostWeights weights;

StepDecision decide(const Vec2 & xi, const StanceInfo & st, const NominalGait & g)
{
  return adapt_step(xi, st, g, table2, viability_bounds(table2, params), weights, params);
}

} // namespace

TEST(StepAdapter, TauTransformRoundTrip)
{
  for(double T : {0.0, 0.2, 0.35, 0.8})
  {
    EXPECT_NEAR(timing_from_tau(tau_from_timing(T, params), params), T, 1e-15);
  }
  EXPECT_NEAR(tau_from_timing(0.35, params), 3.406293808788845, 1e-12);
  EXPECT_THROW(tau_from_timing(-0.1, params), std::domain_error);
  EXPECT_THROW(timing_from_tau(0.5, params), std::domain_error);
}

TEST(StepAdapter, NominalStateKeepsTheNominalStep)
{
  const NominalGait g = nominal_gait(Vec2(1.0, 0.0), table2, params);
  for(Foot f : {Foot::Right, Foot::Left})
  {
    StanceInfo st;
    st.foot = f;
    st.u0 = Vec2(0.7, 0.05);
    st.step_elapsed = 0.1;
    // on the orbit, the offset at step end equals displacement plus nominal offset
    const Vec2 end_rel = g.displacement(f) + g.offset(f);
    const Vec2 xi = st.u0 + end_rel * std::exp(-params.omega0() * (g.T_nom - st.step_elapsed));
    const StepDecision d = decide(xi, st, g);
    EXPECT_NEAR((d.u_T - st.u0 - g.displacement(f)).norm(), 0.0, 1e-8);
    EXPECT_NEAR(d.T_adapt, g.T_nom, 1e-8);
    EXPECT_NEAR((d.b - g.offset(f)).norm(), 0.0, 1e-8);
    EXPECT_LE(d.psi.norm(), 1e-12);
    EXPECT_FALSE(d.viability_violated);
    EXPECT_NEAR(d.objective, 0.0, 1e-10);
  }
}

TEST(StepAdapter, LargeForwardOffsetStepsFastAndFar)
{
  const NominalGait g = nominal_gait(Vec2(1.0, 0.0), table2, params);
  const ViabilityBounds vb = viability_bounds(table2, params);
  StanceInfo st;
  st.foot = Foot::Right;
  const Vec2 xi(0.9 * vb.b_x_max, g.offset(Foot::Left).y());
  const StepDecision d = decide(xi, st, g);
  EXPECT_NEAR(d.T_adapt, table2.T_min, 1e-9);
  EXPECT_NEAR(d.u_T.x(), table2.L_max, 1e-9);
  EXPECT_LE(d.psi.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(StepAdapter, DurationNeverEndsBeforeNow)
{
  const NominalGait g = nominal_gait(Vec2(1.0, 0.0), table2, params);
  StanceInfo st;
  st.step_elapsed = 0.5;
  const StepDecision d = decide(Vec2(0.6, 0.0), st, g);
  EXPECT_GE(d.T_adapt, st.step_elapsed + 0.001 - 1e-9);
  st.step_elapsed = 0.85;
  EXPECT_THROW(decide(Vec2(0.6, 0.0), st, g), std::invalid_argument);
}

TEST(StepAdapter, NonViableStateUsesSlack)
{
  const NominalGait g = nominal_gait(Vec2(1.0, 0.0), table2, params);
  StanceInfo st;
  const StepDecision d = decide(Vec2(3.0, 0.0), st, g);
  EXPECT_TRUE(d.viability_violated);
  EXPECT_GT(d.psi(1), 0.0);
  // bounds hold to the solver's feasibility tolerance
  EXPECT_NEAR(d.u_T.x(), table2.L_max, 1e-7);
  EXPECT_NEAR(d.T_adapt, table2.T_min, 1e-7);
}

TEST(StepAdapter, RejectsBadInput)
{
  const NominalGait g = nominal_gait(Vec2(1.0, 0.0), table2, params);
  StanceInfo st;
  EXPECT_THROW(decide(Vec2(std::nan(""), 0.0), st, g), std::invalid_argument);
  CostWeights bad;
  bad.alpha2 = -1.0;
  EXPECT_THROW(adapt_step(Vec2::Zero(), st, g, table2, viability_bounds(table2, params), bad, params), std::invalid_argument);
}

TEST(StepAdapter, MatchesGridSearchOracle)
{
  std::mt19937 rng(3);
  const double w = params.omega0();
  for(int trial = 0; trial < 200; ++trial)
  {
    const auto c = oracle::random_step_case(rng, table2, params);
    const NominalGait g = nominal_gait(c.v_des, table2, params);
    const StepDecision d = decide(c.xi, c.stance, g);
    const auto inst = oracle::make_instance(c.xi, c.stance, g, table2, weights, params);
    const bool viable = oracle::zero_slack_feasible(inst);
    const auto grid = oracle::grid_step_search(inst, w, 4000, viable);
    EXPECT_LE(d.objective, grid.objective + 1e-7 * std::max(1.0, grid.objective)) << trial;
    EXPECT_GE(d.objective, grid.objective - grid.resolution - 1e-9) << trial;
    // linking equality
    const Vec2 du = d.u_T - c.stance.u0;
    EXPECT_LE((du + d.b - inst.rate * d.tau).cwiseAbs().maxCoeff(), 1e-7) << trial;
    if(viable)
    {
      EXPECT_LE(d.psi.cwiseAbs().maxCoeff(), 1e-6) << trial;
    }
  }
}

TEST(StepAdapter, StatefulAdapterMatchesFreeFunction)
{
  const NominalGait g = nominal_gait(Vec2(0.6, 0.0), table2, params);
  StepAdapter adapter(g, table2, weights, params);
  std::mt19937 rng(5);
  for(int trial = 0; trial < 50; ++trial)
  {
    auto c = oracle::random_step_case(rng, table2, params);
    c.stance.step_elapsed = std::min(c.stance.step_elapsed, 0.9 * g.T_nom);
    const StepDecision a = adapter.decide(c.xi, c.stance);
    const StepDecision b = decide(c.xi, c.stance, g);
    EXPECT_NEAR((a.u_T - b.u_T).norm(), 0.0, 1e-8);
    EXPECT_NEAR(a.T_adapt, b.T_adapt, 1e-8);
  }
}
