#include <steptime/viability.h>

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace steptime;

namespace
{

const LipmParams params;
const GaitBounds table2;

double growth(double T)
{
  return std::exp(params.omega0() * T);
}

// Exhaustive search over every lattice policy sequence; exponential in depth.
bool survives_naive(double offset,
                    Foot stance,
                    int depth,
                    const std::vector<double> & Ts,
                    const std::vector<double> & right,
                    const std::vector<double> & left,
                    double threshold,
                    bool lateral)
{
  if(std::abs(offset) > threshold)
  {
    return false;
  }
  if(depth == 0)
  {
    return true;
  }
  const auto & steps = lateral && stance == Foot::Left ? left : right;
  for(double T : Ts)
  {
    for(double d : steps)
    {
      if(survives_naive(offset * growth(T) - d, lateral ? other(stance) : stance, depth - 1, Ts, right, left, threshold, lateral))
      {
        return true;
      }
    }
  }
  return false;
}

std::vector<double> samples(double lo, double hi, int n)
{
  std::vector<double> v;
  for(int i = 0; i < n; ++i)
  {
    v.push_back(lo + (hi - lo) * i / (n - 1));
  }
  return v;
}

} // namespace

TEST(Viability, CapturabilityRadius)
{
  EXPECT_NEAR(capturability_radius(0.5, 0.2, params), 0.492867298451603, 1e-12);
  EXPECT_NEAR(capturability_radius(0.5, 0.2, params), 0.49292, 1e-4);
  EXPECT_NEAR(sagittal_offset_bound(0.5, 0.2, params), capturability_radius(0.5, 0.2, params), 1e-15);
}

TEST(Viability, SagittalBoundShrinksWithSlowerSteps)
{
  EXPECT_NEAR(sagittal_offset_bound(0.5, 0.3, params), 0.268935474867374, 1e-12);
  EXPECT_NEAR(sagittal_offset_bound(0.5, 0.3, params), 0.26932, 5e-4);
  EXPECT_LT(sagittal_offset_bound(0.5, 0.3, params), sagittal_offset_bound(0.5, 0.2, params));
}

TEST(Viability, GrowthFactors)
{
  EXPECT_NEAR(growth(0.2), 2.014471849868727, 1e-12);
  EXPECT_NEAR(growth(0.2), 2.01444, 5e-5);
  EXPECT_NEAR(growth(0.2) * growth(0.2), 4.058096833913533, 1e-12);
  EXPECT_NEAR(growth(0.2) * growth(0.2), 4.05797, 2e-4);
}

TEST(Viability, LateralBoundsFromDeviationRange)
{
  const auto [out, in] = lateral_offset_bounds(0.1, 0.2, -0.1, 0.2, params);
  EXPECT_NEAR(out, -0.098100229094473, 1e-12);
  EXPECT_NEAR(in, 0.197620149976489, 1e-12);
  EXPECT_NEAR(out, -0.09845, 5e-4);
  EXPECT_NEAR(in, 0.19764, 5e-5);
}

TEST(Viability, LateralBoundsOfTheStepBox)
{
  const ViabilityBounds vb = viability_bounds(table2, params);
  EXPECT_NEAR(vb.b_y_max_out, -0.131273536055145, 1e-12);
  EXPECT_NEAR(vb.b_y_max_in, 0.164446843015817, 1e-12);
  EXPECT_NEAR(vb.b_x_max, 0.492867298451603, 1e-12);
  EXPECT_NEAR(vb.b_x_min, -0.492867298451603, 1e-12);
  const auto [r_lo, r_hi] = lateral_offset_interval(vb, Foot::Right);
  const auto [l_lo, l_hi] = lateral_offset_interval(vb, Foot::Left);
  EXPECT_EQ(r_lo, vb.b_y_max_out);
  EXPECT_EQ(r_hi, vb.b_y_max_in);
  EXPECT_EQ(l_lo, -vb.b_y_max_in);
  EXPECT_EQ(l_hi, -vb.b_y_max_out);
}

TEST(Viability, SagittalExcessGrowsGeometrically)
{
  const double b_max = sagittal_offset_bound(table2.L_max, table2.T_min, params);
  const double eps = 1e-3;
  double b = b_max + eps;
  for(int k = 1; k <= 4; ++k)
  {
    // best policy: longest step at the shortest duration
    const Vec2 xi_T = dcm_at_step_end(Vec2(b, 0.0), Vec2::Zero(), table2.T_min, params);
    b = xi_T.x() - table2.L_max;
    EXPECT_NEAR(b - b_max, eps * std::pow(growth(table2.T_min), k), 1e-9) << k;
  }
}

TEST(Viability, LateralExcessGrowsByTwoStepFactor)
{
  const ViabilityBounds vb = viability_bounds(table2, params);
  const double eps = 1e-3;
  // outward for a right stance is -y; the boundary policy steps as far to -y as each foot allows
  for(const bool outward : {true, false})
  {
    const double bound = outward ? vb.b_y_max_out : vb.b_y_max_in;
    const double start = bound + (outward ? -eps : eps);
    double b = start;
    Foot stance = Foot::Right;
    for(int k = 0; k < 2; ++k)
    {
      const auto [lo, hi] = table2.lateral_step_range(stance);
      const double d = outward ? lo : hi;
      b = dcm_at_step_end(Vec2(0.0, b), Vec2::Zero(), table2.T_min, params).y() - d;
      stance = other(stance);
    }
    EXPECT_NEAR(b - bound, (start - bound) * growth(2 * table2.T_min), 1e-9) << outward;
  }
}

TEST(Viability, OffsetsInsideSurviveAndOutsideDiverge)
{
  const CertificationGrid grid;
  const ViabilityBounds vb = viability_bounds(table2, params);
  EXPECT_EQ(classify_sagittal(0.9 * vb.b_x_max, table2, params, grid), Survival::Survives);
  EXPECT_EQ(classify_sagittal(1.01 * vb.b_x_max, table2, params, grid), Survival::Diverges);
  EXPECT_EQ(classify_sagittal(1.01 * vb.b_x_min, table2, params, grid), Survival::Diverges);
  EXPECT_EQ(classify_lateral(0.9 * vb.b_y_max_out, Foot::Right, table2, params, grid), Survival::Survives);
  EXPECT_EQ(classify_lateral(1.05 * vb.b_y_max_out, Foot::Right, table2, params, grid), Survival::Diverges);
  EXPECT_EQ(classify_lateral(1.05 * vb.b_y_max_in, Foot::Right, table2, params, grid), Survival::Diverges);
  // mirrored for the left foot
  EXPECT_EQ(classify_lateral(-0.9 * vb.b_y_max_out, Foot::Left, table2, params, grid), Survival::Survives);
  EXPECT_EQ(classify_lateral(-1.05 * vb.b_y_max_out, Foot::Left, table2, params, grid), Survival::Diverges);
}

TEST(Viability, PrunedSearchAgreesWithExhaustiveSearch)
{
  CertificationGrid grid;
  grid.length_samples = 4;
  grid.duration_samples = 3;
  grid.n_steps = 5;
  const auto Ts = samples(table2.T_min, table2.T_max, grid.duration_samples);
  const auto sag = samples(table2.L_min, table2.L_max, grid.length_samples);
  const auto [r_lo, r_hi] = table2.lateral_step_range(Foot::Right);
  const auto [l_lo, l_hi] = table2.lateral_step_range(Foot::Left);
  const auto right = samples(r_lo, r_hi, grid.length_samples);
  const auto left = samples(l_lo, l_hi, grid.length_samples);
  const double threshold = grid.divergence_factor * sagittal_offset_bound(table2.L_max, table2.T_min, params);
  for(int i = -30; i <= 30; ++i)
  {
    const double b = 0.025 * i;
    const bool naive_sag = survives_naive(b, Foot::Right, grid.n_steps, Ts, sag, sag, threshold, false);
    EXPECT_EQ(classify_sagittal(b, table2, params, grid) == Survival::Survives, naive_sag) << b;
    for(Foot f : {Foot::Right, Foot::Left})
    {
      const double y = 0.4 * b;
      const bool naive_lat = survives_naive(y, f, grid.n_steps, Ts, right, left, threshold, true);
      EXPECT_EQ(classify_lateral(y, f, table2, params, grid) == Survival::Survives, naive_lat) << y;
    }
  }
}

TEST(Viability, CertifiedFrontierWithinOneCell)
{
  const CertificationReport r = certify_bounds(table2, params);
  ASSERT_EQ(r.frontiers.size(), 4u);
  for(const auto & f : r.frontiers)
  {
    EXPECT_LE(f.gap, f.cell + 1e-12) << f.direction;
    // the frontier never exceeds the analytic bound
    EXPECT_LE(std::abs(f.empirical_frontier), std::abs(f.analytic_bound) + 1e-12) << f.direction;
  }
  EXPECT_LE(r.max_gap_cells, 1.0);
  const nlohmann::json j = r;
  EXPECT_EQ(j.at("empirical_frontier").size(), 4u);
  EXPECT_EQ(j.at("gaps").size(), 4u);
}

TEST(Viability, InvalidGridIsRejected)
{
  CertificationGrid grid;
  grid.n_steps = 2;
  EXPECT_THROW(certify_bounds(table2, params, grid), std::invalid_argument);
}
