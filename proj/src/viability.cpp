#include <steptime/parallel.h>
#include <steptime/viability.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace steptime
{

double capturability_radius(double L_max, double T_min, const LipmParams & params)
{
  if(!(T_min > 0.0))
  {
    throw std::invalid_argument("capturability_radius: T_min must be positive");
  }
  const double decay = std::exp(-params.omega0() * T_min);
  return L_max * decay / (1.0 - decay);
}

double sagittal_offset_bound(double L_max, double T_min, const LipmParams & params)
{
  if(!(T_min > 0.0))
  {
    throw std::invalid_argument("sagittal_offset_bound: T_min must be positive");
  }
  return L_max / std::expm1(params.omega0() * T_min);
}

std::pair<double, double> lateral_offset_bounds(double l_p, double W_max, double W_min, double T_min, const LipmParams & params)
{
  if(!(T_min > 0.0))
  {
    throw std::invalid_argument("lateral_offset_bounds: T_min must be positive");
  }
  const double e = std::exp(params.omega0() * T_min);
  const double base = l_p / (1.0 + e);
  const double denom = 1.0 - e * e;
  const double out = base + (W_max - W_min * e) / denom;
  const double in = base + (W_min - W_max * e) / denom;
  return {out, in};
}

std::pair<double, double> lateral_offset_bounds(const GaitBounds & bounds, const LipmParams & params)
{
  // right stance: displacement l_p + W within [-W_out_max, W_in_max]
  const double W_max = bounds.W_in_max - bounds.l_p;
  const double W_min = -bounds.W_out_max - bounds.l_p;
  return lateral_offset_bounds(bounds.l_p, W_max, W_min, bounds.T_min, params);
}

ViabilityBounds viability_bounds(const GaitBounds & bounds, const LipmParams & params)
{
  bounds.validate();
  ViabilityBounds vb;
  vb.b_x_max = sagittal_offset_bound(bounds.L_max, bounds.T_min, params);
  // backward walking mirrors the forward derivation with the signed minimum length
  vb.b_x_min = sagittal_offset_bound(bounds.L_min, bounds.T_min, params);
  std::tie(vb.b_y_max_out, vb.b_y_max_in) = lateral_offset_bounds(bounds, params);
  return vb;
}

std::pair<double, double> lateral_offset_interval(const ViabilityBounds & vb, Foot stance)
{
  if(stance == Foot::Right)
  {
    return {vb.b_y_max_out, vb.b_y_max_in};
  }
  return {-vb.b_y_max_in, -vb.b_y_max_out};
}

namespace
{

std::vector<double> linspace(double lo, double hi, int n)
{
  std::vector<double> v(static_cast<std::size_t>(n));
  for(int i = 0; i < n; ++i)
  {
    v[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  }
  return v;
}

struct PolicyLattice
{
  std::vector<double> growth; // e^{w T} per duration sample
  std::vector<double> right_steps;
  std::vector<double> left_steps;
  double threshold = 0.0;
};

// Depth-first search keeping the closest child to zero on each side.
bool survives(double offset, Foot stance, int depth, const PolicyLattice & lat, bool lateral)
{
  if(std::abs(offset) > lat.threshold)
  {
    return false;
  }
  if(depth == 0)
  {
    return true;
  }
  const auto & steps = (lateral && stance == Foot::Left) ? lat.left_steps : lat.right_steps;
  double best_pos = std::numeric_limits<double>::infinity();
  double best_neg = -std::numeric_limits<double>::infinity();
  for(double g : lat.growth)
  {
    for(double d : steps)
    {
      const double next = offset * g - d;
      if(next >= 0.0)
      {
        best_pos = std::min(best_pos, next);
      }
      else
      {
        best_neg = std::max(best_neg, next);
      }
    }
  }
  const Foot next_stance = lateral ? other(stance) : stance;
  double first = best_pos;
  double second = best_neg;
  if(std::abs(best_neg) < best_pos)
  {
    std::swap(first, second);
  }
  if(std::isfinite(first) && survives(first, next_stance, depth - 1, lat, lateral))
  {
    return true;
  }
  return std::isfinite(second) && survives(second, next_stance, depth - 1, lat, lateral);
}

PolicyLattice make_lattice(const GaitBounds & bounds, const LipmParams & params, const CertificationGrid & grid)
{
  if(grid.length_samples < 2 || grid.duration_samples < 1 || grid.n_steps < 5 || grid.offset_cells < 1)
  {
    throw std::invalid_argument("certify: grid needs >= 2 length samples, >= 1 duration sample, >= 5 steps");
  }
  PolicyLattice lat;
  for(double T : linspace(bounds.T_min, bounds.T_max, grid.duration_samples))
  {
    lat.growth.push_back(std::exp(params.omega0() * T));
  }
  const auto [r_lo, r_hi] = bounds.lateral_step_range(Foot::Right);
  const auto [l_lo, l_hi] = bounds.lateral_step_range(Foot::Left);
  lat.right_steps = linspace(r_lo, r_hi, grid.length_samples);
  lat.left_steps = linspace(l_lo, l_hi, grid.length_samples);
  lat.threshold = grid.divergence_factor * sagittal_offset_bound(bounds.L_max, bounds.T_min, params);
  return lat;
}

} // namespace

Survival classify_sagittal(double offset, const GaitBounds & bounds, const LipmParams & params, const CertificationGrid & grid)
{
  PolicyLattice lat = make_lattice(bounds, params, grid);
  lat.right_steps = linspace(bounds.L_min, bounds.L_max, grid.length_samples);
  return survives(offset, Foot::Right, grid.n_steps, lat, false) ? Survival::Survives : Survival::Diverges;
}

Survival classify_lateral(double offset,
                          Foot stance,
                          const GaitBounds & bounds,
                          const LipmParams & params,
                          const CertificationGrid & grid)
{
  const PolicyLattice lat = make_lattice(bounds, params, grid);
  return survives(offset, stance, grid.n_steps, lat, true) ? Survival::Survives : Survival::Diverges;
}

CertificationReport certify_bounds(const GaitBounds & bounds,
                                   const LipmParams & params,
                                   const CertificationGrid & grid,
                                   bool serial)
{
  const ViabilityBounds vb = viability_bounds(bounds, params);

  struct Direction
  {
    std::string name;
    double bound;
    bool lateral;
  };
  const std::vector<Direction> directions = {{"sagittal_forward", vb.b_x_max, false},
                                             {"sagittal_backward", vb.b_x_min, false},
                                             {"lateral_outward", vb.b_y_max_out, true},
                                             {"lateral_inward", vb.b_y_max_in, true}};

  CertificationReport report;
  report.grid = grid;
  const int cells = grid.offset_cells;
  const auto n_points = static_cast<std::size_t>(cells + 1);

  for(const auto & dir : directions)
  {
    FrontierResult fr;
    fr.direction = dir.name;
    fr.analytic_bound = dir.bound;
    fr.cell = grid.span * std::abs(dir.bound) / cells;
    const double sign = dir.bound >= 0.0 ? 1.0 : -1.0;
    fr.offsets.resize(n_points);
    fr.classes.resize(n_points);
    for(std::size_t i = 0; i < n_points; ++i)
    {
      fr.offsets[i] = sign * fr.cell * static_cast<double>(i);
    }
    parallel_for(
        n_points,
        [&](std::size_t i) {
          fr.classes[i] = dir.lateral ? classify_lateral(fr.offsets[i], Foot::Right, bounds, params, grid)
                                      : classify_sagittal(fr.offsets[i], bounds, params, grid);
        },
        serial);

    fr.empirical_frontier = 0.0;
    fr.first_diverging = std::numeric_limits<double>::quiet_NaN();
    for(std::size_t i = 0; i < n_points; ++i)
    {
      if(fr.classes[i] == Survival::Diverges)
      {
        fr.first_diverging = fr.offsets[i];
        break;
      }
      fr.empirical_frontier = fr.offsets[i];
    }
    fr.gap = std::abs(fr.empirical_frontier - fr.analytic_bound);
    report.max_gap = std::max(report.max_gap, fr.gap);
    report.max_gap_cells = std::max(report.max_gap_cells, fr.gap / fr.cell);
    report.frontiers.push_back(std::move(fr));
  }
  return report;
}

void to_json(nlohmann::json & j, const CertificationGrid & grid)
{
  j = nlohmann::json{{"offset_cells", grid.offset_cells},
                     {"span", grid.span},
                     {"length_samples", grid.length_samples},
                     {"duration_samples", grid.duration_samples},
                     {"n_steps", grid.n_steps},
                     {"divergence_factor", grid.divergence_factor}};
}

void to_json(nlohmann::json & j, const CertificationReport & report)
{
  nlohmann::json analytic = nlohmann::json::object();
  nlohmann::json empirical = nlohmann::json::object();
  nlohmann::json gaps = nlohmann::json::object();
  for(const auto & fr : report.frontiers)
  {
    analytic[fr.direction] = fr.analytic_bound;
    empirical[fr.direction] = fr.empirical_frontier;
    gaps[fr.direction] = {{"gap", fr.gap}, {"cell", fr.cell}};
  }
  j = nlohmann::json{{"analytic_bound", analytic},
                     {"empirical_frontier", empirical},
                     {"grid_spec", report.grid},
                     {"gaps", gaps},
                     {"max_gap", report.max_gap},
                     {"max_gap_cells", report.max_gap_cells}};
}

} // namespace steptime
