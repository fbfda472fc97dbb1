#pragma once

#include <steptime/gait_nominal.h>
#include <steptime/lipm.h>

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <utility>
#include <vector>

namespace steptime
{

/** \brief Bounds on the start-of-step DCM offset outside of which every stepping policy falls.
 *
 * Lateral bounds are expressed for a right stance foot: the viable start offsets are
 * [b_y_max_out, b_y_max_in]. Use lateral_offset_interval() for either foot.
 */
struct ViabilityBounds
{
  double b_x_max = 0.0;
  double b_x_min = 0.0;
  double b_y_max_out = 0.0;
  double b_y_max_in = 0.0;
};

/// Infinite-step capturability radius L_max e^{-wT}/(1 - e^{-wT}).
double capturability_radius(double L_max, double T_min, const LipmParams & params);

/// Largest sagittal offset from which a step of length L_max at T_min keeps the offset bounded.
double sagittal_offset_bound(double L_max, double T_min, const LipmParams & params);

/** \brief Lateral offset bounds as a function of the deviation range [W_min, W_max] from the default width.
 *
 * Returns (out, in). A right stance step lands at lateral displacement l_p + W.
 */
std::pair<double, double> lateral_offset_bounds(double l_p, double W_max, double W_min, double T_min, const LipmParams & params);

/// Lateral bounds for the step box of `bounds`; returns (b_y_max_out, b_y_max_in).
std::pair<double, double> lateral_offset_bounds(const GaitBounds & bounds, const LipmParams & params);

ViabilityBounds viability_bounds(const GaitBounds & bounds, const LipmParams & params);

/** \brief Viable lateral start-of-step offsets [lower, upper] when `stance` is the stance foot.
 *
 * This is the single place where the outward/inward convention is mapped to signed bounds:
 * the right foot's outward side is -y, the left foot's is +y.
 */
std::pair<double, double> lateral_offset_interval(const ViabilityBounds & vb, Foot stance);

struct CertificationGrid
{
  /// Lattice cells between zero and span * |analytic bound| in each direction.
  int offset_cells = 40;
  double span = 1.5;
  int length_samples = 21;
  int duration_samples = 13;
  int n_steps = 16;
  /// Divergence is declared once |offset| > divergence_factor * b_x_max.
  double divergence_factor = 10.0;
};

enum class Survival
{
  Survives,
  Diverges
};

struct FrontierResult
{
  std::string direction;
  double analytic_bound = 0.0;
  /// Largest lattice offset such that it and every lattice offset closer to zero survive.
  double empirical_frontier = 0.0;
  /// Smallest diverging lattice offset (NaN when none diverges).
  double first_diverging = 0.0;
  double cell = 0.0;
  double gap = 0.0;
  std::vector<double> offsets;
  std::vector<Survival> classes;
};

struct CertificationReport
{
  CertificationGrid grid;
  std::vector<FrontierResult> frontiers;
  double max_gap = 0.0;
  /// Largest gap measured in lattice cells.
  double max_gap_cells = 0.0;
};

/** \brief Classify one sagittal start offset by searching the step policy lattice.
 *
 * Each step picks a length among `length_samples` values in [L_min, L_max] and a duration among
 * `duration_samples` values in [T_min, T_max]. The search keeps, at each depth, only the two children
 * closest to zero on either side; survival sets are intervals containing zero so no other child can
 * survive where these two fail.
 */
Survival classify_sagittal(double offset, const GaitBounds & bounds, const LipmParams & params, const CertificationGrid & grid);

/// Same as classify_sagittal for a lateral start offset with `stance` the current stance foot.
Survival classify_lateral(double offset,
                          Foot stance,
                          const GaitBounds & bounds,
                          const LipmParams & params,
                          const CertificationGrid & grid);

/// Brute-force check of the analytic bounds in both sagittal and both lateral (right stance) directions.
CertificationReport certify_bounds(const GaitBounds & bounds,
                                   const LipmParams & params,
                                   const CertificationGrid & grid = {},
                                   bool serial = false);

void to_json(nlohmann::json & j, const CertificationGrid & grid);
void to_json(nlohmann::json & j, const CertificationReport & report);

} // namespace steptime
