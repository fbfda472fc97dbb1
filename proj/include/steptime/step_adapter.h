#pragma once

#include <steptime/gait_nominal.h>
#include <steptime/lipm.h>
#include <steptime/qp_solver.h>
#include <steptime/viability.h>

#include <stdexcept>
#include <string>

namespace steptime
{

/// Weights of the stepping QP: landing location, timing, DCM offset and viability slack.
struct CostWeights
{
  double alpha1 = 1.0;
  double alpha2 = 5.0;
  double alpha3 = 1000.0;
  double alpha4 = 1e6;

  /// Throws std::invalid_argument for negative or non-finite weights.
  void validate() const;
};

/// A QP that did not reach Optimal. snapshot() holds the inputs that produced it.
class QpFailure : public std::runtime_error
{
public:
  QpFailure(const std::string & what, std::string snapshot) : std::runtime_error(what), snapshot_(std::move(snapshot)) {}

  const std::string & snapshot() const { return snapshot_; }

private:
  std::string snapshot_;
};

/// tau = e^{omega0 T}. Throws std::domain_error for T < 0.
double tau_from_timing(double T, const LipmParams & params);

/// T = ln(tau) / omega0. Throws std::domain_error for tau < 1.
double timing_from_tau(double tau, const LipmParams & params);

struct StepDecision
{
  /// Absolute landing position of the swing foot.
  Vec2 u_T = Vec2::Zero();
  /// Adapted duration of the current step, measured from its start.
  double T_adapt = 0.0;
  double tau = 1.0;
  /// End-of-step DCM offset relative to u_T.
  Vec2 b = Vec2::Zero();
  /// Slacks of the sagittal lower/upper and lateral lower/upper viability rows.
  Eigen::Vector4d psi = Eigen::Vector4d::Zero();
  QpStatus status = QpStatus::Optimal;
  bool viability_violated = false;
  /// Value of the stepping cost at the decision.
  double objective = 0.0;
};

struct StepAdapterOptions
{
  /// The adapted step never ends earlier than this long after the current time.
  double dt_floor = 0.001;
  /// |psi| above this flags a viability violation.
  double slack_epsilon = 1e-6;
};

/** \brief Stepping QP in the variables [du_x, du_y, tau, b_x, b_y, psi_1..psi_4].
 *
 * du is the landing displacement relative to the stance point. The cost is
 *   a1 |du - du_nom|^2 + a2 (tau - tau_nom)^2 + a3 |b - b_nom|^2 + a4 |psi|^2
 * and du + b = (xi - u0) e^{-w t} tau links the variables.
 */
QpProblem build_step_qp(const Vec2 & xi_mea,
                        const StanceInfo & stance,
                        const NominalGait & nominal,
                        const GaitBounds & bounds,
                        const ViabilityBounds & vbounds,
                        const CostWeights & weights,
                        const LipmParams & params,
                        const StepAdapterOptions & options = {});

/** \brief Next step location, timing and DCM offset for the current measurement.
 *
 * The slacks are first pinned to zero; the penalized problem of build_step_qp is solved only
 * when no landing point and timing keep the offset viable. Throws QpFailure when the QP is not
 * solved to optimality. A solver may be passed to reuse its working set between control cycles.
 */
StepDecision adapt_step(const Vec2 & xi_mea,
                        const StanceInfo & stance,
                        const NominalGait & nominal,
                        const GaitBounds & bounds,
                        const ViabilityBounds & vbounds,
                        const CostWeights & weights,
                        const LipmParams & params,
                        const StepAdapterOptions & options = {},
                        QpSolver * solver = nullptr);

/// Stateful wrapper holding the configuration and a warm-started solver.
class StepAdapter
{
public:
  StepAdapter(NominalGait nominal,
              GaitBounds bounds,
              CostWeights weights,
              LipmParams params,
              StepAdapterOptions options = {});

  StepDecision decide(const Vec2 & xi_mea, const StanceInfo & stance);

  const NominalGait & nominal() const { return nominal_; }
  const ViabilityBounds & viability() const { return vbounds_; }

private:
  NominalGait nominal_;
  GaitBounds bounds_;
  ViabilityBounds vbounds_;
  CostWeights weights_;
  LipmParams params_;
  StepAdapterOptions options_;
  QpSolver solver_;
};

} // namespace steptime
