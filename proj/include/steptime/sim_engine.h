#pragma once

#include <steptime/baselines.h>
#include <steptime/gait_nominal.h>
#include <steptime/lipm.h>
#include <steptime/step_adapter.h>
#include <steptime/swing_planner.h>
#include <steptime/viability.h>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace steptime
{

enum class ControllerKind
{
  Adaptive,
  FixedTiming,
  Preview
};

std::string to_string(ControllerKind kind);

/// Parses "adaptive", "fixed_timing" or "preview"; throws std::invalid_argument otherwise.
ControllerKind controller_from_string(const std::string & name);

/** \brief Constant force applied over [t_start, t_start + duration).
 *
 * With at_step_start set, the push instead begins at the start of the first step at or after
 * t_start whose stance foot is that foot.
 */
struct PushEvent
{
  double t_start = 0.0;
  double duration = 0.1;
  /// World-frame force [N].
  Vec2 force = Vec2::Zero();
  std::optional<Foot> at_step_start;
};

/// Force of magnitude `magnitude` at theta degrees counterclockwise from the direction of motion (+x at rest).
Vec2 push_force(double theta_deg, double magnitude, const Vec2 & v_des);

/// Instantaneous displacement of the stance contact point, a stand-in for foot slippage.
struct ContactDisplacementEvent
{
  double t_start = 0.0;
  Vec2 offset = Vec2::Zero();
};

struct InitialCondition
{
  Foot first_stance = Foot::Right;
  Vec2 stance_point = Vec2::Zero();
  /// Start on the periodic orbit of the controller's gait; otherwise use `state`.
  bool nominal = true;
  LipmState state;
};

struct SimOptions
{
  /// Re-plan the swing foot every cycle; sweeps switch it off since it does not affect the CoM.
  bool plan_swing = true;
  /// Test mode: the CoM only integrates the push accelerations and no steps are taken.
  bool freeze_pendulum = false;
  bool record_trace = true;
  /// Divergence once |xi - u0| exceeds this multiple of b_x_max.
  double divergence_factor = 10.0;
  /// A step is settled when |b - b_ref| <= recovery_tolerance * |b_ref|.
  double recovery_tolerance = 1.05;
  int recovery_steps = 3;
  /// Completed steps after the last disturbance required before recovery is judged.
  int min_post_steps = 10;
  /// End the run once recovery is established (or max_post_steps is reached) instead of at `duration`.
  bool stop_when_settled = false;
  int max_post_steps = 40;
};

struct ScenarioConfig
{
  std::string name = "scenario";
  LipmParams params;
  GaitBounds bounds;
  CostWeights weights;
  StepAdapterOptions adapter;
  PreviewConfig preview;
  Vec2 v_des = Vec2::Zero();
  ControllerKind controller = ControllerKind::Adaptive;
  double mass = 60.0;
  double control_period = 0.001;
  double duration = 10.0;
  std::vector<PushEvent> pushes;
  std::vector<ContactDisplacementEvent> displacements;
  InitialCondition initial;
  SimOptions sim;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// One control cycle, recorded before the LIPM is advanced.
struct TraceRow
{
  double t = 0.0;
  Vec2 com = Vec2::Zero();
  Vec2 com_vel = Vec2::Zero();
  Vec2 dcm = Vec2::Zero();
  Vec2 u0 = Vec2::Zero();
  int foot_index = 1;
  int step_index = 0;
  double step_elapsed = 0.0;
  Vec2 u_T = Vec2::Zero();
  double T_adapt = 0.0;
  Vec2 b = Vec2::Zero();
  double psi_norm = 0.0;
  Vec3 swing = Vec3::Zero();
  std::string status = "ok";
};

using TrajectoryRecord = std::vector<TraceRow>;

/// Column names of the trace CSV in TraceRow order.
const std::vector<std::string> & trace_columns();

struct StepRecord
{
  int index = 0;
  Foot foot = Foot::Right;
  double t_start = 0.0;
  double duration = 0.0;
  Vec2 u0 = Vec2::Zero();
  /// Landing point of the swing foot, which becomes the next stance point.
  Vec2 u_T = Vec2::Zero();
  /// DCM at touchdown minus u_T.
  Vec2 end_offset = Vec2::Zero();
  /// Nominal end-of-step offset of the controller for this stance foot.
  Vec2 reference_offset = Vec2::Zero();
  /// |swing foot position at touchdown - u_T| when the swing foot is planned.
  double touchdown_mismatch = 0.0;
  bool viability_violated = false;
};

enum class OutcomeKind
{
  Completed,
  Recovered,
  Diverged
};

std::string to_string(OutcomeKind kind);

struct Outcome
{
  OutcomeKind kind = OutcomeKind::Completed;
  /// Time of divergence, NaN when the threshold was never crossed.
  double t_diverged = 0.0;
  bool disturbed = false;
  /// Whether the last recovery_steps steps were settled (after enough post-disturbance steps).
  bool settled = false;
  int post_disturbance_steps = 0;
  int steps_at_T_min = 0;
  double max_offset = 0.0;
  std::string note;
};

struct RunResult
{
  TrajectoryRecord trace;
  std::vector<StepRecord> steps;
  Outcome outcome;
  NominalGait gait;
  ViabilityBounds viability;
};

/// A controller failure; carries the trace recorded up to the failure.
class SimulationError : public std::runtime_error
{
public:
  SimulationError(const std::string & what, RunResult partial) : std::runtime_error(what), partial_(std::move(partial)) {}

  const RunResult & partial() const { return partial_; }

private:
  RunResult partial_;
};

/// Stepping controller queried once per control cycle.
class Controller
{
public:
  virtual ~Controller() = default;
  virtual StepDecision decide(const LipmState & state, const StanceInfo & stance) = 0;
  /// Gait the controller regulates to; defines the reference offsets and the initial orbit.
  virtual const NominalGait & gait() const = 0;
};

std::unique_ptr<Controller> make_controller(const ScenarioConfig & scenario);

/** \brief Closed-loop simulation at a fixed control period.
 *
 * Within a cycle, the LIPM is propagated exactly and split at touchdowns and push boundaries,
 * so step durations and push windows are honoured to rounding. Throws SimulationError when the
 * controller fails.
 */
RunResult run(const ScenarioConfig & scenario);

enum class EnvelopeStatus
{
  Ok,
  /// Even a zero push did not recover.
  Unbracketed,
  /// No diverging force was found below max_force.
  Unbounded
};

std::string to_string(EnvelopeStatus status);

struct SweepOptions
{
  std::vector<double> thetas;
  double push_duration = 0.1;
  /// Bisection stops when the bracket is narrower than this [N].
  double tolerance = 1.0;
  double initial_force = 200.0;
  double max_force = 2e4;
  /// The push starts at the first left-stance step start at or after this time.
  double push_after = 1.0;
  bool serial = false;
};

struct EnvelopePoint
{
  double theta_deg = 0.0;
  double max_force = 0.0;
  double impulse = 0.0;
  /// Smallest force found to diverge.
  double diverged_force = 0.0;
  EnvelopeStatus status = EnvelopeStatus::Ok;
  bool non_monotone = false;
  int probes = 0;
};

/// Outcome of `base` with a single push of `force` N at theta for the sweep protocol.
bool push_recovered(const ScenarioConfig & base, double theta_deg, double force, const SweepOptions & options);

/** \brief Largest recoverable push per direction by bisection on the force magnitude.
 *
 * The lower bracket always recovered and the upper always diverged. After convergence a few
 * larger forces are probed; if one recovers, the search continues on the outer frontier and the
 * point is flagged non_monotone.
 */
std::vector<EnvelopePoint> sweep_push_envelope(const ScenarioConfig & base, const SweepOptions & options);

struct DisplacementSweepResult
{
  /// Largest displacement magnitude recovered, with every smaller lattice value also recovered.
  double max_recovered = 0.0;
  double first_failure = 0.0;
};

/// Steps the contact displacement along `direction` in increments of `resolution` until recovery fails.
DisplacementSweepResult sweep_contact_displacement(const ScenarioConfig & base,
                                                   const Vec2 & direction,
                                                   double t_event,
                                                   double resolution,
                                                   double max_magnitude);

} // namespace steptime
