#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace steptime
{

/** \brief Dense convex quadratic program.
 *
 *   min 1/2 x' H x + f' x
 *   s.t. A_eq x = b_eq
 *        lb <= A_in x <= ub
 *
 * Infinite entries of lb / ub disable that side of the row.
 */
struct QpProblem
{
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  static constexpr int max_variables = 128;

  /// Problem with n variables and no constraints; H and f are zero.
  static QpProblem with_variables(int n);

  int num_variables() const { return static_cast<int>(f.size()); }

  /// Append rows to the constraint sets.
  void add_equality(const Eigen::RowVectorXd & a, double b);
  void add_inequality(const Eigen::RowVectorXd & a, double lower, double upper);

  /// Throws std::invalid_argument on inconsistent sizes, an asymmetric or indefinite H, or NaN data.
  void validate() const;
};

enum class QpStatus
{
  Optimal,
  Infeasible,
  MaxIter
};

std::string to_string(QpStatus status);

/// One active inequality: row index and which side of the row is tight.
struct ActiveBound
{
  int row = 0;
  bool upper = false;

  bool operator==(const ActiveBound &) const = default;
};

struct QpSolution
{
  Eigen::VectorXd x;
  QpStatus status = QpStatus::MaxIter;
  /// Scaled max of stationarity, primal infeasibility and complementarity violations.
  double kkt_residual = 0.0;
  int iterations = 0;
  /// Multipliers with H x + f + A_eq' y_eq + A_in' y_in = 0; y_in >= 0 on upper, <= 0 on lower bounds.
  Eigen::VectorXd y_eq;
  Eigen::VectorXd y_in;
  std::vector<ActiveBound> active_set;
  /// Equality rows dropped as linearly dependent.
  std::vector<int> dropped_equalities;
  double objective = 0.0;
};

struct QpSettings
{
  /// Feasibility and multiplier sign tolerance of the iterations.
  double tol = 1e-8;
  /// A converged working set whose KKT residual exceeds this is reported as MaxIter.
  double certificate_tol = 1e-6;
  int max_iter = 200;
  /// Added to the diagonal of H so that rank-deficient costs have a unique minimizer.
  double regularization = 1e-10;
  /// Relative pivot below which a unit-norm equality row counts as dependent.
  double rank_threshold = 1e-12;
};

/** \brief Primal active-set solver for small dense convex QPs.
 *
 * Equality rows that are linearly dependent are detected with a column-pivoted QR and dropped.
 * A feasible starting point is found by a phase-one program minimizing the squared uniform
 * constraint violation. Each working-set subproblem is solved in the null space of the active rows.
 *
 * An instance keeps the last working set and solution; solve_warm() starts from them.
 * Instances are not thread-safe.
 */
class QpSolver
{
public:
  explicit QpSolver(QpSettings settings = {}) : settings_(settings) {}

  QpSolution solve(const QpProblem & problem);

  /// Solve starting from a working-set hint (and a starting point when it is feasible).
  QpSolution solve(const QpProblem & problem, const std::vector<ActiveBound> & hint, const Eigen::VectorXd * x0 = nullptr);

  /// Solve using the previous solution of this instance as the hint.
  QpSolution solve_warm(const QpProblem & problem);

  const QpSettings & settings() const { return settings_; }
  QpSettings & settings() { return settings_; }

private:
  QpSettings settings_;
  std::vector<ActiveBound> last_active_;
  Eigen::VectorXd last_x_;
};

} // namespace steptime
