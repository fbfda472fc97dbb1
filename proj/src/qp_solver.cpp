#include <steptime/qp_solver.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace steptime
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace
{

constexpr double inf = std::numeric_limits<double>::infinity();

double inf_norm(const VectorXd & v)
{
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

/// Equality rows E x = e (independent) plus inequality rows lb <= A x <= ub.
struct Core
{
  MatrixXd H;
  VectorXd f;
  MatrixXd E;
  VectorXd e;
  MatrixXd A;
  VectorXd lb;
  VectorXd ub;
};

MatrixXd working_matrix(const Core & c, const std::vector<ActiveBound> & W)
{
  MatrixXd AW(c.E.rows() + static_cast<Eigen::Index>(W.size()), c.H.rows());
  AW.topRows(c.E.rows()) = c.E;
  for(std::size_t k = 0; k < W.size(); ++k)
  {
    AW.row(c.E.rows() + static_cast<Eigen::Index>(k)) = c.A.row(W[k].row);
  }
  return AW;
}

VectorXd working_rhs(const Core & c, const std::vector<ActiveBound> & W)
{
  VectorXd b(c.E.rows() + static_cast<Eigen::Index>(W.size()));
  b.head(c.E.rows()) = c.e;
  for(std::size_t k = 0; k < W.size(); ++k)
  {
    b(c.E.rows() + static_cast<Eigen::Index>(k)) = W[k].upper ? c.ub(W[k].row) : c.lb(W[k].row);
  }
  return b;
}

int row_rank(const MatrixXd & rows, double threshold)
{
  if(rows.rows() == 0)
  {
    return 0;
  }
  MatrixXd scaled = rows;
  for(Eigen::Index i = 0; i < scaled.rows(); ++i)
  {
    const double nrm = scaled.row(i).norm();
    if(nrm > 0.0)
    {
      scaled.row(i) /= nrm;
    }
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(scaled.transpose());
  qr.setThreshold(threshold);
  return static_cast<int>(qr.rank());
}

/// Minimizer of the quadratic restricted to {x : AW x = bW}; AW must have full row rank.
VectorXd solve_eqp(const MatrixXd & H, const VectorXd & f, const MatrixXd & AW, const VectorXd & bW)
{
  const Eigen::Index n = H.rows();
  const Eigen::Index m = AW.rows();
  VectorXd xp = VectorXd::Zero(n);
  MatrixXd Z;
  if(m == 0)
  {
    Z = MatrixXd::Identity(n, n);
  }
  else
  {
    Eigen::HouseholderQR<MatrixXd> qr(AW.transpose());
    const MatrixXd Q = qr.householderQ();
    const auto R = qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
    // AW' = Q1 R  =>  AW = R' Q1',  x_p = Q1 R^{-T} b
    const VectorXd w = R.transpose().solve(bW);
    xp = Q.leftCols(m) * w;
    Z = Q.rightCols(n - m);
  }
  if(Z.cols() == 0)
  {
    return xp;
  }
  const MatrixXd Hr = Z.transpose() * H * Z;
  const VectorXd gr = Z.transpose() * (H * xp + f);
  return xp - Z * Hr.ldlt().solve(gr);
}

double max_violation(const Core & c, const VectorXd & x)
{
  double v = 0.0;
  if(c.A.rows() > 0)
  {
    const VectorXd ax = c.A * x;
    for(Eigen::Index i = 0; i < ax.size(); ++i)
    {
      v = std::max({v, c.lb(i) - ax(i), ax(i) - c.ub(i)});
    }
  }
  if(c.E.rows() > 0)
  {
    v = std::max(v, inf_norm(c.E * x - c.e));
  }
  return v;
}

/** \brief Primal active-set iterations from a feasible x with working set W.
 *
 * Returns the multipliers of the final working set (equalities first) in lambda.
 */
QpStatus iterate(const Core & c,
                 VectorXd & x,
                 std::vector<ActiveBound> & W,
                 VectorXd & lambda,
                 double tol,
                 int max_iter,
                 int & iterations)
{
  const Eigen::Index n = c.H.rows();
  const Eigen::Index me = c.E.rows();
  std::vector<char> in_working(static_cast<std::size_t>(c.A.rows()), 0);
  for(const auto & w : W)
  {
    in_working[static_cast<std::size_t>(w.row)] = 1;
  }

  bool at_subproblem_min = false;
  while(iterations < max_iter)
  {
    ++iterations;
    const MatrixXd AW = working_matrix(c, W);
    const Eigen::Index mw = AW.rows();
    const VectorXd g = c.H * x + c.f;

    Eigen::HouseholderQR<MatrixXd> qr;
    MatrixXd Q;
    if(mw > 0)
    {
      qr.compute(AW.transpose());
      Q = qr.householderQ();
    }

    VectorXd p = VectorXd::Zero(n);
    if(!at_subproblem_min && n - mw > 0)
    {
      const MatrixXd Z = mw > 0 ? MatrixXd(Q.rightCols(n - mw)) : MatrixXd(MatrixXd::Identity(n, n));
      const MatrixXd Hr = Z.transpose() * c.H * Z;
      p = -Z * Hr.ldlt().solve(Z.transpose() * g);
    }

    if(at_subproblem_min || inf_norm(p) <= 1e-13 * (1.0 + inf_norm(x)))
    {
      // multipliers from AW' lambda = -g
      lambda = VectorXd::Zero(mw);
      if(mw > 0)
      {
        const auto R = qr.matrixQR().topLeftCorner(mw, mw).triangularView<Eigen::Upper>();
        lambda = R.solve(-(Q.leftCols(mw).transpose() * g));
      }
      const double dual_tol = tol * std::max(1.0, inf_norm(g));
      Eigen::Index worst = -1;
      double worst_value = -dual_tol;
      for(std::size_t k = 0; k < W.size(); ++k)
      {
        const double l = lambda(me + static_cast<Eigen::Index>(k));
        const double signed_l = W[k].upper ? l : -l;
        if(signed_l < worst_value)
        {
          worst_value = signed_l;
          worst = static_cast<Eigen::Index>(k);
        }
      }
      if(worst < 0)
      {
        return QpStatus::Optimal;
      }
      in_working[static_cast<std::size_t>(W[static_cast<std::size_t>(worst)].row)] = 0;
      W.erase(W.begin() + worst);
      at_subproblem_min = false;
      continue;
    }

    // ratio test over rows outside the working set
    double alpha = 1.0;
    int blocking = -1;
    bool blocking_upper = false;
    const double pnorm = p.norm();
    for(Eigen::Index i = 0; i < c.A.rows(); ++i)
    {
      if(in_working[static_cast<std::size_t>(i)])
      {
        continue;
      }
      const double ap = c.A.row(i).dot(p);
      if(std::abs(ap) <= 1e-12 * c.A.row(i).norm() * pnorm)
      {
        continue;
      }
      const double ax = c.A.row(i).dot(x);
      double a_i = inf;
      bool upper = false;
      if(ap > 0.0 && std::isfinite(c.ub(i)))
      {
        a_i = std::max(0.0, (c.ub(i) - ax) / ap);
        upper = true;
      }
      else if(ap < 0.0 && std::isfinite(c.lb(i)))
      {
        a_i = std::max(0.0, (c.lb(i) - ax) / ap);
      }
      if(a_i < alpha)
      {
        alpha = a_i;
        blocking = static_cast<int>(i);
        blocking_upper = upper;
      }
    }

    x += alpha * p;
    if(blocking >= 0)
    {
      W.push_back({blocking, blocking_upper});
      in_working[static_cast<std::size_t>(blocking)] = 1;
      at_subproblem_min = false;
    }
    else
    {
      at_subproblem_min = true;
    }
  }
  return QpStatus::MaxIter;
}

/// Keeps the entries of `candidates` that are tight at x and independent of the rows already present.
std::vector<ActiveBound> filter_working_set(const Core & c,
                                            const VectorXd & x,
                                            const std::vector<ActiveBound> & candidates,
                                            double tol,
                                            double rank_threshold,
                                            bool require_tight)
{
  std::vector<ActiveBound> W;
  int rank = row_rank(c.E, rank_threshold);
  std::vector<char> used(static_cast<std::size_t>(c.A.rows()), 0);
  for(const auto & cand : candidates)
  {
    if(cand.row < 0 || cand.row >= c.A.rows() || used[static_cast<std::size_t>(cand.row)])
    {
      continue;
    }
    const double bound = cand.upper ? c.ub(cand.row) : c.lb(cand.row);
    if(!std::isfinite(bound))
    {
      continue;
    }
    if(require_tight && std::abs(c.A.row(cand.row).dot(x) - bound) > tol * std::max(1.0, std::abs(bound)))
    {
      continue;
    }
    W.push_back(cand);
    const int r = row_rank(working_matrix(c, W), rank_threshold);
    if(r <= rank)
    {
      W.pop_back();
      continue;
    }
    rank = r;
    used[static_cast<std::size_t>(cand.row)] = 1;
  }
  return W;
}

/// Phase one: min 1/2 t^2 s.t. E x = e, lb - t <= A x <= ub + t. Returns the final t.
double find_feasible(const Core & c,
                     const VectorXd & x_start,
                     double regularization,
                     double tol,
                     int max_iter,
                     int & iterations,
                     VectorXd & x_out,
                     std::vector<ActiveBound> & active_out)
{
  const Eigen::Index n = c.H.rows();
  Core p;
  p.H = MatrixXd::Identity(n + 1, n + 1) * regularization;
  p.H(n, n) = 1.0;
  p.f = VectorXd::Zero(n + 1);
  p.E = MatrixXd::Zero(c.E.rows(), n + 1);
  p.E.leftCols(n) = c.E;
  p.e = c.e;

  std::vector<std::pair<int, bool>> origin; // phase-one row -> (original row, upper side)
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> lbs;
  std::vector<double> ubs;
  for(Eigen::Index i = 0; i < c.A.rows(); ++i)
  {
    Eigen::RowVectorXd r(n + 1);
    r.head(n) = c.A.row(i);
    if(std::isfinite(c.lb(i)))
    {
      r(n) = 1.0;
      rows.push_back(r);
      lbs.push_back(c.lb(i));
      ubs.push_back(inf);
      origin.emplace_back(static_cast<int>(i), false);
    }
    if(std::isfinite(c.ub(i)))
    {
      r(n) = -1.0;
      rows.push_back(r);
      lbs.push_back(-inf);
      ubs.push_back(c.ub(i));
      origin.emplace_back(static_cast<int>(i), true);
    }
  }
  p.A.resize(static_cast<Eigen::Index>(rows.size()), n + 1);
  p.lb.resize(static_cast<Eigen::Index>(rows.size()));
  p.ub.resize(static_cast<Eigen::Index>(rows.size()));
  for(std::size_t k = 0; k < rows.size(); ++k)
  {
    p.A.row(static_cast<Eigen::Index>(k)) = rows[k];
    p.lb(static_cast<Eigen::Index>(k)) = lbs[k];
    p.ub(static_cast<Eigen::Index>(k)) = ubs[k];
  }

  VectorXd z(n + 1);
  z.head(n) = x_start;
  z(n) = max_violation(c, x_start) + 1.0;

  std::vector<ActiveBound> W;
  VectorXd lambda;
  iterate(p, z, W, lambda, tol, max_iter, iterations);

  x_out = z.head(n);
  active_out.clear();
  for(const auto & w : W)
  {
    active_out.push_back({origin[static_cast<std::size_t>(w.row)].first, origin[static_cast<std::size_t>(w.row)].second});
  }
  return z(n);
}

} // namespace

QpProblem QpProblem::with_variables(int n)
{
  QpProblem p;
  p.H = MatrixXd::Zero(n, n);
  p.f = VectorXd::Zero(n);
  p.A_eq.resize(0, n);
  p.b_eq.resize(0);
  p.A_in.resize(0, n);
  p.lb.resize(0);
  p.ub.resize(0);
  return p;
}

void QpProblem::add_equality(const Eigen::RowVectorXd & a, double b)
{
  A_eq.conservativeResize(A_eq.rows() + 1, Eigen::NoChange);
  A_eq.bottomRows(1) = a;
  b_eq.conservativeResize(b_eq.size() + 1);
  b_eq(b_eq.size() - 1) = b;
}

void QpProblem::add_inequality(const Eigen::RowVectorXd & a, double lower, double upper)
{
  A_in.conservativeResize(A_in.rows() + 1, Eigen::NoChange);
  A_in.bottomRows(1) = a;
  lb.conservativeResize(lb.size() + 1);
  ub.conservativeResize(ub.size() + 1);
  lb(lb.size() - 1) = lower;
  ub(ub.size() - 1) = upper;
}

void QpProblem::validate() const
{
  auto fail = [](const std::string & msg) { throw std::invalid_argument("QpProblem: " + msg); };
  const Eigen::Index n = f.size();
  if(n == 0 || n > max_variables)
  {
    fail("variable count must be in [1, 128]");
  }
  if(H.rows() != n || H.cols() != n)
  {
    fail("H must be n x n");
  }
  if(A_eq.cols() != n || A_eq.rows() != b_eq.size())
  {
    fail("equality block has inconsistent sizes");
  }
  if(A_in.cols() != n || A_in.rows() != lb.size() || A_in.rows() != ub.size())
  {
    fail("inequality block has inconsistent sizes");
  }
  if(!H.allFinite() || !f.allFinite() || !A_eq.allFinite() || !b_eq.allFinite() || !A_in.allFinite())
  {
    fail("non-finite problem data");
  }
  if(lb.hasNaN() || ub.hasNaN())
  {
    fail("NaN bound");
  }
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
  {
    fail("H is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(H, Eigen::EigenvaluesOnly);
  if(es.eigenvalues().minCoeff() < -1e-9 * scale)
  {
    fail("H is not positive semidefinite");
  }
}

std::string to_string(QpStatus status)
{
  switch(status)
  {
    case QpStatus::Optimal:
      return "optimal";
    case QpStatus::Infeasible:
      return "infeasible";
    case QpStatus::MaxIter:
      return "max_iter";
  }
  return "unknown";
}

QpSolution QpSolver::solve(const QpProblem & problem)
{
  return solve(problem, {}, nullptr);
}

QpSolution QpSolver::solve_warm(const QpProblem & problem)
{
  if(last_x_.size() != problem.num_variables())
  {
    return solve(problem, {}, nullptr);
  }
  const VectorXd x0 = last_x_;
  const auto hint = last_active_;
  return solve(problem, hint, &x0);
}

QpSolution QpSolver::solve(const QpProblem & problem, const std::vector<ActiveBound> & hint, const VectorXd * x0)
{
  problem.validate();
  const double tol = settings_.tol;
  const Eigen::Index n = problem.num_variables();

  QpSolution sol;
  sol.y_eq = VectorXd::Zero(problem.A_eq.rows());
  sol.y_in = VectorXd::Zero(problem.A_in.rows());

  Core c;
  c.H = 0.5 * (problem.H + problem.H.transpose());
  c.H.diagonal().array() += settings_.regularization;
  c.f = problem.f;
  c.A = problem.A_in;
  c.lb = problem.lb;
  c.ub = problem.ub;

  // rows with lb == ub join the equality block
  std::vector<Eigen::Index> pinned_rows;
  for(Eigen::Index i = 0; i < c.A.rows(); ++i)
  {
    if(c.lb(i) > c.ub(i))
    {
      sol.status = QpStatus::Infeasible;
      sol.x = VectorXd::Zero(n);
      return sol;
    }
    if(c.lb(i) == c.ub(i))
    {
      pinned_rows.push_back(i);
    }
  }
  MatrixXd E_all(problem.A_eq.rows() + static_cast<Eigen::Index>(pinned_rows.size()), n);
  VectorXd e_all(E_all.rows());
  E_all.topRows(problem.A_eq.rows()) = problem.A_eq;
  e_all.head(problem.A_eq.rows()) = problem.b_eq;
  for(std::size_t k = 0; k < pinned_rows.size(); ++k)
  {
    const auto r = problem.A_eq.rows() + static_cast<Eigen::Index>(k);
    E_all.row(r) = c.A.row(pinned_rows[k]);
    e_all(r) = c.lb(pinned_rows[k]);
    c.lb(pinned_rows[k]) = -inf;
    c.ub(pinned_rows[k]) = inf;
  }

  // unit-norm rows so that the rank test only sees the geometry of the constraints
  VectorXd row_norms(E_all.rows());
  for(Eigen::Index r = 0; r < E_all.rows(); ++r)
  {
    row_norms(r) = E_all.row(r).norm();
    if(row_norms(r) == 0.0)
    {
      if(std::abs(e_all(r)) > tol)
      {
        sol.status = QpStatus::Infeasible;
        sol.x = VectorXd::Zero(n);
        return sol;
      }
      row_norms(r) = 1.0;
    }
    E_all.row(r) /= row_norms(r);
    e_all(r) /= row_norms(r);
  }

  // drop dependent equality rows; keep the original order of the survivors
  std::vector<Eigen::Index> kept;
  if(E_all.rows() > 0)
  {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(E_all.transpose());
    qr.setThreshold(settings_.rank_threshold);
    const auto rank = qr.rank();
    for(Eigen::Index k = 0; k < rank; ++k)
    {
      kept.push_back(qr.colsPermutation().indices()(k));
    }
    std::sort(kept.begin(), kept.end());
    for(Eigen::Index r = 0; r < E_all.rows(); ++r)
    {
      if(std::find(kept.begin(), kept.end(), r) == kept.end() && r < problem.A_eq.rows())
      {
        sol.dropped_equalities.push_back(static_cast<int>(r));
      }
    }
  }
  c.E.resize(static_cast<Eigen::Index>(kept.size()), n);
  c.e.resize(static_cast<Eigen::Index>(kept.size()));
  for(std::size_t k = 0; k < kept.size(); ++k)
  {
    c.E.row(static_cast<Eigen::Index>(k)) = E_all.row(kept[k]);
    c.e(static_cast<Eigen::Index>(k)) = e_all(kept[k]);
  }

  const double eq_scale = std::max(1.0, inf_norm(e_all));
  VectorXd x = solve_eqp(MatrixXd::Identity(n, n), VectorXd::Zero(n), c.E, c.e);
  if(E_all.rows() > 0 && inf_norm(E_all * x - e_all) > tol * eq_scale * 10.0)
  {
    sol.status = QpStatus::Infeasible;
    sol.x = x;
    return sol;
  }

  std::vector<ActiveBound> W;
  bool have_start = false;
  if(x0 != nullptr && x0->size() == n && max_violation(c, *x0) <= tol * eq_scale)
  {
    x = *x0;
    W = filter_working_set(c, x, hint, tol, settings_.rank_threshold, true);
    have_start = true;
  }
  if(!have_start && !hint.empty())
  {
    auto Wh = filter_working_set(c, x, hint, tol, settings_.rank_threshold, false);
    const VectorXd xh = solve_eqp(c.H, c.f, working_matrix(c, Wh), working_rhs(c, Wh));
    if(max_violation(c, xh) <= tol * eq_scale)
    {
      x = xh;
      W = std::move(Wh);
      have_start = true;
    }
  }
  int iterations = 0;
  if(!have_start && max_violation(c, x) > tol * eq_scale)
  {
    std::vector<ActiveBound> phase_one_active;
    VectorXd xf;
    const double t = find_feasible(c, x, settings_.regularization, tol, settings_.max_iter, iterations, xf,
                                   phase_one_active);
    if(t > tol * eq_scale || max_violation(c, xf) > tol * eq_scale)
    {
      sol.status = iterations >= settings_.max_iter ? QpStatus::MaxIter : QpStatus::Infeasible;
      sol.x = xf;
      sol.iterations = iterations;
      return sol;
    }
    x = xf;
    W = filter_working_set(c, x, phase_one_active, tol, settings_.rank_threshold, true);
  }

  VectorXd lambda;
  sol.status = iterate(c, x, W, lambda, tol, settings_.max_iter + iterations, iterations);
  sol.iterations = iterations;
  sol.x = x;
  sol.active_set = W;

  if(sol.status == QpStatus::Optimal)
  {
    const Eigen::Index me = c.E.rows();
    for(std::size_t k = 0; k < kept.size(); ++k)
    {
      const Eigen::Index r = kept[k];
      const double l = lambda(static_cast<Eigen::Index>(k)) / row_norms(r);
      if(r < problem.A_eq.rows())
      {
        sol.y_eq(r) = l;
      }
      else
      {
        sol.y_in(pinned_rows[static_cast<std::size_t>(r - problem.A_eq.rows())]) = l;
      }
    }
    for(std::size_t k = 0; k < W.size(); ++k)
    {
      sol.y_in(W[k].row) = lambda(me + static_cast<Eigen::Index>(k));
    }

    // residuals of the regularized problem
    const VectorXd hx = c.H * x;
    const VectorXd stat = hx + c.f + problem.A_eq.transpose() * sol.y_eq + problem.A_in.transpose() * sol.y_in;
    const double stat_scale = std::max({1.0, inf_norm(hx), inf_norm(c.f)});
    double primal = problem.A_eq.rows() > 0 ? inf_norm(problem.A_eq * x - problem.b_eq) : 0.0;
    double comp = 0.0;
    if(problem.A_in.rows() > 0)
    {
      const VectorXd ax = problem.A_in * x;
      for(Eigen::Index i = 0; i < ax.size(); ++i)
      {
        primal = std::max({primal, problem.lb(i) - ax(i), ax(i) - problem.ub(i)});
        const double y = sol.y_in(i);
        const double slack = y > 0.0 ? problem.ub(i) - ax(i) : (y < 0.0 ? ax(i) - problem.lb(i) : 0.0);
        if(std::isfinite(slack))
        {
          comp = std::max(comp, std::abs(y) * std::abs(slack));
        }
        else if(std::abs(y) > tol)
        {
          comp = std::numeric_limits<double>::infinity();
        }
      }
    }
    sol.kkt_residual = std::max({inf_norm(stat) / stat_scale, primal / eq_scale, comp / stat_scale});
    if(sol.kkt_residual > settings_.certificate_tol)
    {
      // the working set converged but the certificate does not hold
      sol.status = QpStatus::MaxIter;
    }
  }
  sol.objective = 0.5 * x.dot(problem.H * x) + problem.f.dot(x);

  last_x_ = sol.x;
  last_active_ = sol.active_set;
  return sol;
}

} // namespace steptime
