#include <steptime/swing_planner.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace steptime
{

namespace
{

using Row10 = Eigen::Matrix<double, 1, 10>;
using Basis = Eigen::Matrix<double, 4, 10>;

// Chebyshev polynomials T_i(2s - 1) and their first three derivatives with respect to s.
Basis chebyshev(double s)
{
  const double x = 2.0 * s - 1.0;
  Basis B = Basis::Zero();
  B(0, 0) = 1.0;
  B(0, 1) = x;
  B(1, 1) = 1.0;
  for(int n = 1; n < 9; ++n)
  {
    B(0, n + 1) = 2.0 * x * B(0, n) - B(0, n - 1);
    B(1, n + 1) = 2.0 * B(0, n) + 2.0 * x * B(1, n) - B(1, n - 1);
    B(2, n + 1) = 4.0 * B(1, n) + 2.0 * x * B(2, n) - B(2, n - 1);
    B(3, n + 1) = 6.0 * B(2, n) + 2.0 * x * B(3, n) - B(3, n - 1);
  }
  // d/ds = 2 d/dx
  B.row(1) *= 2.0;
  B.row(2) *= 4.0;
  B.row(3) *= 8.0;
  return B;
}

// Gram matrix of the third derivatives over [0, 1]; 7-point Gauss-Legendre is exact for degree 12.
const Eigen::Matrix<double, 10, 10> & jerk_gram()
{
  static const Eigen::Matrix<double, 10, 10> G = [] {
    constexpr double nodes[7] = {-0.9491079123427585, -0.7415311855993945, -0.4058451513773972, 0.0,
                                 0.4058451513773972,  0.7415311855993945,  0.9491079123427585};
    constexpr double weights[7] = {0.1294849661688697, 0.2797053914892766, 0.3818300505051189, 0.4179591836734694,
                                   0.3818300505051189, 0.2797053914892766, 0.1294849661688697};
    Eigen::Matrix<double, 10, 10> g = Eigen::Matrix<double, 10, 10>::Zero();
    for(int i = 0; i < 7; ++i)
    {
      const Row10 j = chebyshev(0.5 * (nodes[i] + 1.0)).row(3);
      g += 0.5 * weights[i] * j.transpose() * j;
    }
    return g;
  }();
  return G;
}

Row10 basis(double s, int k)
{
  return chebyshev(s).row(k);
}

// Horner evaluation of a monomial-basis polynomial and its first two derivatives in the normalized variable.
template<int N>
Eigen::Vector3d horner(const Eigen::Matrix<double, N, 1> & c, double s)
{
  double p = c(N - 1);
  double dp = 0.0;
  double ddp = 0.0;
  for(int i = N - 2; i >= 0; --i)
  {
    ddp = ddp * s + 2.0 * dp;
    dp = dp * s + p;
    p = p * s + c(i);
  }
  return {p, dp, ddp};
}

Eigen::Matrix<double, 6, 1> quintic(double p0, double v0, double a0, double pf, double D)
{
  Eigen::Matrix<double, 6, 1> c;
  c(0) = p0;
  c(1) = v0 * D;
  c(2) = 0.5 * a0 * D * D;
  const double A = pf - c(0) - c(1) - c(2);
  const double B = -c(1) - 2.0 * c(2);
  const double C = -2.0 * c(2);
  c(3) = 10.0 * A - 4.0 * B + 0.5 * C;
  c(4) = -15.0 * A + 7.0 * B - C;
  c(5) = 6.0 * A - 3.0 * B + 0.5 * C;
  return c;
}

QpSettings vertical_settings()
{
  QpSettings settings;
  // rows pinned a few control periods apart are nearly, but not exactly, dependent
  settings.rank_threshold = 1e-14;
  // dense clearance grids can activate many rows one at a time
  settings.max_iter = 2000;
  return settings;
}

void check_window(double t_now, double T_new, double control_period)
{
  if(!(t_now >= 0.0) || !(t_now < T_new))
  {
    throw std::domain_error("swing re-plan requires 0 <= t_now < T");
  }
  if(T_new - t_now < control_period)
  {
    throw InfeasibleWindow("swing re-plan within one control period of touchdown");
  }
}

} // namespace

SwingPlan rest_plan(const Vec2 & position, double T)
{
  if(!(T > 0.0))
  {
    throw std::invalid_argument("rest_plan: T must be positive");
  }
  SwingPlan plan;
  plan.T = T;
  plan.T_z = T;
  plan.c_x(0) = position.x();
  plan.c_y(0) = position.y();
  plan.k_state.position << position.x(), position.y(), 0.0;
  return plan;
}

SwingSample evaluate(const SwingPlan & plan, double t)
{
  constexpr double slack = 1e-12;
  if(!(t >= -slack) || !(t <= plan.T + slack))
  {
    throw std::domain_error("evaluate: t outside [0, T]");
  }
  SwingSample out;
  const double Dz = plan.T_z - plan.t_z;
  const Eigen::Vector4d z = chebyshev(std::min((t - plan.t_z) / Dz, 1.0)) * plan.c_z;
  out.position.z() = z(0);
  out.velocity.z() = z(1) / Dz;
  out.acceleration.z() = z(2) / (Dz * Dz);

  const double D = plan.T - plan.t_start;
  const double r = (t - plan.t_start) / D;
  const Eigen::Vector3d x = horner<6>(plan.c_x, r);
  const Eigen::Vector3d y = horner<6>(plan.c_y, r);
  out.position.head<2>() << x(0), y(0);
  out.velocity.head<2>() << x(1) / D, y(1) / D;
  out.acceleration.head<2>() << x(2) / (D * D), y(2) / (D * D);
  return out;
}

SwingPlan replan_vertical(const SwingPlan & prev,
                          double t_now,
                          double T_new,
                          const VerticalOptions & options,
                          QpSolver * solver)
{
  check_window(t_now, T_new, options.control_period);
  if(prev.height_planned && prev.T_z == T_new)
  {
    // the previous optimum is still feasible and optimal for the same touchdown time
    SwingPlan plan = prev;
    plan.T = T_new;
    plan.t_k = t_now;
    return plan;
  }
  const SwingSample here = evaluate(prev, std::min(t_now, prev.T));
  const double D = T_new - t_now;
  auto r_of = [&](double t) { return (t - t_now) / D; };

  QpProblem p = QpProblem::with_variables(10);
  const double r_mid = r_of(0.5 * T_new);
  if(r_mid >= 0.0)
  {
    const Row10 mid = basis(r_mid, 0);
    p.H = mid.transpose() * mid;
    p.f = -options.z_des * mid.transpose();
  }
  // a light jerk penalty fixes the directions the apex term leaves free
  p.H += options.jerk_weight * jerk_gram();
  // derivatives with respect to r are time derivatives scaled by D^k
  p.add_equality(basis(0.0, 0), here.position.z());
  p.add_equality(basis(0.0, 1), here.velocity.z() * D);
  p.add_equality(basis(0.0, 2), here.acceleration.z() * D * D);
  for(int k = 0; k < 3; ++k)
  {
    p.add_equality(basis(1.0, k), 0.0);
  }
  const int n_eq = static_cast<int>(p.A_eq.rows());

  // clearance rows; the margin keeps the foot inside [0, z_max] between samples and vanishes at both window ends
  auto with_clearance = [&](double floor, int dense) {
    QpProblem q = p;
    auto add = [&](double r) {
      const double w = r * (1.0 - r);
      const double margin = 64.0 * floor * w * w * w;
      q.add_inequality(basis(r, 0), margin, options.z_max - margin);
    };
    for(int i = 1; i < options.samples; ++i)
    {
      add(static_cast<double>(i) / options.samples);
    }
    // control instants right after t_now, where a sharp turnaround would slip between the uniform samples
    const double r_step = options.control_period / D;
    for(int k = 1; k <= dense && k * r_step < 1.0; ++k)
    {
      add(k * r_step);
    }
    // touchdown from above: z ~ c (1 - r)^3 near the end with c >= 0
    q.add_inequality(basis(1.0, 3), -std::numeric_limits<double>::infinity(), 0.0);
    return q;
  };

  QpSolver local(vertical_settings());
  QpSolver & qp = solver != nullptr ? *solver : local;
  SwingPlan plan = prev;
  plan.clearance_relaxed = false;
  // progressively thinner margins with denser early samples
  QpSolution sol = qp.solve(with_clearance(options.min_clearance, 10));
  for(double floor : {0.1 * options.min_clearance, 0.0})
  {
    if(sol.status != QpStatus::Infeasible)
    {
      break;
    }
    sol = qp.solve(with_clearance(floor, std::numeric_limits<int>::max()));
  }
  if(sol.status == QpStatus::Infeasible)
  {
    // keep the continuity rows and let the clearance go
    sol = qp.solve(p);
    plan.clearance_relaxed = true;
  }
  if(sol.status != QpStatus::Optimal)
  {
    std::ostringstream oss;
    oss << "swing height QP failed (" << to_string(sol.status) << ") at t=" << t_now << " T=" << T_new
        << " with " << n_eq << " equality rows";
    throw std::runtime_error(oss.str());
  }
  plan.T = T_new;
  plan.T_z = T_new;
  plan.t_z = t_now;
  plan.height_planned = true;
  plan.c_z = sol.x;
  plan.t_k = t_now;
  plan.k_state.position.z() = here.position.z();
  plan.k_state.velocity.z() = here.velocity.z();
  plan.k_state.acceleration.z() = here.acceleration.z();
  return plan;
}

SwingPlan replan_horizontal(const SwingPlan & prev, double t_now, double T_new, const Vec2 & target, double control_period)
{
  check_window(t_now, T_new, control_period);
  const SwingSample here = evaluate(prev, std::min(t_now, prev.T));
  SwingPlan plan = prev;
  const double D = T_new - t_now;
  plan.c_x = quintic(here.position.x(), here.velocity.x(), here.acceleration.x(), target.x(), D);
  plan.c_y = quintic(here.position.y(), here.velocity.y(), here.acceleration.y(), target.y(), D);
  plan.t_start = t_now;
  plan.t_k = t_now;
  plan.k_state.position.head<2>() = here.position.head<2>();
  plan.k_state.velocity.head<2>() = here.velocity.head<2>();
  plan.k_state.acceleration.head<2>() = here.acceleration.head<2>();
  plan.T = T_new;
  return plan;
}

SwingPlanner::SwingPlanner(VerticalOptions options) : options_(options), solver_(vertical_settings()) {}

void SwingPlanner::start(const Vec2 & lift_off, const Vec2 & target, double T)
{
  plan_ = rest_plan(lift_off, T);
  update(0.0, T, target);
}

bool SwingPlanner::update(double t_now, double T, const Vec2 & target)
{
  if(T - t_now < options_.control_period)
  {
    return false;
  }
  SwingPlan next = replan_horizontal(plan_, t_now, T, target, options_.control_period);
  next = replan_vertical(next, t_now, T, options_, &solver_);
  plan_ = next;
  return true;
}

SwingSample SwingPlanner::sample(double t) const
{
  return evaluate(plan_, std::clamp(t, 0.0, plan_.T));
}

} // namespace steptime
