#include <steptime/cli.h>
#include <steptime/scenario_io.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace steptime
{

namespace
{

namespace fs = std::filesystem;

struct CommonArgs
{
  std::string scenario;
  std::string out;
  std::vector<std::string> overrides;
};

fs::path output_dir(const CommonArgs & args)
{
  fs::path dir = args.out;
  if(dir.empty())
  {
    const char * env = std::getenv("STEPTIME_OUT_DIR");
    dir = env != nullptr && *env != '\0' ? fs::path(env) : fs::current_path();
  }
  fs::create_directories(dir);
  return dir;
}

/// A path, or the name of a bundled scenario.
fs::path resolve_scenario(const std::string & name)
{
  const fs::path p(name);
  if(fs::exists(p))
  {
    return p;
  }
  const fs::path bundled = fs::path(STEPTIME_SCENARIO_DIR) / (name + ".yaml");
  if(fs::exists(bundled))
  {
    return bundled;
  }
  throw std::runtime_error("scenario not found: " + name);
}

ScenarioConfig load(const CommonArgs & args)
{
  if(args.scenario.empty())
  {
    return parse_scenario("", args.overrides);
  }
  return load_scenario(resolve_scenario(args.scenario), args.overrides);
}

/// "a,b,c" or "start:step:stop" (inclusive).
std::vector<double> parse_thetas(const std::string & text)
{
  std::vector<double> out;
  if(text.find(':') != std::string::npos)
  {
    std::stringstream ss(text);
    std::string a, b, c;
    if(!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
    {
      throw std::invalid_argument("--thetas: expected start:step:stop");
    }
    const double start = std::stod(a);
    const double step = std::stod(b);
    const double stop = std::stod(c);
    if(!(step > 0.0) || stop < start)
    {
      throw std::invalid_argument("--thetas: need step > 0 and stop >= start");
    }
    const auto n = static_cast<int>(std::floor((stop - start) / step + 1e-9));
    for(int i = 0; i <= n; ++i)
    {
      out.push_back(start + i * step);
    }
    return out;
  }
  std::stringstream ss(text);
  for(std::string item; std::getline(ss, item, ',');)
  {
    out.push_back(std::stod(item));
  }
  if(out.empty())
  {
    throw std::invalid_argument("--thetas: empty list");
  }
  return out;
}

void write_file(const fs::path & path, const std::string & content)
{
  std::ofstream f(path);
  if(!f)
  {
    throw std::runtime_error("cannot write " + path.string());
  }
  f << content;
}

/// Scenario variant for one of the comparison controllers.
ScenarioConfig with_controller(ScenarioConfig s, const std::string & name)
{
  if(name == "preview_tnom")
  {
    s.controller = ControllerKind::Preview;
    s.preview.fixed_step_duration = nominal_gait(s.v_des, s.bounds, s.params).T_nom;
  }
  else if(name == "preview_tmin")
  {
    s.controller = ControllerKind::Preview;
    s.preview.fixed_step_duration = s.bounds.T_min;
  }
  else
  {
    s.controller = controller_from_string(name);
  }
  return s;
}

int cmd_run(const CommonArgs & args, std::ostream & out)
{
  const ScenarioConfig s = load(args);
  const fs::path dir = output_dir(args);
  RunResult result;
  int code = exit_ok;
  try
  {
    result = run(s);
  }
  catch(const SimulationError & e)
  {
    result = e.partial();
    result.outcome.note = e.what();
    code = exit_error;
  }
  const fs::path trace_path = dir / (s.name + "_trace.csv");
  {
    std::ofstream f(trace_path);
    write_trace_csv(f, result.trace);
  }
  nlohmann::json summary = run_summary(s, result);
  if(code == exit_ok && result.outcome.kind == OutcomeKind::Diverged)
  {
    code = exit_diverged;
  }
  summary["exit_code"] = code;
  write_file(dir / (s.name + "_summary.json"), summary.dump(2) + "\n");

  const auto & o = result.outcome;
  out << s.name << " [" << to_string(s.controller) << "]: " << (code == exit_error ? "ERROR" : to_string(o.kind));
  if(std::isfinite(o.t_diverged))
  {
    out << " at t=" << o.t_diverged;
  }
  out << ", steps=" << result.steps.size() << ", steps at T_min=" << o.steps_at_T_min << "\n";
  if(!o.note.empty())
  {
    out << "  note: " << o.note << "\n";
  }
  out << "  trace: " << trace_path.string() << "\n";
  return code;
}

struct SweepArgs
{
  std::string thetas = "-90:15:90";
  double tolerance = 1.0;
  bool serial = false;
};

SweepOptions sweep_options(const SweepArgs & a)
{
  SweepOptions o;
  o.thetas = parse_thetas(a.thetas);
  o.tolerance = a.tolerance;
  o.serial = a.serial;
  return o;
}

void print_envelope(std::ostream & out, const std::string & label, const std::vector<EnvelopePoint> & env)
{
  out << label << "\n";
  for(const auto & p : env)
  {
    out << "  theta=" << std::setw(6) << p.theta_deg << "  max_force=" << std::setw(9) << p.max_force
        << " N  impulse=" << std::setw(7) << p.impulse << " Ns";
    if(p.status != EnvelopeStatus::Ok)
    {
      out << "  [" << to_string(p.status) << "]";
    }
    if(p.non_monotone)
    {
      out << "  [non-monotone]";
    }
    out << "\n";
  }
}

int cmd_sweep(const CommonArgs & args, const SweepArgs & sa, std::ostream & out)
{
  const ScenarioConfig s = load(args);
  const auto env = sweep_push_envelope(s, sweep_options(sa));
  const fs::path path = output_dir(args) / (s.name + "_" + to_string(s.controller) + "_envelope.csv");
  std::ofstream f(path);
  write_envelope_csv(f, env);
  print_envelope(out, s.name + " [" + to_string(s.controller) + "]", env);
  out << "  envelope: " << path.string() << "\n";
  return exit_ok;
}

int cmd_certify(const CommonArgs & args, bool serial, std::ostream & out)
{
  const ScenarioConfig s = load(args);
  const auto report = certify_bounds(s.bounds, s.params, CertificationGrid{}, serial);
  nlohmann::json j = report;
  const fs::path path = output_dir(args) / "certification.json";
  write_file(path, j.dump(2) + "\n");
  for(const auto & f : report.frontiers)
  {
    out << std::setw(16) << std::left << f.direction << std::right << " analytic=" << std::setw(10) << f.analytic_bound
        << " empirical=" << std::setw(10) << f.empirical_frontier << " gap=" << f.gap / f.cell << " cells\n";
  }
  const bool ok = report.max_gap_cells <= 1.0;
  out << "max gap " << report.max_gap_cells << " cells: " << (ok ? "within one cell" : "exceeds one cell") << "\n";
  out << "report: " << path.string() << "\n";
  return ok ? exit_ok : exit_diverged;
}

int cmd_nominal(const CommonArgs & args, const std::vector<double> & v, std::ostream & out)
{
  ScenarioConfig s = load(args);
  if(!v.empty())
  {
    if(v.size() != 2)
    {
      throw std::invalid_argument("--v expects two values");
    }
    s.v_des = Vec2(v[0], v[1]);
  }
  const NominalGait g = nominal_gait(s.v_des, s.bounds, s.params);
  const ViabilityBounds vb = viability_bounds(s.bounds, s.params);
  out << std::setprecision(6);
  out << "v_des=(" << s.v_des.x() << ", " << s.v_des.y() << ")\n";
  out << "T_nom=" << g.T_nom << " L_nom=" << g.L_nom << " W_nom=" << g.W_nom << " tau_nom=" << g.tau_nom << "\n";
  out << "b_x=" << g.b_x_nom << " b_y(right)=" << g.b_y_nom_right << " b_y(left)=" << g.b_y_nom_left << "\n";
  out << "b_x_max=" << vb.b_x_max << " b_x_min=" << vb.b_x_min << " b_y_out=" << vb.b_y_max_out
      << " b_y_in=" << vb.b_y_max_in << "\n";
  return exit_ok;
}

int cmd_compare(const CommonArgs & args, const SweepArgs & sa, const std::vector<std::string> & controllers, std::ostream & out)
{
  const ScenarioConfig base = load(args);
  const SweepOptions opts = sweep_options(sa);
  const fs::path dir = output_dir(args);
  std::map<std::string, std::vector<EnvelopePoint>> envs;
  nlohmann::json summary{{"schema_version", summary_schema_version}, {"scenario", base.name}, {"tolerance_N", opts.tolerance}};
  for(const auto & name : controllers)
  {
    const ScenarioConfig s = with_controller(base, name);
    auto env = sweep_push_envelope(s, opts);
    const fs::path path = dir / (base.name + "_" + name + "_envelope.csv");
    std::ofstream f(path);
    write_envelope_csv(f, env);
    print_envelope(out, name, env);
    nlohmann::json rows = nlohmann::json::array();
    for(const auto & p : env)
    {
      rows.push_back({{"theta_deg", p.theta_deg}, {"max_force_N", p.max_force}, {"status", to_string(p.status)}});
    }
    summary["envelopes"][name] = rows;
    envs[name] = std::move(env);
  }

  // pairwise orderings among the controllers given
  nlohmann::json checks = nlohmann::json::array();
  auto compare_pair = [&](const std::string & a, const std::string & b) {
    if(!envs.contains(a) || !envs.contains(b))
    {
      return;
    }
    bool dominates = true;
    bool equal = true;
    for(std::size_t i = 0; i < envs[a].size(); ++i)
    {
      const double fa = envs[a][i].max_force;
      const double fb = envs[b][i].max_force;
      dominates = dominates && fa + opts.tolerance >= fb;
      equal = equal && std::abs(fa - fb) <= opts.tolerance;
    }
    checks.push_back({{"a", a}, {"b", b}, {"a_dominates_b", dominates}, {"equal_within_tolerance", equal}});
    out << a << " vs " << b << ": " << (dominates ? "dominates" : "does not dominate")
        << (equal ? ", equal within tolerance" : "") << "\n";
  };
  for(std::size_t i = 0; i < controllers.size(); ++i)
  {
    for(std::size_t j = 0; j < controllers.size(); ++j)
    {
      if(i != j)
      {
        compare_pair(controllers[i], controllers[j]);
      }
    }
  }
  summary["orderings"] = checks;
  write_file(dir / (base.name + "_compare.json"), summary.dump(2) + "\n");
  return exit_ok;
}

} // namespace

int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err)
{
  CLI::App app{"Step timing and location adaptation on the linear inverted pendulum"};
  app.require_subcommand(1, 1);

  CommonArgs common;
  SweepArgs sweep_args;
  bool serial = false;
  std::vector<double> velocity;
  std::vector<std::string> controllers{"adaptive", "preview_tnom", "preview_tmin"};

  auto add_common = [&](CLI::App * sub, bool scenario_required) {
    auto * opt = sub->add_option("--scenario", common.scenario, "Scenario file or bundled scenario name");
    if(scenario_required)
    {
      opt->required();
    }
    sub->add_option("--out", common.out, "Output directory (default $STEPTIME_OUT_DIR or .)");
    sub->add_option("--set", common.overrides, "Override a scenario field, dotted.key=value (repeatable)");
  };
  auto add_sweep = [&](CLI::App * sub) {
    sub->add_option("--thetas", sweep_args.thetas, "Push directions in degrees, a,b,c or start:step:stop");
    sub->add_option("--tolerance", sweep_args.tolerance, "Bisection tolerance [N]")->check(CLI::PositiveNumber);
    sub->add_flag("--serial", sweep_args.serial, "Run probes on one thread");
  };

  auto * run_cmd = app.add_subcommand("run", "Simulate one scenario; writes trace CSV and summary JSON");
  add_common(run_cmd, true);
  auto * sweep_cmd = app.add_subcommand("sweep", "Push envelope of the scenario controller");
  add_common(sweep_cmd, true);
  add_sweep(sweep_cmd);
  auto * certify_cmd = app.add_subcommand("certify", "Check the viability bounds against a brute-force search");
  add_common(certify_cmd, false);
  certify_cmd->add_flag("--serial", serial, "Run on one thread");
  auto * nominal_cmd = app.add_subcommand("nominal", "Print the nominal gait and viability bounds");
  add_common(nominal_cmd, false);
  nominal_cmd->add_option("--v", velocity, "Desired velocity vx vy [m/s]")->expected(2);
  auto * compare_cmd = app.add_subcommand("compare", "Push envelopes of several controllers on one scenario");
  add_common(compare_cmd, true);
  add_sweep(compare_cmd);
  compare_cmd->add_option("--controllers", controllers,
                          "adaptive, fixed_timing, preview, preview_tnom or preview_tmin")
    ->delimiter(',');

  try
  {
    app.parse(argc, argv);
  }
  catch(const CLI::ParseError & e)
  {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_error;
  }

  try
  {
    if(*run_cmd)
    {
      return cmd_run(common, out);
    }
    if(*sweep_cmd)
    {
      return cmd_sweep(common, sweep_args, out);
    }
    if(*certify_cmd)
    {
      return cmd_certify(common, serial, out);
    }
    if(*nominal_cmd)
    {
      return cmd_nominal(common, velocity, out);
    }
    return cmd_compare(common, sweep_args, controllers, out);
  }
  catch(const ScenarioParseError & e)
  {
    err << "scenario error: " << e.what() << "\n";
  }
  catch(const std::exception & e)
  {
    err << "error: " << e.what() << "\n";
  }
  return exit_error;
}

} // namespace steptime
