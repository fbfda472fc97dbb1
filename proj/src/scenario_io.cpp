#include <steptime/scenario_io.h>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace steptime
{

ScenarioParseError::ScenarioParseError(const std::string & key, int line, const std::string & message)
: std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + "key '" + key + "': " + message),
  key_(key), line_(line)
{
}

namespace
{

int line_of(const YAML::Node & node)
{
  return node.Mark().is_null() ? 0 : node.Mark().line + 1;
}

std::string join(const std::string & path, const std::string & key)
{
  return path.empty() ? key : path + "." + key;
}

/// Typed access to one mapping with unknown-key detection.
class MapReader
{
public:
  MapReader(const YAML::Node & node, std::string path, std::set<std::string> allowed)
  : node_(node), path_(std::move(path)), allowed_(std::move(allowed))
  {
    if(!node_.IsMap())
    {
      throw ScenarioParseError(path_.empty() ? "<root>" : path_, line_of(node_), "expected a mapping");
    }
    for(const auto & kv : node_)
    {
      const auto key = kv.first.as<std::string>();
      if(!allowed_.contains(key))
      {
        throw ScenarioParseError(join(path_, key), line_of(kv.first), "unknown key");
      }
    }
  }

  bool has(const std::string & key) const { return static_cast<bool>(node_[key]); }

  YAML::Node child(const std::string & key) const { return node_[key]; }

  const std::string & path() const { return path_; }

  template<typename T>
  void get(const std::string & key, T & value) const
  {
    const YAML::Node n = node_[key];
    if(!n)
    {
      return;
    }
    try
    {
      value = n.as<T>();
    }
    catch(const YAML::Exception &)
    {
      throw ScenarioParseError(join(path_, key), line_of(n), "cannot convert '" + dump(n) + "'");
    }
    if constexpr(std::is_floating_point_v<T>)
    {
      if(!std::isfinite(value))
      {
        throw ScenarioParseError(join(path_, key), line_of(n), "value must be finite");
      }
    }
  }

  void get_vec2(const std::string & key, Vec2 & value) const
  {
    const YAML::Node n = node_[key];
    if(!n)
    {
      return;
    }
    if(!n.IsSequence() || n.size() != 2)
    {
      throw ScenarioParseError(join(path_, key), line_of(n), "expected a two-element list [x, y]");
    }
    try
    {
      value = Vec2(n[0].as<double>(), n[1].as<double>());
    }
    catch(const YAML::Exception &)
    {
      throw ScenarioParseError(join(path_, key), line_of(n), "expected numbers");
    }
  }

  Foot get_foot(const std::string & key, Foot fallback) const
  {
    std::string s;
    get(key, s);
    if(s.empty())
    {
      return fallback;
    }
    if(s == "right")
    {
      return Foot::Right;
    }
    if(s == "left")
    {
      return Foot::Left;
    }
    throw ScenarioParseError(join(path_, key), line_of(node_[key]), "expected 'right' or 'left'");
  }

  int line() const { return line_of(node_); }

private:
  static std::string dump(const YAML::Node & n)
  {
    YAML::Emitter e;
    e << YAML::Flow << n;
    return e.c_str();
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> allowed_;
};

void apply_override(YAML::Node & root, const std::string & assignment)
{
  const auto eq = assignment.find('=');
  if(eq == std::string::npos || eq == 0)
  {
    throw ScenarioParseError(assignment, 0, "override must have the form dotted.key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for(std::string part; std::getline(ss, part, '.');)
  {
    if(part.empty())
    {
      throw ScenarioParseError(key, 0, "empty path component");
    }
    parts.push_back(part);
  }
  YAML::Node value;
  try
  {
    value = YAML::Load(text);
  }
  catch(const YAML::Exception & e)
  {
    throw ScenarioParseError(key, 0, std::string("cannot parse override value: ") + e.what());
  }

  YAML::Node cur = root;
  for(std::size_t i = 0; i < parts.size(); ++i)
  {
    const bool last = i + 1 == parts.size();
    if(cur.IsSequence())
    {
      std::size_t idx = 0;
      try
      {
        idx = std::stoul(parts[i]);
      }
      catch(const std::exception &)
      {
        throw ScenarioParseError(key, 0, "'" + parts[i] + "' is not a list index");
      }
      if(idx >= cur.size())
      {
        throw ScenarioParseError(key, 0, "list index " + parts[i] + " out of range");
      }
      if(last)
      {
        cur[idx] = value;
        return;
      }
      YAML::Node next = cur[idx];
      cur.reset(next);
    }
    else
    {
      if(!cur.IsMap() && !cur.IsNull())
      {
        throw ScenarioParseError(key, 0, "'" + parts[i] + "' addresses into a scalar");
      }
      if(last)
      {
        cur[parts[i]] = value;
        return;
      }
      if(!cur[parts[i]])
      {
        cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
      }
      YAML::Node next = cur[parts[i]];
      cur.reset(next);
    }
  }
}

PushEvent parse_push(const YAML::Node & node, const std::string & path, const Vec2 & v_des)
{
  MapReader r(node, path, {"t_start", "duration", "force", "theta_deg", "magnitude", "at_step_start"});
  PushEvent p;
  r.get("t_start", p.t_start);
  r.get("duration", p.duration);
  const bool polar = r.has("theta_deg") || r.has("magnitude");
  if(polar && r.has("force"))
  {
    throw ScenarioParseError(join(path, "force"), line_of(r.child("force")), "give either force or theta_deg/magnitude");
  }
  if(polar)
  {
    if(!r.has("theta_deg") || !r.has("magnitude"))
    {
      throw ScenarioParseError(path, r.line(), "theta_deg and magnitude must be given together");
    }
    double theta = 0.0;
    double magnitude = 0.0;
    r.get("theta_deg", theta);
    r.get("magnitude", magnitude);
    p.force = push_force(theta, magnitude, v_des);
  }
  else
  {
    r.get_vec2("force", p.force);
  }
  if(r.has("at_step_start"))
  {
    p.at_step_start = r.get_foot("at_step_start", Foot::Left);
  }
  return p;
}

} // namespace

ScenarioConfig parse_scenario(const std::string & text, const std::vector<std::string> & overrides, const std::string & source)
{
  YAML::Node root;
  try
  {
    root = YAML::Load(text);
  }
  catch(const YAML::ParserException & e)
  {
    throw ScenarioParseError("<document>", e.mark.line + 1, source + ": " + e.msg);
  }
  if(root.IsNull())
  {
    root = YAML::Node(YAML::NodeType::Map);
  }
  for(const auto & o : overrides)
  {
    apply_override(root, o);
  }

  ScenarioConfig s;
  MapReader top(root, "",
                {"name", "controller", "v_des", "mass", "control_period", "duration", "lipm", "bounds", "weights",
                 "adapter", "preview", "initial", "sim", "pushes", "displacements"});
  top.get("name", s.name);
  if(top.has("controller"))
  {
    std::string c;
    top.get("controller", c);
    try
    {
      s.controller = controller_from_string(c);
    }
    catch(const std::invalid_argument & e)
    {
      throw ScenarioParseError("controller", line_of(top.child("controller")), e.what());
    }
  }
  top.get_vec2("v_des", s.v_des);
  top.get("mass", s.mass);
  top.get("control_period", s.control_period);
  top.get("duration", s.duration);

  if(top.has("lipm"))
  {
    MapReader r(top.child("lipm"), "lipm", {"z0", "g"});
    double z0 = s.params.z0();
    double g = s.params.g();
    r.get("z0", z0);
    r.get("g", g);
    try
    {
      s.params = LipmParams(z0, g);
    }
    catch(const std::invalid_argument & e)
    {
      throw ScenarioParseError("lipm", r.line(), e.what());
    }
  }
  if(top.has("bounds"))
  {
    MapReader r(top.child("bounds"), "bounds",
                {"L_min", "L_max", "W_out_max", "W_in_max", "T_min", "T_max", "l_p", "z_max", "z_des"});
    auto & b = s.bounds;
    r.get("L_min", b.L_min);
    r.get("L_max", b.L_max);
    r.get("W_out_max", b.W_out_max);
    r.get("W_in_max", b.W_in_max);
    r.get("T_min", b.T_min);
    r.get("T_max", b.T_max);
    r.get("l_p", b.l_p);
    r.get("z_max", b.z_max);
    r.get("z_des", b.z_des);
  }
  if(top.has("weights"))
  {
    MapReader r(top.child("weights"), "weights", {"alpha1", "alpha2", "alpha3", "alpha4"});
    r.get("alpha1", s.weights.alpha1);
    r.get("alpha2", s.weights.alpha2);
    r.get("alpha3", s.weights.alpha3);
    r.get("alpha4", s.weights.alpha4);
  }
  if(top.has("adapter"))
  {
    MapReader r(top.child("adapter"), "adapter", {"dt_floor", "slack_epsilon"});
    r.get("dt_floor", s.adapter.dt_floor);
    r.get("slack_epsilon", s.adapter.slack_epsilon);
  }
  if(top.has("preview"))
  {
    MapReader r(top.child("preview"), "preview",
                {"horizon_steps", "interval", "jerk_weight", "velocity_weight", "footstep_weight", "fixed_step_duration"});
    r.get("horizon_steps", s.preview.horizon_steps);
    r.get("interval", s.preview.interval);
    r.get("jerk_weight", s.preview.jerk_weight);
    r.get("velocity_weight", s.preview.velocity_weight);
    r.get("footstep_weight", s.preview.footstep_weight);
    r.get("fixed_step_duration", s.preview.fixed_step_duration);
  }
  if(top.has("initial"))
  {
    MapReader r(top.child("initial"), "initial", {"first_stance", "stance_point", "nominal", "com", "com_vel"});
    s.initial.first_stance = r.get_foot("first_stance", Foot::Right);
    r.get_vec2("stance_point", s.initial.stance_point);
    r.get("nominal", s.initial.nominal);
    r.get_vec2("com", s.initial.state.com);
    r.get_vec2("com_vel", s.initial.state.com_vel);
  }
  if(top.has("sim"))
  {
    MapReader r(top.child("sim"), "sim",
                {"plan_swing", "freeze_pendulum", "record_trace", "divergence_factor", "recovery_tolerance",
                 "recovery_steps", "min_post_steps", "stop_when_settled", "max_post_steps"});
    auto & o = s.sim;
    r.get("plan_swing", o.plan_swing);
    r.get("freeze_pendulum", o.freeze_pendulum);
    r.get("record_trace", o.record_trace);
    r.get("divergence_factor", o.divergence_factor);
    r.get("recovery_tolerance", o.recovery_tolerance);
    r.get("recovery_steps", o.recovery_steps);
    r.get("min_post_steps", o.min_post_steps);
    r.get("stop_when_settled", o.stop_when_settled);
    r.get("max_post_steps", o.max_post_steps);
  }
  if(top.has("pushes"))
  {
    const YAML::Node list = top.child("pushes");
    if(!list.IsSequence())
    {
      throw ScenarioParseError("pushes", line_of(list), "expected a list");
    }
    for(std::size_t i = 0; i < list.size(); ++i)
    {
      s.pushes.push_back(parse_push(list[i], "pushes." + std::to_string(i), s.v_des));
    }
  }
  if(top.has("displacements"))
  {
    const YAML::Node list = top.child("displacements");
    if(!list.IsSequence())
    {
      throw ScenarioParseError("displacements", line_of(list), "expected a list");
    }
    for(std::size_t i = 0; i < list.size(); ++i)
    {
      MapReader r(list[i], "displacements." + std::to_string(i), {"t_start", "offset"});
      ContactDisplacementEvent d;
      r.get("t_start", d.t_start);
      r.get_vec2("offset", d.offset);
      s.displacements.push_back(d);
    }
  }

  try
  {
    s.validate();
  }
  catch(const std::invalid_argument & e)
  {
    throw ScenarioParseError("<scenario>", 0, e.what());
  }
  return s;
}

ScenarioConfig load_scenario(const std::filesystem::path & path, const std::vector<std::string> & overrides)
{
  std::ifstream in(path);
  if(!in)
  {
    throw std::runtime_error("cannot open scenario file " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), overrides, path.string());
}

namespace
{

void emit_vec2(YAML::Emitter & e, const char * key, const Vec2 & v)
{
  e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << v.x() << v.y() << YAML::EndSeq;
}

const char * foot_name(Foot f)
{
  return f == Foot::Right ? "right" : "left";
}

} // namespace

std::string scenario_to_yaml(const ScenarioConfig & s)
{
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << s.name;
  e << YAML::Key << "controller" << YAML::Value << to_string(s.controller);
  emit_vec2(e, "v_des", s.v_des);
  e << YAML::Key << "mass" << YAML::Value << s.mass;
  e << YAML::Key << "control_period" << YAML::Value << s.control_period;
  e << YAML::Key << "duration" << YAML::Value << s.duration;
  e << YAML::Key << "lipm" << YAML::Value << YAML::BeginMap << YAML::Key << "z0" << YAML::Value << s.params.z0()
    << YAML::Key << "g" << YAML::Value << s.params.g() << YAML::EndMap;
  const auto & b = s.bounds;
  e << YAML::Key << "bounds" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "L_min" << YAML::Value << b.L_min << YAML::Key << "L_max" << YAML::Value << b.L_max;
  e << YAML::Key << "W_out_max" << YAML::Value << b.W_out_max << YAML::Key << "W_in_max" << YAML::Value << b.W_in_max;
  e << YAML::Key << "T_min" << YAML::Value << b.T_min << YAML::Key << "T_max" << YAML::Value << b.T_max;
  e << YAML::Key << "l_p" << YAML::Value << b.l_p << YAML::Key << "z_max" << YAML::Value << b.z_max;
  e << YAML::Key << "z_des" << YAML::Value << b.z_des << YAML::EndMap;
  e << YAML::Key << "weights" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "alpha1" << YAML::Value << s.weights.alpha1 << YAML::Key << "alpha2" << YAML::Value << s.weights.alpha2;
  e << YAML::Key << "alpha3" << YAML::Value << s.weights.alpha3 << YAML::Key << "alpha4" << YAML::Value << s.weights.alpha4;
  e << YAML::EndMap;
  e << YAML::Key << "adapter" << YAML::Value << YAML::BeginMap << YAML::Key << "dt_floor" << YAML::Value
    << s.adapter.dt_floor << YAML::Key << "slack_epsilon" << YAML::Value << s.adapter.slack_epsilon << YAML::EndMap;
  const auto & p = s.preview;
  e << YAML::Key << "preview" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "horizon_steps" << YAML::Value << p.horizon_steps << YAML::Key << "interval" << YAML::Value << p.interval;
  e << YAML::Key << "jerk_weight" << YAML::Value << p.jerk_weight << YAML::Key << "velocity_weight" << YAML::Value
    << p.velocity_weight;
  e << YAML::Key << "footstep_weight" << YAML::Value << p.footstep_weight << YAML::Key << "fixed_step_duration"
    << YAML::Value << p.fixed_step_duration << YAML::EndMap;
  e << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "first_stance" << YAML::Value << foot_name(s.initial.first_stance);
  emit_vec2(e, "stance_point", s.initial.stance_point);
  e << YAML::Key << "nominal" << YAML::Value << s.initial.nominal;
  emit_vec2(e, "com", s.initial.state.com);
  emit_vec2(e, "com_vel", s.initial.state.com_vel);
  e << YAML::EndMap;
  const auto & o = s.sim;
  e << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "plan_swing" << YAML::Value << o.plan_swing << YAML::Key << "freeze_pendulum" << YAML::Value
    << o.freeze_pendulum << YAML::Key << "record_trace" << YAML::Value << o.record_trace;
  e << YAML::Key << "divergence_factor" << YAML::Value << o.divergence_factor << YAML::Key << "recovery_tolerance"
    << YAML::Value << o.recovery_tolerance;
  e << YAML::Key << "recovery_steps" << YAML::Value << o.recovery_steps << YAML::Key << "min_post_steps" << YAML::Value
    << o.min_post_steps;
  e << YAML::Key << "stop_when_settled" << YAML::Value << o.stop_when_settled << YAML::Key << "max_post_steps"
    << YAML::Value << o.max_post_steps << YAML::EndMap;
  e << YAML::Key << "pushes" << YAML::Value << YAML::BeginSeq;
  for(const auto & push : s.pushes)
  {
    e << YAML::BeginMap << YAML::Key << "t_start" << YAML::Value << push.t_start << YAML::Key << "duration"
      << YAML::Value << push.duration;
    emit_vec2(e, "force", push.force);
    if(push.at_step_start)
    {
      e << YAML::Key << "at_step_start" << YAML::Value << foot_name(*push.at_step_start);
    }
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;
  e << YAML::Key << "displacements" << YAML::Value << YAML::BeginSeq;
  for(const auto & d : s.displacements)
  {
    e << YAML::BeginMap << YAML::Key << "t_start" << YAML::Value << d.t_start;
    emit_vec2(e, "offset", d.offset);
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

void write_trace_csv(std::ostream & os, const TrajectoryRecord & trace)
{
  const auto & cols = trace_columns();
  for(std::size_t i = 0; i < cols.size(); ++i)
  {
    os << (i ? "," : "") << cols[i];
  }
  os << '\n';
  os << std::setprecision(12);
  for(const auto & r : trace)
  {
    os << r.t << ',' << r.com.x() << ',' << r.com.y() << ',' << r.com_vel.x() << ',' << r.com_vel.y() << ','
       << r.dcm.x() << ',' << r.dcm.y() << ',' << r.u0.x() << ',' << r.u0.y() << ',' << r.foot_index << ','
       << r.step_index << ',' << r.step_elapsed << ',' << r.u_T.x() << ',' << r.u_T.y() << ',' << r.T_adapt << ','
       << r.b.x() << ',' << r.b.y() << ',' << r.psi_norm << ',' << r.swing.x() << ',' << r.swing.y() << ','
       << r.swing.z() << ',' << r.status << '\n';
  }
}

TrajectoryRecord read_trace_csv(std::istream & is)
{
  std::string line;
  if(!std::getline(is, line))
  {
    throw std::runtime_error("trace: missing header");
  }
  const auto & cols = trace_columns();
  {
    std::vector<std::string> header;
    std::stringstream ss(line);
    for(std::string c; std::getline(ss, c, ',');)
    {
      header.push_back(c);
    }
    if(header != cols)
    {
      throw std::runtime_error("trace: unexpected header");
    }
  }
  TrajectoryRecord out;
  int line_no = 1;
  while(std::getline(is, line))
  {
    ++line_no;
    if(line.empty())
    {
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for(std::string c; std::getline(ss, c, ',');)
    {
      f.push_back(c);
    }
    if(f.size() != cols.size())
    {
      throw std::runtime_error("trace: line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    }
    try
    {
      std::size_t i = 0;
      auto num = [&]() { return std::stod(f[i++]); };
      TraceRow r;
      r.t = num();
      r.com.x() = num();
      r.com.y() = num();
      r.com_vel.x() = num();
      r.com_vel.y() = num();
      r.dcm.x() = num();
      r.dcm.y() = num();
      r.u0.x() = num();
      r.u0.y() = num();
      r.foot_index = std::stoi(f[i++]);
      r.step_index = std::stoi(f[i++]);
      r.step_elapsed = num();
      r.u_T.x() = num();
      r.u_T.y() = num();
      r.T_adapt = num();
      r.b.x() = num();
      r.b.y() = num();
      r.psi_norm = num();
      r.swing.x() = num();
      r.swing.y() = num();
      r.swing.z() = num();
      r.status = f[i++];
      out.push_back(r);
    }
    catch(const std::logic_error &)
    {
      throw std::runtime_error("trace: line " + std::to_string(line_no) + " is not numeric");
    }
  }
  return out;
}

namespace
{

nlohmann::json vec(const Vec2 & v)
{
  return nlohmann::json::array({v.x(), v.y()});
}

nlohmann::json number_or_null(double v)
{
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

} // namespace

nlohmann::json run_summary(const ScenarioConfig & scenario, const RunResult & result)
{
  using nlohmann::json;
  const auto & o = result.outcome;
  json steps = json::array();
  for(const auto & s : result.steps)
  {
    steps.push_back({{"index", s.index},
                     {"foot", foot_name(s.foot)},
                     {"t_start", s.t_start},
                     {"duration", s.duration},
                     {"u0", vec(s.u0)},
                     {"u_T", vec(s.u_T)},
                     {"end_offset", vec(s.end_offset)},
                     {"reference_offset", vec(s.reference_offset)},
                     {"touchdown_mismatch", s.touchdown_mismatch},
                     {"viability_violated", s.viability_violated}});
  }
  const auto & g = result.gait;
  const auto & vb = result.viability;
  return json{{"schema_version", summary_schema_version},
              {"scenario", scenario.name},
              {"controller", to_string(scenario.controller)},
              {"outcome", to_string(o.kind)},
              {"t_diverged", number_or_null(o.t_diverged)},
              {"disturbed", o.disturbed},
              {"settled", o.settled},
              {"post_disturbance_steps", o.post_disturbance_steps},
              {"steps_at_T_min", o.steps_at_T_min},
              {"max_offset", o.max_offset},
              {"note", o.note},
              {"nominal",
               {{"T_nom", g.T_nom},
                {"L_nom", g.L_nom},
                {"W_nom", g.W_nom},
                {"tau_nom", g.tau_nom},
                {"b_x_nom", g.b_x_nom},
                {"b_y_nom_right", g.b_y_nom_right},
                {"b_y_nom_left", g.b_y_nom_left}}},
              {"viability",
               {{"b_x_max", vb.b_x_max}, {"b_x_min", vb.b_x_min}, {"b_y_max_out", vb.b_y_max_out}, {"b_y_max_in", vb.b_y_max_in}}},
              {"cycles", result.trace.size()},
              {"steps", steps}};
}

void write_envelope_csv(std::ostream & os, const std::vector<EnvelopePoint> & envelope)
{
  os << "theta_deg,max_force_N,impulse_Ns,diverged_force_N,status,non_monotone,probes\n";
  os << std::setprecision(10);
  for(const auto & p : envelope)
  {
    os << p.theta_deg << ',' << p.max_force << ',' << p.impulse << ',' << p.diverged_force << ',' << to_string(p.status)
       << ',' << (p.non_monotone ? 1 : 0) << ',' << p.probes << '\n';
  }
}

} // namespace steptime
