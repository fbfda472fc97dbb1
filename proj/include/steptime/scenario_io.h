#pragma once

#include <steptime/sim_engine.h>
#include <steptime/viability.h>

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace steptime
{

/// Malformed scenario document; key() is the dotted path, line() is 1-based or 0 when unknown.
class ScenarioParseError : public std::runtime_error
{
public:
  ScenarioParseError(const std::string & key, int line, const std::string & message);

  const std::string & key() const { return key_; }
  int line() const { return line_; }

private:
  std::string key_;
  int line_;
};

/** \brief Parse a scenario document.
 *
 * Unknown keys are rejected. Each override has the form dotted.key=value (sequence entries are
 * addressed by index, e.g. pushes.0.magnitude=300) and is applied before validation.
 */
ScenarioConfig parse_scenario(const std::string & text,
                              const std::vector<std::string> & overrides = {},
                              const std::string & source = "<string>");

ScenarioConfig load_scenario(const std::filesystem::path & path, const std::vector<std::string> & overrides = {});

/// Scenario document that parses back to the same configuration.
std::string scenario_to_yaml(const ScenarioConfig & scenario);

/// Version of the run summary document.
constexpr int summary_schema_version = 1;

void write_trace_csv(std::ostream & os, const TrajectoryRecord & trace);

/// Reads a trace written by write_trace_csv; throws std::runtime_error on malformed input.
TrajectoryRecord read_trace_csv(std::istream & is);

nlohmann::json run_summary(const ScenarioConfig & scenario, const RunResult & result);

void write_envelope_csv(std::ostream & os, const std::vector<EnvelopePoint> & envelope);

} // namespace steptime
