#pragma once
#include <stdexcept>
#include <string>
#include <vector>

#include "drflex/behavior.hpp"
#include "drflex/core.hpp"
#include "drflex/thermal.hpp"

namespace drflex {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// %.17g: lossless double round trip (CSV data files).
std::string fmt17(double v);
// %.12g: compact form for records and wire messages.
std::string fmt12(double v);

// Metering CSV, header `timestamp,indoor_f,outdoor_f,ac_kw`. The reader
// enforces uniform timestamp spacing (MeteringHistory::validate).
void write_metering_csv(const std::string& path, const MeteringHistory& hist);
MeteringHistory read_metering_csv(const std::string& path);

// Exogenous CSV, header `step,outdoor_f,price`, rows for steps 0..T; the
// step-0 row has an empty price field (price belongs to steps 1..T).
void write_exogenous_csv(const std::string& path, const ExogenousSeries& exo);
ExogenousSeries read_exogenous_csv(const std::string& path);

// Self-describing thermal model document (JSON): kind "linear" stores the
// coefficients; kind "gp" stores hyperparameters, training data, and a digest
// of the training bytes that is re-checked on load.
void save_thermal_model(const std::string& path, const ThermalModel& m);
ThermalModel load_thermal_model(const std::string& path);

// One simulated customer: ground-truth behavior plus linear AC dynamics.
struct CustomerSpec {
  int id = 0;
  BehaviorParams theta_star;
  LinearThermal thermal;
};

struct PopulationFile {
  FactorScaling scaling;
  std::vector<CustomerSpec> customers;
};

void save_population(const std::string& path, const PopulationFile& pop);
PopulationFile load_population(const std::string& path);

// Event configuration document (JSON object with the EventConfig fields;
// "mode" is "soc1"/"soc2", u_init null means auto).
void save_event_config(const std::string& path, const EventConfig& cfg);
EventConfig load_event_config(const std::string& path);
EventConfig event_config_from_json_text(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace drflex
