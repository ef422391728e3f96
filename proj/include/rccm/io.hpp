#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rccm/planner.hpp"
#include "rccm/simulator.hpp"
#include "rccm/training.hpp"

namespace rccm {

using json = nlohmann::json;

/// Malformed or inconsistent configuration or weights document.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

constexpr int kWeightsFormatVersion = 1;

json certificate_to_json(const NeuralCertificate& cert);
NeuralCertificate certificate_from_json(const json& doc);
void save_certificate(const std::string& path, const NeuralCertificate& cert);
NeuralCertificate load_certificate(const std::string& path);

/// Unknown keys are rejected; missing keys keep their defaults.
TrainConfig train_config_from_json(const json& doc);
json to_json(const TrainConfig& config);
SimConfig sim_config_from_json(const json& doc);
json to_json(const SimConfig& config);

json to_json(const VerifyReport& report);
json to_json(const TubeSummary& summary);

void write_training_log(std::ostream& os, const std::vector<EpochLog>& log);
void write_trajectory_csv(std::ostream& os, const std::vector<NominalPoint>& traj, const std::vector<double>& residual);
void write_trace_csv(std::ostream& os, const SimTrace& trace);

}  // namespace rccm
