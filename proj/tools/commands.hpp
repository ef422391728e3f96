#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace rccm::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kNumerical = 3 };

struct TrainArgs {
  std::string config;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct VerifyArgs {
  std::string weights;
  std::size_t n = 4096;
  std::uint64_t seed = 0;
  double threshold = 0.05;
  std::string out;
};

struct SimulateArgs {
  std::string weights;
  std::string sim_case = "rccm";
  std::string config;
  std::optional<double> alpha;
  std::string out;
};

struct PlanArgs {
  double t0 = 0.0;
  double t1 = 20.0;
  double dt = 0.002;
  std::string out;
};

int cmd_train(const TrainArgs& args);
int cmd_verify(const VerifyArgs& args);
int cmd_simulate(const SimulateArgs& args);
int cmd_plan(const PlanArgs& args);

}  // namespace rccm::cli
