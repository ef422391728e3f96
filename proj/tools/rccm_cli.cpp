#include <CLI11.hpp>

#include <exception>
#include <iostream>

#include "commands.hpp"

using namespace rccm::cli;

int main(int argc, char** argv) {
  CLI::App app{"Neural RCCM training, verification and quadrotor simulation"};
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App* c_train = app.add_subcommand("train", "train a certificate from a config file");
  c_train->add_option("config", train.config, "training config (JSON)")->required();
  c_train->add_option("--mode", train.mode, "rccm or ccm");
  c_train->add_option("--seed", train.seed, "overrides the config seed");
  c_train->add_option("--out", train.out, "output directory");

  VerifyArgs verify;
  CLI::App* c_verify = app.add_subcommand("verify", "check LMI conditions on fresh samples");
  c_verify->add_option("weights", verify.weights, "weights file")->required();
  c_verify->add_option("--n", verify.n, "number of fresh samples")->capture_default_str();
  c_verify->add_option("--seed", verify.seed, "sampling seed")->capture_default_str();
  c_verify->add_option("--threshold", verify.threshold, "largest acceptable violation fraction")->capture_default_str();
  c_verify->add_option("--out", verify.out, "output directory");

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand("simulate", "closed-loop spiral tracking");
  c_sim->add_option("--weights", sim.weights, "weights file (learned cases)");
  c_sim->add_option("--case", sim.sim_case, "rccm, ccm, geometric or rccm_ude")->capture_default_str();
  c_sim->add_option("--config", sim.config, "simulation config (JSON)");
  c_sim->add_option("--alpha", sim.alpha, "gain used for the tube bound; defaults to the certificate's");
  c_sim->add_option("--out", sim.out, "output directory");

  PlanArgs plan;
  CLI::App* c_plan = app.add_subcommand("plan", "spiral nominal trajectory with consistency residuals");
  c_plan->add_option("--t0", plan.t0)->capture_default_str();
  c_plan->add_option("--t1", plan.t1)->capture_default_str();
  c_plan->add_option("--dt", plan.dt)->capture_default_str();
  c_plan->add_option("--out", plan.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*c_train) return cmd_train(train);
    if (*c_verify) return cmd_verify(verify);
    if (*c_sim) return cmd_simulate(sim);
    if (*c_plan) return cmd_plan(plan);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
