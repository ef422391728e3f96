#include "commands.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rccm/io.hpp"

namespace rccm::cli {

namespace fs = std::filesystem;

namespace {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char h[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(h, sizeof h, "%02x", md[i]);
    hex += h;
  }
  return hex;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string out_dir(const std::string& requested, const std::string& command, std::uint64_t seed) {
  const std::string dir = requested.empty() ? "runs/" + command + "-" + std::to_string(seed) : requested;
  fs::create_directories(dir);
  return dir;
}

// Manifest goes last, after every artifact it hashes.
class Manifest {
 public:
  Manifest(std::string command, std::string dir, std::uint64_t seed)
      : dir_(std::move(dir)), doc_{{"command", std::move(command)}, {"seed", seed}} {
    doc_["output_dir"] = fs::absolute(dir_).string();
    doc_["artifacts"] = json::object();
  }

  void input(const std::string& key, const std::string& path) {
    if (path.empty()) {
      doc_[key] = nullptr;
      return;
    }
    doc_[key] = {{"path", path}, {"sha256", sha256_file(path)}};
  }

  void artifact(const std::string& name) { doc_["artifacts"][name] = sha256_file((fs::path(dir_) / name).string()); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void write() {
    doc_["finished_utc"] = utc_now();
    write_text_file((fs::path(dir_) / "manifest.json").string(), doc_.dump(2) + "\n");
  }

 private:
  std::string dir_;
  json doc_;
};

void write_json(const fs::path& path, const json& doc) { write_text_file(path.string(), doc.dump(2) + "\n"); }

template <typename F>
void write_stream(const fs::path& path, F&& body) {
  std::ostringstream os;
  body(os);
  write_text_file(path.string(), os.str());
}

int usage_error(const std::string& what) {
  std::cerr << "error: " << what << "\n";
  return kUsage;
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  TrainConfig config;
  try {
    config = train_config_from_json(read_json_file(args.config));
    if (args.mode) config.mode = parse_loss_mode(*args.mode);
    if (args.seed) config.seed = *args.seed;
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  }

  const QuadrotorModel model;
  TrainResult result;
  try {
    result = train(model, config, [&](const EpochLog& e) {
      std::fprintf(stderr, "epoch %3d/%d  loss %.6g  alpha %.4f  mu %.4f\n", e.epoch, config.epochs, e.mean_loss,
                   e.alpha, e.mu);
    });
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }

  const std::string dir = out_dir(args.out, "train", config.seed);
  const fs::path d(dir);
  save_certificate((d / "weights.json").string(), result.cert);
  write_stream(d / "training_log.csv", [&](std::ostream& os) { write_training_log(os, result.log); });
  write_json(d / "config.json", to_json(config));

  Manifest m("train", dir, config.seed);
  m.input("config", args.config);
  m.set("mode", to_string(config.mode));
  m.set("final_alpha", result.cert.alpha());
  m.set("final_mean_loss", result.log.empty() ? 0.0 : result.log.back().mean_loss);
  for (const char* a : {"weights.json", "training_log.csv", "config.json"}) m.artifact(a);
  m.write();
  std::cout << "alpha " << result.cert.alpha() << "\nwrote " << dir << "\n";
  return kOk;
}

int cmd_verify(const VerifyArgs& args) {
  if (args.n == 0) return usage_error("--n must be positive");
  if (!(args.threshold >= 0.0 && args.threshold <= 1.0)) return usage_error("--threshold must lie in [0, 1]");
  NeuralCertificate cert;
  const QuadrotorModel model;
  try {
    cert = load_certificate(args.weights);
    cert.validate(&model);
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  }

  const VerifyReport rep = verify_fresh(model, cert, args.n, args.seed);
  const std::string dir = out_dir(args.out, "verify", args.seed);
  json doc = to_json(rep);
  doc["threshold"] = args.threshold;
  doc["worst_fraction"] = rep.worst_fraction();
  const bool pass = rep.worst_fraction() <= args.threshold;
  doc["pass"] = pass;
  write_json(fs::path(dir) / "verify_report.json", doc);

  Manifest m("verify", dir, args.seed);
  m.input("weights", args.weights);
  m.artifact("verify_report.json");
  m.write();
  std::cout << "violations R1 " << rep.violations_R1 << " R2 " << rep.violations_R2 << " C1 " << rep.violations_C1
            << " of " << rep.n_check << (pass ? "  PASS" : "  FAIL") << "\nwrote " << dir << "\n";
  return pass ? kOk : kVerifyFailed;
}

int cmd_simulate(const SimulateArgs& args) {
  SimConfig config;
  NeuralCertificate cert;
  const QuadrotorModel model;
  try {
    if (!args.config.empty()) config = sim_config_from_json(read_json_file(args.config));
    config.sim_case = parse_sim_case(args.sim_case);
    const bool learned = config.sim_case != SimCase::geometric;
    if (learned && args.weights.empty()) return usage_error("case '" + args.sim_case + "' needs --weights");
    if (!args.weights.empty()) {
      cert = load_certificate(args.weights);
      cert.validate(&model);
    }
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  }

  SimTrace trace;
  try {
    trace = run_case(model, args.weights.empty() ? nullptr : &cert, config);
  } catch (const SimulationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }

  const double alpha = args.alpha ? *args.alpha : (args.weights.empty() ? 1.268 : cert.alpha());
  const TubeSummary tube = tube_metrics(trace, alpha, disturbance_bound(model.params().mass));
  const std::string dir = out_dir(args.out, "simulate", config.seed);
  const fs::path d(dir);
  write_stream(d / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, trace); });
  json summary = to_json(tube);
  summary["case"] = to_string(config.sim_case);
  summary["alpha"] = alpha;
  summary["w_bar"] = disturbance_bound(model.params().mass);
  write_json(d / "tube_summary.json", summary);
  write_json(d / "config.json", to_json(config));

  Manifest m("simulate", dir, config.seed);
  m.input("config", args.config);
  m.input("weights", args.weights);
  m.set("case", to_string(config.sim_case));
  for (const char* a : {"trace.csv", "tube_summary.json", "config.json"}) m.artifact(a);
  m.write();
  std::cout << "post-transient max dev " << tube.post_transient_max << " (bound " << tube.bound << ")\nwrote " << dir
            << "\n";
  return kOk;
}

int cmd_plan(const PlanArgs& args) {
  std::vector<double> grid;
  try {
    if (args.t0 < 0.0) throw std::invalid_argument("--t0 must be nonnegative");
    grid = uniform_grid(args.t0, args.t1, args.dt);
    if (grid.size() < 5) throw std::invalid_argument("the grid needs at least 5 points");
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  }
  const QuadrotorModel model;
  std::vector<NominalPoint> traj;
  try {
    traj = nominal_trajectory(spiral_reference, grid, {}, model.params());
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  const std::vector<double> res = consistency_residuals(model, traj);
  double worst = 0.0;
  for (double r : res) worst = std::max(worst, r);

  const std::string dir = out_dir(args.out, "plan", 0);
  write_stream(fs::path(dir) / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, traj, res); });
  Manifest m("plan", dir, 0);
  m.set("grid", {{"t0", args.t0}, {"t1", args.t1}, {"dt", args.dt}, {"points", grid.size()}});
  m.set("max_residual", worst);
  m.artifact("trajectory.csv");
  m.write();
  std::cout << grid.size() << " points, max residual " << worst << "\nwrote " << dir << "\n";
  return kOk;
}

}  // namespace rccm::cli
