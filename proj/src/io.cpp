#include "rccm/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace rccm {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

namespace {

void require_object(const json& doc, const std::string& what) {
  if (!doc.is_object()) throw ConfigError(what + " must be a JSON object");
}

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("key '") + key + "' has the wrong type");
  }
}

Vec3 vec3(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("'" + key + "' must be an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError("'" + key + "' must be an array of 3 numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

json vec3_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

json mlp_to_json(const Mlp& net) {
  json layers = json::array();
  for (const DenseLayer& L : net.layers()) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < L.weights.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < L.weights.cols(); ++j) row.push_back(L.weights(i, j));
      rows.push_back(std::move(row));
    }
    json bias = json::array();
    for (Eigen::Index i = 0; i < L.bias.size(); ++i) bias.push_back(L.bias(i));
    layers.push_back({{"weights", std::move(rows)}, {"bias", std::move(bias)}});
  }
  return {{"widths", net.widths()}, {"layers", std::move(layers)}};
}

Mlp mlp_from_json(const json& doc, const std::string& name) {
  require_object(doc, "network '" + name + "'");
  check_keys(doc, {"widths", "layers"}, "network '" + name + "'");
  if (!doc.contains("widths") || !doc.contains("layers")) throw ConfigError("network '" + name + "' is incomplete");
  std::vector<int> widths;
  try {
    widths = doc.at("widths").get<std::vector<int>>();
  } catch (const json::exception&) {
    throw ConfigError("network '" + name + "' has malformed widths");
  }
  if (widths.size() < 2) throw ConfigError("network '" + name + "' needs at least two widths");
  for (int w : widths)
    if (w <= 0) throw ConfigError("network '" + name + "' has a nonpositive width");
  Mlp net(widths);
  const json& layers = doc.at("layers");
  if (!layers.is_array() || layers.size() != widths.size() - 1)
    throw ConfigError("network '" + name + "' layer count does not match its widths");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    DenseLayer& L = net.layers()[l];
    const json& jl = layers[l];
    if (!jl.is_object() || !jl.contains("weights") || !jl.contains("bias"))
      throw ConfigError("network '" + name + "' layer " + std::to_string(l) + " is incomplete");
    const json& rows = jl.at("weights");
    const json& bias = jl.at("bias");
    if (!rows.is_array() || rows.size() != static_cast<std::size_t>(L.weights.rows()) || !bias.is_array() ||
        bias.size() != static_cast<std::size_t>(L.bias.size()))
      throw ConfigError("network '" + name + "' layer " + std::to_string(l) + " has the wrong shape");
    for (Eigen::Index i = 0; i < L.weights.rows(); ++i) {
      const json& row = rows[static_cast<std::size_t>(i)];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(L.weights.cols()))
        throw ConfigError("network '" + name + "' layer " + std::to_string(l) + " has the wrong shape");
      for (Eigen::Index j = 0; j < L.weights.cols(); ++j) {
        const json& v = row[static_cast<std::size_t>(j)];
        if (!v.is_number()) throw ConfigError("network '" + name + "' holds a non-numeric weight");
        L.weights(i, j) = v.get<double>();
      }
      const json& b = bias[static_cast<std::size_t>(i)];
      if (!b.is_number()) throw ConfigError("network '" + name + "' holds a non-numeric bias");
      L.bias(i) = b.get<double>();
    }
    if (!L.weights.allFinite() || !L.bias.allFinite())
      throw ConfigError("network '" + name + "' holds non-finite parameters");
  }
  return net;
}

}  // namespace

json certificate_to_json(const NeuralCertificate& cert) {
  json doc;
  doc["format_version"] = kWeightsFormatVersion;
  doc["hyper"] = {{"m_lower", cert.hyper.m_lower},
                  {"m_upper", cert.hyper.m_upper},
                  {"lambda", cert.hyper.lambda},
                  {"alpha_floor", cert.hyper.alpha_floor}};
  doc["theta_alpha"] = cert.theta_alpha;
  doc["theta_mu"] = cert.theta_mu;
  doc["networks"] = {{"theta_w", mlp_to_json(cert.theta_w)},
                     {"theta_k1", mlp_to_json(cert.theta_k1)},
                     {"theta_k2", mlp_to_json(cert.theta_k2)}};
  return doc;
}

NeuralCertificate certificate_from_json(const json& doc) {
  require_object(doc, "weights document");
  check_keys(doc, {"format_version", "hyper", "theta_alpha", "theta_mu", "networks"}, "weights document");
  for (const char* k : {"format_version", "hyper", "theta_alpha", "theta_mu", "networks"})
    if (!doc.contains(k)) throw ConfigError(std::string("weights document lacks '") + k + "'");
  int version = 0;
  read(doc, "format_version", version);
  if (version != kWeightsFormatVersion) throw ConfigError("unsupported weights format_version " + std::to_string(version));

  NeuralCertificate cert;
  const json& hyper = doc.at("hyper");
  require_object(hyper, "hyper");
  check_keys(hyper, {"m_lower", "m_upper", "lambda", "alpha_floor"}, "hyper");
  read(hyper, "m_lower", cert.hyper.m_lower);
  read(hyper, "m_upper", cert.hyper.m_upper);
  read(hyper, "lambda", cert.hyper.lambda);
  read(hyper, "alpha_floor", cert.hyper.alpha_floor);
  read(doc, "theta_alpha", cert.theta_alpha);
  read(doc, "theta_mu", cert.theta_mu);

  const json& nets = doc.at("networks");
  require_object(nets, "networks");
  check_keys(nets, {"theta_w", "theta_k1", "theta_k2"}, "networks");
  for (const char* k : {"theta_w", "theta_k1", "theta_k2"})
    if (!nets.contains(k)) throw ConfigError(std::string("networks lacks '") + k + "'");
  cert.theta_w = mlp_from_json(nets.at("theta_w"), "theta_w");
  cert.theta_k1 = mlp_from_json(nets.at("theta_k1"), "theta_k1");
  cert.theta_k2 = mlp_from_json(nets.at("theta_k2"), "theta_k2");
  try {
    cert.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("inconsistent weights: ") + e.what());
  }
  return cert;
}

void save_certificate(const std::string& path, const NeuralCertificate& cert) {
  write_text_file(path, certificate_to_json(cert).dump(1) + "\n");
}

NeuralCertificate load_certificate(const std::string& path) { return certificate_from_json(read_json_file(path)); }

TrainConfig train_config_from_json(const json& doc) {
  require_object(doc, "train config");
  check_keys(doc,
             {"n_samples", "epochs", "batch_size", "learning_rate", "lpd_directions", "seed", "mode", "sampling",
              "hidden", "controller_width", "alpha0", "mu0", "m_lower", "m_upper", "lambda", "alpha_floor"},
             "train config");
  TrainConfig c;
  read(doc, "n_samples", c.n_samples);
  read(doc, "epochs", c.epochs);
  read(doc, "batch_size", c.batch_size);
  read(doc, "learning_rate", c.learning_rate);
  read(doc, "lpd_directions", c.lpd_directions);
  read(doc, "seed", c.seed);
  if (doc.contains("mode")) {
    std::string mode;
    read(doc, "mode", mode);
    try {
      c.mode = parse_loss_mode(mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  read(doc, "hidden", c.shape.hidden);
  read(doc, "controller_width", c.shape.controller_width);
  read(doc, "alpha0", c.shape.alpha0);
  read(doc, "mu0", c.shape.mu0);
  read(doc, "m_lower", c.hyper.m_lower);
  read(doc, "m_upper", c.hyper.m_upper);
  read(doc, "lambda", c.hyper.lambda);
  read(doc, "alpha_floor", c.hyper.alpha_floor);
  if (doc.contains("sampling")) {
    const json& s = doc.at("sampling");
    require_object(s, "sampling");
    check_keys(s, {"position", "velocity", "thrust", "body_rate", "force_dist", "rate_dist", "euler"}, "sampling");
    read(s, "position", c.box.position);
    read(s, "velocity", c.box.velocity);
    read(s, "body_rate", c.box.body_rate);
    read(s, "force_dist", c.box.force_dist);
    read(s, "rate_dist", c.box.rate_dist);
    if (s.contains("thrust")) {
      std::vector<double> th;
      read(s, "thrust", th);
      if (th.size() != 2) throw ConfigError("'thrust' must be [lo, hi]");
      c.box.thrust_lo = th[0];
      c.box.thrust_hi = th[1];
    }
    if (s.contains("euler")) {
      const Vec3 e = vec3(s.at("euler"), "euler");
      c.box.euler = {e(0), e(1), e(2)};
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"n_samples", c.n_samples},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"lpd_directions", c.lpd_directions},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"hidden", c.shape.hidden},
          {"controller_width", c.shape.controller_width},
          {"alpha0", c.shape.alpha0},
          {"mu0", c.shape.mu0},
          {"m_lower", c.hyper.m_lower},
          {"m_upper", c.hyper.m_upper},
          {"lambda", c.hyper.lambda},
          {"alpha_floor", c.hyper.alpha_floor},
          {"sampling",
           {{"position", c.box.position},
            {"velocity", c.box.velocity},
            {"thrust", {c.box.thrust_lo, c.box.thrust_hi}},
            {"body_rate", c.box.body_rate},
            {"force_dist", c.box.force_dist},
            {"rate_dist", c.box.rate_dist},
            {"euler", {c.box.euler.roll, c.box.euler.pitch, c.box.euler.yaw}}}}};
}

SimConfig sim_config_from_json(const json& doc) {
  require_object(doc, "simulation config");
  check_keys(doc, {"dt", "duration", "case", "initial_offset", "disturbance", "lambda_d", "gains", "seed"},
             "simulation config");
  SimConfig c;
  read(doc, "dt", c.dt);
  read(doc, "duration", c.duration);
  read(doc, "disturbance", c.disturbance);
  read(doc, "lambda_d", c.lambda_d);
  read(doc, "seed", c.seed);
  if (doc.contains("case")) {
    std::string s;
    read(doc, "case", s);
    try {
      c.sim_case = parse_sim_case(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (doc.contains("initial_offset")) {
    const json& o = doc.at("initial_offset");
    require_object(o, "initial_offset");
    check_keys(o, {"dp", "dv", "dR"}, "initial_offset");
    if (o.contains("dp")) c.offset.dp = vec3(o.at("dp"), "dp");
    if (o.contains("dv")) c.offset.dv = vec3(o.at("dv"), "dv");
    if (o.contains("dR")) c.offset.dR = vec3(o.at("dR"), "dR");
  }
  if (doc.contains("gains")) {
    const json& g = doc.at("gains");
    require_object(g, "gains");
    check_keys(g, {"K_p", "K_v", "K_R"}, "gains");
    if (g.contains("K_p")) c.gains.K_p = vec3(g.at("K_p"), "K_p").asDiagonal();
    if (g.contains("K_v")) c.gains.K_v = vec3(g.at("K_v"), "K_v").asDiagonal();
    if (g.contains("K_R")) c.gains.K_R = vec3(g.at("K_R"), "K_R").asDiagonal();
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json to_json(const SimConfig& c) {
  return {{"dt", c.dt},
          {"duration", c.duration},
          {"case", to_string(c.sim_case)},
          {"initial_offset",
           {{"dp", vec3_json(c.offset.dp)}, {"dv", vec3_json(c.offset.dv)}, {"dR", vec3_json(c.offset.dR)}}},
          {"disturbance", c.disturbance},
          {"lambda_d", c.lambda_d},
          {"gains",
           {{"K_p", vec3_json(c.gains.K_p.diagonal())},
            {"K_v", vec3_json(c.gains.K_v.diagonal())},
            {"K_R", vec3_json(c.gains.K_R.diagonal())}}},
          {"seed", c.seed}};
}

json to_json(const VerifyReport& r) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"n_check", r.n_check},
          {"seed", r.seed},
          {"violations", {{"R1", r.violations_R1}, {"R2", r.violations_R2}, {"C1", r.violations_C1}}},
          {"worst",
           {{"R1_max_eig", finite_or_null(r.R1_max_eig)},
            {"R2_min_eig", finite_or_null(r.R2_min_eig)},
            {"C1_max_eig", finite_or_null(r.C1_max_eig)},
            {"C2_frob_max", r.C2_frob_max},
            {"C3_frob_max", r.C3_frob_max}}},
          {"alpha", r.alpha},
          {"mu", r.mu}};
}

json to_json(const TubeSummary& s) {
  return {{"max_dev", s.max_dev},
          {"post_transient_max", s.post_transient_max},
          {"post_transient_mean", s.post_transient_mean},
          {"bound", s.bound},
          {"inside_fraction", s.inside_fraction},
          {"transient", s.transient},
          {"samples", s.samples}};
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_training_log(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,mean_loss,lpd_R1,lpd_R2,lpd_C1,frob_C2,frob_C3,lpd_bound,relu_alpha,alpha,mu\n";
  for (const EpochLog& e : log) {
    const LossTerms& t = e.terms;
    os << e.epoch << ',' << num(e.mean_loss) << ',' << num(t.lpd_R1) << ',' << num(t.lpd_R2) << ','
       << num(t.lpd_C1) << ',' << num(t.frob_C2) << ',' << num(t.frob_C3) << ',' << num(t.lpd_bound) << ','
       << num(t.relu_alpha) << ',' << num(e.alpha) << ',' << num(e.mu) << '\n';
  }
}

void write_trajectory_csv(std::ostream& os, const std::vector<NominalPoint>& traj,
                          const std::vector<double>& residual) {
  os << "t,px,py,pz,vx,vy,vz";
  for (int j = 1; j <= 3; ++j)
    for (int i = 1; i <= 3; ++i) os << ",r" << i << j;
  os << ",ft_over_m,wx,wy,wz";
  for (int k = 1; k <= 6; ++k) os << ",wstar" << k;
  os << ",residual\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const NominalPoint& n = traj[k];
    const Vec15 x = n.x_star.flatten();
    os << num(n.t);
    for (int i = 0; i < 15; ++i) os << ',' << num(x(i));
    const Eigen::Vector4d u = n.u_star.to_vector();
    for (int i = 0; i < 4; ++i) os << ',' << num(u(i));
    const auto w = n.w_star.to_vector();
    for (int i = 0; i < 6; ++i) os << ',' << num(w(i));
    os << ',' << (k < residual.size() ? num(residual[k]) : std::string("nan")) << '\n';
  }
}

void write_trace_csv(std::ostream& os, const SimTrace& trace) {
  os << "t,dev,px,py,pz,px_star,py_star,pz_star,ft,wx,wy,wz,fd_hat_x,fd_hat_y,fd_hat_z,fd_true_x,fd_true_y,"
        "fd_true_z\n";
  for (const TraceRecord& r : trace.records) {
    os << num(r.t) << ',' << num(r.dev);
    for (int i = 0; i < 3; ++i) os << ',' << num(r.x.p(i));
    for (int i = 0; i < 3; ++i) os << ',' << num(r.x_star.p(i));
    os << ',' << num(r.u.thrust_over_m);
    for (int i = 0; i < 3; ++i) os << ',' << num(r.u.omega_B(i));
    for (int i = 0; i < 3; ++i) os << ',' << num(r.f_d_hat(i));
    for (int i = 0; i < 3; ++i) os << ',' << num(r.f_d_true(i));
    os << '\n';
  }
}

}  // namespace rccm
