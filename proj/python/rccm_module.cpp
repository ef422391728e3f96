#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rccm/io.hpp"

namespace py = pybind11;
using namespace rccm;

namespace {

QuadrotorModel& model() {
  static QuadrotorModel m;
  return m;
}

py::dict trace_to_dict(const SimTrace& tr) {
  const Eigen::Index N = static_cast<Eigen::Index>(tr.records.size());
  VectorXd t(N), dev(N);
  MatrixXd x(N, 15), x_star(N, 15), u(N, 4), fd_hat(N, 3), fd_true(N, 3);
  for (Eigen::Index k = 0; k < N; ++k) {
    const TraceRecord& r = tr.records[static_cast<std::size_t>(k)];
    t(k) = r.t;
    dev(k) = r.dev;
    x.row(k) = r.x.flatten().transpose();
    x_star.row(k) = r.x_star.flatten().transpose();
    u.row(k) = r.u.to_vector().transpose();
    fd_hat.row(k) = r.f_d_hat.transpose();
    fd_true.row(k) = r.f_d_true.transpose();
  }
  py::dict d;
  d["t"] = t;
  d["dev"] = dev;
  d["x"] = x;
  d["x_star"] = x_star;
  d["u"] = u;
  d["fd_hat"] = fd_hat;
  d["fd_true"] = fd_true;
  return d;
}

}  // namespace

PYBIND11_MODULE(_rccm, m) {
  m.doc() = "Neural RCCM on R^6 x SO(3): manifold helpers, certificates, planner and simulator";

  m.def("hat", &hat);
  m.def("vee", &vee);
  m.def("rotation_exp", &rotation_exp);
  m.def("euler_zyx", &euler_zyx, py::arg("roll"), py::arg("pitch"), py::arg("yaw"));
  m.def("tangent_basis", [](const VectorXd& x) { return MatrixXd(model().tangent_basis(x)); });
  m.def("projection", [](const VectorXd& x) { return MatrixXd(model().projection(x)); });
  m.def("e_perp", [](const VectorXd& x) { return model().e_perp(x); });
  m.def("e_factor", [](const VectorXd& x) { return model().e_factor(x); });
  m.def("transversality_residual",
        [](const VectorXd& x) { return model().transversality_residual(LieState::unflatten(x)); });
  m.def("vector_field", [](const VectorXd& x, const VectorXd& u, const VectorXd& w) {
    return VectorXd(model().vector_field(x, u, w));
  });
  m.def("error_function", [](const VectorXd& x, const VectorXd& x_star) { return model().error(x, x_star); });

  m.def("disturbance_true", [](double t) { return VectorXd(disturbance_true(t).to_vector()); });
  m.def("disturbance_bound", [] { return disturbance_bound(); });

  py::class_<NeuralCertificate>(m, "Certificate")
      .def_static("load", &load_certificate)
      .def("save", [](const NeuralCertificate& c, const std::string& path) { save_certificate(path, c); })
      .def_property_readonly("alpha", &NeuralCertificate::alpha)
      .def_property_readonly("mu", &NeuralCertificate::mu)
      .def("dual_metric", [](const NeuralCertificate& c, const VectorXd& x) { return eval_dual_metric(c, x); })
      .def("metric", [](const NeuralCertificate& c, const VectorXd& x) { return eval_metric(c, x); })
      .def("controller",
           [](const NeuralCertificate& c, const VectorXd& x, const VectorXd& x_star, const VectorXd& u_star) {
             return eval_controller(c, model(), x, x_star, u_star);
           });

  m.def(
      "train",
      [](const std::string& config_json) {
        const TrainConfig cfg = train_config_from_json(json::parse(config_json));
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(model(), cfg);
        }
        std::vector<double> losses, alphas;
        for (const EpochLog& e : r.log) {
          losses.push_back(e.mean_loss);
          alphas.push_back(e.alpha);
        }
        return py::make_tuple(r.cert, losses, alphas);
      },
      py::arg("config_json") = "{}", "Returns (certificate, per-epoch mean loss, per-epoch alpha).");

  m.def(
      "verify",
      [](const NeuralCertificate& cert, std::size_t n, std::uint64_t seed) {
        return to_json(verify_fresh(model(), cert, n, seed)).dump();
      },
      py::arg("cert"), py::arg("n") = 4096, py::arg("seed") = 0, "Verification report as a JSON string.");

  m.def(
      "plan",
      [](double t0, double t1, double dt) {
        const auto traj = nominal_trajectory(spiral_reference, uniform_grid(t0, t1, dt), {}, model().params());
        const auto res = consistency_residuals(model(), traj);
        const Eigen::Index N = static_cast<Eigen::Index>(traj.size());
        VectorXd t(N);
        MatrixXd x(N, 15), u(N, 4);
        for (Eigen::Index k = 0; k < N; ++k) {
          const NominalPoint& p = traj[static_cast<std::size_t>(k)];
          t(k) = p.t;
          x.row(k) = p.x_star.flatten().transpose();
          u.row(k) = p.u_star.to_vector().transpose();
        }
        py::dict d;
        d["t"] = t;
        d["x"] = x;
        d["u"] = u;
        d["residual"] = VectorXd(Eigen::Map<const VectorXd>(res.data(), N));
        return d;
      },
      py::arg("t0") = 0.0, py::arg("t1") = 20.0, py::arg("dt") = 0.002);

  m.def(
      "simulate",
      [](const std::string& sim_case, const NeuralCertificate* cert, double duration) {
        SimConfig cfg;
        cfg.sim_case = parse_sim_case(sim_case);
        cfg.duration = duration;
        SimTrace tr;
        {
          py::gil_scoped_release release;
          tr = run_case(model(), cert, cfg);
        }
        return trace_to_dict(tr);
      },
      py::arg("case") = "geometric", py::arg("cert") = nullptr, py::arg("duration") = 20.0);
}
