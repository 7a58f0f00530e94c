// Python bindings for the core operations: scene/channel simulation, the
// adaptive policy, baselines and the experiment harness.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "risloc/baselines/crlb.hpp"
#include "risloc/baselines/fingerprint.hpp"
#include "risloc/baselines/static_dnn.hpp"
#include "risloc/errors.hpp"
#include "risloc/graph_suite.hpp"
#include "risloc/harness/experiment.hpp"
#include "risloc/train.hpp"

namespace py = pybind11;
using namespace risloc;

namespace {

Scene scene_from_json_str(const std::string& text) { return Scene::from_json(text); }

py::dict trace_to_dict(const policy::EpisodeTrace& trace) {
  py::dict d;
  d["theta"] = trace.theta;
  d["y"] = trace.y;
  d["feature"] = trace.feature;
  d["p_hat"] = trace.p_hat;
  d["final_estimate"] = trace.final_estimate();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive RIS localization: channel simulation, LSTM policy, "
            "baselines and experiment harness";

  py::register_exception<DegenerateGeometryError>(m, "DegenerateGeometryError");
  py::register_exception<DimensionError>(m, "DimensionError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NumericError>(m, "NumericError");

  py::class_<PathlossModel>(m, "PathlossModel")
      .def(py::init<double, double>(), py::arg("a"), py::arg("b"))
      .def_readwrite("a", &PathlossModel::a)
      .def_readwrite("b", &PathlossModel::b);

  py::class_<Scene>(m, "Scene")
      .def(py::init<>())
      .def_static("from_json", &scene_from_json_str)
      .def_static("from_json_file", &Scene::from_json_file)
      .def("to_json", &Scene::to_json)
      .def("save_json_file", &Scene::save_json_file)
      .def("fingerprint", &Scene::fingerprint)
      .def("num_elements", &Scene::num_elements)
      .def_readwrite("bs_position", &Scene::bs_position)
      .def_readwrite("ris_position", &Scene::ris_position)
      .def_readwrite("ris_rows", &Scene::ris_rows)
      .def_readwrite("ris_cols", &Scene::ris_cols)
      .def_readwrite("spacing_factor", &Scene::spacing_factor)
      .def_readwrite("rician_factor", &Scene::rician_factor)
      .def_readwrite("noise_power", &Scene::noise_power);

  py::class_<AnglePair>(m, "AnglePair")
      .def_readonly("sin_az_cos_el", &AnglePair::sin_az_cos_el)
      .def_readonly("sin_el", &AnglePair::sin_el);

  py::class_<ChannelRealization>(m, "ChannelRealization")
      .def_readonly("h_d", &ChannelRealization::h_d)
      .def_readonly("h_r", &ChannelRealization::h_r)
      .def_readonly("g_r", &ChannelRealization::g_r)
      .def_readonly("v_r", &ChannelRealization::v_r);

  py::class_<PilotParams>(m, "PilotParams")
      .def(py::init<>())
      .def_readwrite("power", &PilotParams::power)
      .def_readwrite("pilot_symbol", &PilotParams::pilot_symbol)
      .def_readwrite("frames", &PilotParams::frames);

  m.def("snr_to_power", &snr_to_power, py::arg("snr_db"));
  m.def("pathloss_amplitude", &pathloss_amplitude, py::arg("distance"),
        py::arg("model"));
  m.def(
      "angles_from_positions",
      [](const Eigen::Vector3d& source, const Eigen::Vector3d& ris) {
        const AnglePair a = angles_from_positions(source, ris);
        return std::make_pair(a.sin_az_cos_el, a.sin_el);
      },
      py::arg("source"), py::arg("ris_position"));
  m.def(
      "steering_vector",
      [](double sin_az_cos_el, double sin_el, const Scene& scene) {
        return steering_vector({sin_az_cos_el, sin_el}, scene);
      },
      py::arg("sin_az_cos_el"), py::arg("sin_el"), py::arg("scene"));
  m.def(
      "sample_ue_position",
      [](const Scene& scene, std::uint64_t seed, std::uint64_t index) {
        Rng rng(seed, index, StreamRole::kUePosition);
        return sample_ue_position(scene, rng);
      },
      py::arg("scene"), py::arg("seed"), py::arg("index"));
  m.def(
      "sample_channel",
      [](const Scene& scene, const Eigen::Vector3d& ue, std::uint64_t seed,
         std::uint64_t index) {
        return sample_channel(scene, ue, {seed, index});
      },
      py::arg("scene"), py::arg("ue_position"), py::arg("seed"),
      py::arg("index"));
  m.def(
      "measure",
      [](const ChannelRealization& ch, const Eigen::VectorXcd& theta,
         const PilotParams& pilot, double noise_var, std::uint64_t seed,
         std::uint64_t index) {
        Rng rng(seed, index, StreamRole::kNoise);
        return measure(ch, theta, pilot, noise_var, rng);
      },
      py::arg("channel"), py::arg("theta"), py::arg("pilot"),
      py::arg("noise_var"), py::arg("seed"), py::arg("index"));

  // --- policy ---
  py::class_<policy::Policy>(m, "Policy")
      .def("num_elements", [](const policy::Policy& p) { return p.dims.n; })
      .def("feature_mode",
           [](const policy::Policy& p) { return policy::to_string(p.dims.mode); });

  m.def(
      "init_policy",
      [](int n, int hidden, int head_width, const std::string& mode,
         std::uint64_t seed) {
        policy::PolicyDims dims;
        dims.n = n;
        dims.hidden = hidden;
        dims.head_width = head_width;
        dims.mode = policy::feature_mode_from_string(mode);
        return policy::Policy::init(dims, seed);
      },
      py::arg("n"), py::arg("hidden") = 512, py::arg("head_width") = 1024,
      py::arg("mode") = "pilot", py::arg("seed") = 1);

  m.def(
      "run_episode",
      [](const Scene& scene, const ChannelRealization& ch,
         const PilotParams& pilot, const policy::Policy& policy_,
         double noise_var, std::uint64_t seed, std::uint64_t index) {
        Rng rng(seed, index, StreamRole::kNoise);
        return trace_to_dict(policy::run_episode(scene, ch, pilot, policy_,
                                                 noise_var, rng));
      },
      py::arg("scene"), py::arg("channel"), py::arg("pilot"),
      py::arg("policy"), py::arg("noise_var"), py::arg("seed"),
      py::arg("index"));

  m.def("load_policy_checkpoint",
        [](const std::string& path, const Scene& scene) {
          return policy::load_policy_checkpoint(path, scene).policy;
        });
  m.def(
      "save_policy_checkpoint",
      [](const std::string& path, const policy::Policy& p, const Scene& scene,
         int frames, const std::string& loss, double snr_db) {
        policy::save_policy_checkpoint(path, p, scene, frames,
                                       policy::loss_kind_from_string(loss),
                                       snr_db, 0);
      },
      py::arg("path"), py::arg("policy"), py::arg("scene"), py::arg("frames"),
      py::arg("loss") = "final", py::arg("snr_db") = 20.0);

  m.def(
      "train_policy",
      [](const Scene& scene, int frames, int hidden, int head_width,
         const std::string& mode, std::int64_t samples, int batch, double lr,
         const std::string& loss, double snr_db, std::uint64_t seed,
         int val_episodes, std::int64_t warmup_samples, int epoch_steps) {
        policy::PolicyDims dims;
        dims.n = scene.num_elements();
        dims.hidden = hidden;
        dims.head_width = head_width;
        dims.mode = policy::feature_mode_from_string(mode);
        policy::TrainConfig tc;
        tc.samples = samples;
        tc.batch = batch;
        tc.lr = lr;
        tc.loss = policy::loss_kind_from_string(loss);
        tc.snr_db = snr_db;
        tc.seed = seed;
        tc.val_episodes = val_episodes;
        tc.warmup_samples = warmup_samples;
        tc.epoch_steps = epoch_steps;
        const policy::TrainResult result =
            policy::train_policy(scene, frames, dims, tc);
        py::dict d;
        d["policy"] = result.policy;
        d["best_val_mse"] = result.best_val_mse;
        d["steps_run"] = result.steps_run;
        return d;
      },
      py::arg("scene"), py::arg("frames"), py::arg("hidden") = 512,
      py::arg("head_width") = 1024, py::arg("mode") = "pilot",
      py::arg("samples") = 2048, py::arg("batch") = 64, py::arg("lr") = 1e-3,
      py::arg("loss") = "final", py::arg("snr_db") = 20.0, py::arg("seed") = 1,
      py::arg("val_episodes") = 64, py::arg("warmup_samples") = 256,
      py::arg("epoch_steps") = 8);

  m.def(
      "evaluate_policy",
      [](const Scene& scene, const policy::Policy& p, int frames, double snr_db,
         int episodes, std::uint64_t seed) {
        const policy::PolicyEvaluation ev = policy::evaluate_policy(
            scene, p, frames, snr_to_power(snr_db), episodes, seed);
        py::dict d;
        d["frame_err_sq"] = ev.frame_err_sq;
        d["final_mse"] = ev.final_mse();
        d["max_theta_deviation"] = ev.max_theta_deviation;
        return d;
      },
      py::arg("scene"), py::arg("policy"), py::arg("frames"),
      py::arg("snr_db"), py::arg("episodes"), py::arg("seed"));

  // --- baselines ---
  py::class_<baselines::FingerprintDB>(m, "FingerprintDB")
      .def_readonly("frames", &baselines::FingerprintDB::frames)
      .def_readonly("rss", &baselines::FingerprintDB::rss)
      .def("block_count",
           [](const baselines::FingerprintDB& db) { return db.grid.count(); })
      .def("block_center",
           [](const baselines::FingerprintDB& db, int index) {
             return db.grid.center(index);
           })
      .def("save", &baselines::FingerprintDB::save)
      .def_static("load", &baselines::FingerprintDB::load);

  m.def("random_theta_sequence", &baselines::random_theta_sequence,
        py::arg("frames"), py::arg("n"), py::arg("seed"));
  m.def(
      "build_fingerprints",
      [](const Scene& scene, const PilotParams& pilot,
         const std::vector<Eigen::VectorXcd>& thetas, int m_real,
         std::uint64_t seed) {
        return baselines::build_fingerprints(scene, pilot, thetas, m_real, seed);
      },
      py::arg("scene"), py::arg("pilot"), py::arg("thetas"),
      py::arg("realizations_per_block"), py::arg("seed"));
  m.def("wknn_localize", &baselines::wknn_localize, py::arg("db"),
        py::arg("rss_query"), py::arg("k"));

  m.def(
      "fisher_info",
      [](const Eigen::Vector3d& position,
         const std::vector<Eigen::VectorXcd>& thetas, const Scene& scene,
         const PilotParams& pilot) {
        return baselines::fisher_info(position, thetas, scene, pilot).info;
      },
      py::arg("position"), py::arg("thetas"), py::arg("scene"),
      py::arg("pilot"));
  m.def(
      "map_estimate",
      [](const std::vector<std::complex<double>>& ys,
         const std::vector<Eigen::VectorXcd>& thetas, const Scene& scene,
         const PilotParams& pilot, double grid_pitch, int refine_steps) {
        baselines::MapConfig cfg;
        cfg.grid_pitch = grid_pitch;
        cfg.refine_steps = refine_steps;
        return baselines::map_estimate(ys, thetas, scene, pilot, cfg);
      },
      py::arg("measurements"), py::arg("thetas"), py::arg("scene"),
      py::arg("pilot"), py::arg("grid_pitch") = 2.0,
      py::arg("refine_steps") = 50);
  m.def(
      "crlb_gd_next_theta",
      [](const Eigen::Vector3d& p_hat,
         const std::vector<Eigen::VectorXcd>& past, const Scene& scene,
         const PilotParams& pilot, int iterations, double step, int restarts,
         std::uint64_t seed) {
        baselines::GdConfig cfg;
        cfg.iterations = iterations;
        cfg.step = step;
        cfg.restarts = restarts;
        Rng rng(seed, 0, StreamRole::kThetaDesign);
        return baselines::crlb_gd_next_theta(p_hat, past, scene, pilot, cfg,
                                             rng)
            .theta;
      },
      py::arg("position_estimate"), py::arg("past_thetas"), py::arg("scene"),
      py::arg("pilot"), py::arg("iterations") = 100, py::arg("step") = 0.1,
      py::arg("restarts") = 3, py::arg("seed") = 0);

  // --- harness ---
  m.def("run_experiment", [](const std::string& config_path) {
    const auto config = harness::ExperimentConfig::load(config_path);
    const auto table = harness::run_experiment(config);
    py::list rows;
    for (const auto& r : table.rows) {
      py::dict d;
      d["method"] = r.method;
      d["snr_db"] = r.snr_db;
      d["frames"] = r.frames;
      d["episodes"] = r.episodes;
      d["mse_m2"] = r.mse;
      d["rmse_m"] = r.rmse;
      d["median_m"] = r.median_err;
      rows.append(d);
    }
    return rows;
  });

  m.def("grad_check_suite", [](int graphs, std::uint64_t seed) {
    const ad::SuiteResult r = ad::run_grad_check_suite(graphs, seed);
    py::dict d;
    d["graphs"] = r.graphs;
    d["max_rel_error"] = r.max_rel_error;
    d["worst_graph"] = r.worst_graph;
    return d;
  });

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
