// Python bindings for the core operations: physical-layer math, constraint
// checks, the Dinkelbach power allocator, and the training loop.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sgnoma/experiment.hpp"
#include "sgnoma/gaussian.hpp"
#include "sgnoma/power_opt.hpp"
#include "sgnoma/system_model.hpp"
#include "sgnoma/trainer.hpp"
#include "sgnoma/units.hpp"

namespace py = pybind11;
using namespace sgnoma;

namespace {

Scheme parse_scheme(const std::string& name) {
  const auto s = scheme_from_string(name);
  if (!s) throw std::invalid_argument("unknown scheme: " + name);
  return *s;
}

py::dict report_to_dict(const ConstraintReport& report) {
  py::dict out;
  out["satisfied"] = report.satisfied;
  py::list violations;
  for (const auto& v : report.violations) {
    py::dict item;
    item["constraint"] = static_cast<int>(v.which);
    item["user"] = v.user;
    item["sc"] = v.sc;
    item["lhs"] = v.lhs;
    item["rhs"] = v.rhs;
    violations.append(item);
  }
  out["violations"] = violations;
  return out;
}

py::dict run_training_py(const NetworkConfig& net, const std::string& scheme,
                         int episodes, int timeslots, std::uint64_t seed, int levels,
                         double eps_decay) {
  EpisodeConfig cfg;
  cfg.scheme = parse_scheme(scheme);
  cfg.episodes = episodes;
  cfg.timeslots = timeslots;
  cfg.seed = seed;
  cfg.levels = levels;
  cfg.eps_decay = eps_decay;
  cfg.record_wall_time = false;
  const auto log = run_training(net, cfg);
  py::dict out;
  out["scheme"] = to_string(log.scheme);
  out["episode_rewards"] = log.episode_rewards();
  py::list violin;
  for (const auto& e : log.episodes) violin.append(e.violation_rate);
  out["violation_rate"] = violin;
  out["experiences_stored"] = log.experiences_stored;
  const auto conv = detect_convergence(log.episode_rewards());
  out["convergence_episode"] = conv ? py::cast(*conv) : py::none().cast<py::object>();
  return out;
}

}  // namespace

PYBIND11_MODULE(_sgnoma, m) {
  m.doc() = "semi-grant-free NOMA energy-efficiency simulator";

  m.def("bandwidth_of", &bandwidth_of, py::arg("numerology"),
        "SC bandwidth in Hz for numerology 0..4");
  m.def("inverse_q", &inverse_q, py::arg("p"), "inverse Gaussian Q-function");
  m.def(
      "noise_power",
      [](double figure_db, double psd_dbm_hz, double bandwidth_hz) {
        return noise_power(NoiseModel{figure_db, psd_dbm_hz, 0.05}, bandwidth_hz);
      },
      py::arg("figure_db"), py::arg("psd_dbm_hz"), py::arg("bandwidth_hz"),
      "thermal noise power in W over a bandwidth");
  m.def("target_snr", &target_snr, py::arg("packet_bits"), py::arg("latency_s"),
        py::arg("bandwidth_hz"), py::arg("dep"));
  m.def("rate_urllc", &rate_urllc, py::arg("sinr"), py::arg("bandwidth_hz"),
        py::arg("latency_s"), py::arg("dep"));
  m.def("rate_mmtc", &rate_mmtc, py::arg("sinr"), py::arg("bandwidth_hz"),
        py::arg("latency_s"), py::arg("dep"));
  m.def("rate_embb", &rate_embb, py::arg("sinr"), py::arg("bandwidth_hz"));
  m.def(
      "sinr_chain",
      [](const std::vector<double>& received_w, double noise_w) {
        return sinr_chain(received_w, noise_w);
      },
      py::arg("received_powers_w"), py::arg("noise_w"),
      "per-user SINR down an ordered SIC chain");
  m.def("db_to_linear", &db_to_linear);
  m.def("dbm_to_watt", &dbm_to_watt);

  py::class_<ScenarioParams>(m, "ScenarioParams")
      .def(py::init<>())
      .def_readwrite("cell_radius_m", &ScenarioParams::cell_radius_m)
      .def_readwrite("urllc_users", &ScenarioParams::urllc_users)
      .def_readwrite("embb_users", &ScenarioParams::embb_users)
      .def_readwrite("mmtc_users", &ScenarioParams::mmtc_users)
      .def_readwrite("embb_numerology", &ScenarioParams::embb_numerology)
      .def_readwrite("urllc_numerology", &ScenarioParams::urllc_numerology)
      .def_readwrite("embb_subchannels", &ScenarioParams::embb_subchannels)
      .def_readwrite("urllc_subchannels", &ScenarioParams::urllc_subchannels)
      .def_readwrite("embb_rate_bps_hz", &ScenarioParams::embb_rate_bps_hz)
      .def_readwrite("latency_ms", &ScenarioParams::latency_ms)
      .def_readwrite("dep", &ScenarioParams::dep)
      .def_readwrite("packet_bytes", &ScenarioParams::packet_bytes)
      .def_readwrite("max_power_dbm", &ScenarioParams::max_power_dbm)
      .def_readwrite("rician_k_db", &ScenarioParams::rician_k_db);

  py::class_<NetworkConfig>(m, "NetworkConfig")
      .def_property_readonly("num_users", &NetworkConfig::num_users)
      .def_property_readonly("num_subchannels", &NetworkConfig::num_subchannels)
      .def("noise_power_w", &NetworkConfig::noise_power_w, py::arg("sc"))
      .def("gb_grants", [](const NetworkConfig& n) { return n.gb_grants; })
      .def("user_service", [](const NetworkConfig& n, int user) {
        return to_string(n.users.at(user).service);
      });

  m.def("build_network", &build_network, py::arg("params"), py::arg("seed"),
        "instantiate a cell with seeded uniform-in-disk user positions");

  py::class_<ChannelRealization>(m, "ChannelRealization")
      .def_readonly("t", &ChannelRealization::t)
      .def("gain", py::overload_cast<int, int>(&ChannelRealization::gain, py::const_),
           py::arg("user"), py::arg("sc"));

  m.def(
      "generate_channels",
      [](const NetworkConfig& net, std::uint64_t seed, int t) {
        return generate_channels(net, seed, t);
      },
      py::arg("network"), py::arg("seed"), py::arg("t"));

  py::class_<AllocationState>(m, "AllocationState")
      .def(py::init([](const NetworkConfig& net) {
             return AllocationState::zeros(net.num_users(), net.num_subchannels());
           }),
           py::arg("network"))
      .def("assign", &AllocationState::assign, py::arg("user"), py::arg("sc"),
           py::arg("power_w"))
      .def("clear", &AllocationState::clear, py::arg("user"), py::arg("sc"))
      .def("occupied", &AllocationState::occupied, py::arg("user"), py::arg("sc"))
      .def("power", &AllocationState::power, py::arg("user"), py::arg("sc"))
      .def("total_power", py::overload_cast<>(&AllocationState::total_power, py::const_));

  m.def(
      "check_constraints",
      [](const AllocationState& st, const ChannelRealization& ch, const NetworkConfig& net) {
        return report_to_dict(check_constraints(st, ch, net));
      },
      py::arg("state"), py::arg("channels"), py::arg("network"));
  m.def(
      "ee_factor",
      [](const AllocationState& st, const ChannelRealization& ch, const NetworkConfig& net) {
        return ee_factor(st, ch, net);
      },
      py::arg("state"), py::arg("channels"), py::arg("network"));

  m.def(
      "dinkelbach_allocate",
      [](const NetworkConfig& net, const ChannelRealization& ch,
         const std::vector<std::pair<int, int>>& assignment) {
        auto b = AllocationState::zeros(net.num_users(), net.num_subchannels());
        for (const auto& [user, sc] : assignment)
          b.b[static_cast<size_t>(user) * net.num_subchannels() + sc] = 1;
        const auto res = dinkelbach_allocate(b, ch, net);
        py::dict out;
        out["feasible"] = res.feasible;
        out["converged"] = res.converged;
        out["zeta"] = res.zeta;
        out["iterations"] = res.iterations;
        out["zeta_trace"] = res.zeta_trace;
        py::list powers;
        if (res.feasible) {
          for (int u = 0; u < res.state.users; ++u) {
            py::list row;
            for (int sc = 0; sc < res.state.subchannels; ++sc)
              row.append(res.state.power(u, sc));
            powers.append(row);
          }
        }
        out["powers_w"] = powers;
        return out;
      },
      py::arg("network"), py::arg("channels"), py::arg("assignment"),
      "EE-optimal powers for a fixed SC assignment [(user, sc), ...]");

  m.def("run_training", &run_training_py, py::arg("network"), py::arg("scheme"),
        py::arg("episodes") = 10, py::arg("timeslots") = 20, py::arg("seed") = 1,
        py::arg("levels") = 4, py::arg("eps_decay") = 0.995);

  m.def("load_config", &load_config, py::arg("path"));
  py::class_<ExperimentSpec>(m, "ExperimentSpec")
      .def(py::init<>())
      .def_readwrite("name", &ExperimentSpec::name)
      .def_readwrite("scenario", &ExperimentSpec::scenario)
      .def_readwrite("episodes", &ExperimentSpec::episodes)
      .def_readwrite("timeslots", &ExperimentSpec::timeslots)
      .def_readwrite("replications", &ExperimentSpec::replications)
      .def_readwrite("base_seed", &ExperimentSpec::base_seed)
      .def_readwrite("out_dir", &ExperimentSpec::out_dir)
      .def_readwrite("sweep_axis", &ExperimentSpec::sweep_axis);
  m.def(
      "run_experiment",
      [](const ExperimentSpec& spec, int workers) {
        const auto rows = run_experiment(spec, workers);
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["scheme"] = r.scheme;
          d["sweep_value"] = r.sweep_value;
          d["seed"] = r.seed;
          d["avg_ee"] = r.avg_ee;
          d["convergence_episode"] = r.convergence_episode;
          d["violation_rate"] = r.violation_rate;
          d["status"] = r.status;
          out.append(d);
        }
        return out;
      },
      py::arg("spec"), py::arg("workers") = 0);
}
