#include "sgnoma/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sgnoma/system_model.hpp"
#include "sgnoma/units.hpp"

namespace fs = std::filesystem;

namespace sgnoma {

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (...) {
    throw std::runtime_error("config: bad numeric value for '" + key + "': " + v);
  }
}

int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != std::floor(d)) throw std::runtime_error("config: expected integer for '" + key + "'");
  return static_cast<int>(d);
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out;
}

}  // namespace

std::string RequirementTuple::label() const {
  std::ostringstream os;
  os << "d" << fmt_g(latency_ms) << "ms_e" << fmt_g(dep) << "_r" << fmt_g(embb_rate_bps_hz);
  return os.str();
}

std::vector<RequirementTuple> default_requirement_tuples() {
  return {{2.0, 1e-2, 2.0}, {1.0, 1e-4, 4.0}, {0.5, 1e-5, 6.0}, {0.4, 1e-6, 8.0}};
}

ExperimentSpec parse_config(const std::string& text) {
  ExperimentSpec spec;
  std::map<int, RequirementTuple> tuples;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto& sc = spec.scenario;
    if (key == "scenario.name") spec.name = value;
    else if (key == "network.cell_radius_m") sc.cell_radius_m = parse_double(key, value);
    else if (key == "network.urllc_users") sc.urllc_users = parse_int(key, value);
    else if (key == "network.embb_users") sc.embb_users = parse_int(key, value);
    else if (key == "network.mmtc_users") sc.mmtc_users = parse_int(key, value);
    else if (key == "network.embb_numerology") sc.embb_numerology = parse_int(key, value);
    else if (key == "network.urllc_numerology") sc.urllc_numerology = parse_int(key, value);
    else if (key == "network.embb_subchannels") sc.embb_subchannels = parse_int(key, value);
    else if (key == "network.urllc_subchannels") sc.urllc_subchannels = parse_int(key, value);
    else if (key == "qos.embb_rate_bps_hz") sc.embb_rate_bps_hz = parse_double(key, value);
    else if (key == "qos.latency_ms") sc.latency_ms = parse_double(key, value);
    else if (key == "qos.dep") sc.dep = parse_double(key, value);
    else if (key == "qos.packet_bytes") sc.packet_bytes = parse_double(key, value);
    else if (key == "power.max_dbm") sc.max_power_dbm = parse_double(key, value);
    else if (key == "power.circuit_w") sc.circuit_power_w = parse_double(key, value);
    else if (key == "noise.figure_db") sc.noise_figure_db = parse_double(key, value);
    else if (key == "noise.psd_dbm_hz") sc.noise_psd_dbm_hz = parse_double(key, value);
    else if (key == "channel.rician_k_db") sc.rician_k_db = parse_double(key, value);
    else if (key == "channel.pathloss_ref_db") sc.pathloss_ref_db = parse_double(key, value);
    else if (key == "channel.pathloss_slope_db") sc.pathloss_slope_db = parse_double(key, value);
    else if (key == "train.episodes") spec.episodes = parse_int(key, value);
    else if (key == "train.timeslots") spec.timeslots = parse_int(key, value);
    else if (key == "train.target_sync") spec.target_sync = parse_int(key, value);
    else if (key == "train.eps_start") spec.eps_start = parse_double(key, value);
    else if (key == "train.eps_decay") spec.eps_decay = parse_double(key, value);
    else if (key == "train.eps_floor") spec.eps_floor = parse_double(key, value);
    else if (key == "train.learning_rate") spec.learning_rate = parse_double(key, value);
    else if (key == "train.discount") spec.discount = parse_double(key, value);
    else if (key == "train.reward_scale") spec.reward_scale = parse_double(key, value);
    else if (key == "train.batch") spec.batch = parse_int(key, value);
    else if (key == "train.replay_capacity") spec.replay_capacity = parse_int(key, value);
    else if (key == "rl.levels") spec.levels = parse_int(key, value);
    else if (key == "sweep.axis") spec.sweep_axis = value;
    else if (key == "sweep.values") {
      spec.sweep_values.clear();
      for (const auto& tok : split(value, ','))
        if (!tok.empty()) spec.sweep_values.push_back(parse_double(key, tok));
    } else if (key.rfind("sweep.requirement.", 0) == 0) {
      const int idx = parse_int(key, key.substr(std::string("sweep.requirement.").size()));
      const auto parts = split(value, ',');
      if (parts.size() != 3)
        throw std::runtime_error("config: '" + key + "' needs latency_ms,dep,rate_bps_hz");
      tuples[idx] = {parse_double(key, parts[0]), parse_double(key, parts[1]),
                     parse_double(key, parts[2])};
    } else if (key == "run.schemes") {
      spec.schemes.clear();
      for (const auto& tok : split(value, ',')) {
        const auto s = scheme_from_string(tok);
        if (!s) throw std::runtime_error("config: unknown scheme '" + tok + "' in run.schemes");
        spec.schemes.push_back(*s);
      }
    } else if (key == "run.replications") spec.replications = parse_int(key, value);
    else if (key == "run.seed") spec.base_seed = static_cast<std::uint64_t>(parse_double(key, value));
    else if (key == "run.out_dir") spec.out_dir = value;
    else if (key == "run.save_models") spec.save_models = parse_int(key, value) != 0;
    else if (key == "convergence.window") spec.convergence_window = parse_int(key, value);
    else if (key == "convergence.tol") spec.convergence_tol = parse_double(key, value);
    else throw std::runtime_error("config: unknown key '" + key + "'");
  }
  if (!tuples.empty()) {
    spec.requirement_tuples.clear();
    for (const auto& [idx, t] : tuples) spec.requirement_tuples.push_back(t);
  }
  // validation
  if (spec.replications < 1) throw std::runtime_error("config: run.replications must be >= 1");
  if (spec.episodes < 1) throw std::runtime_error("config: train.episodes must be >= 1");
  if (spec.timeslots < 1) throw std::runtime_error("config: train.timeslots must be >= 1");
  if (spec.levels < 1) throw std::runtime_error("config: rl.levels must be >= 1");
  if (spec.scenario.mmtc_users < 1) throw std::runtime_error("config: network.mmtc_users must be >= 1");
  if (spec.sweep_axis != "none" && spec.sweep_axis != "mmtc" && spec.sweep_axis != "requirements" &&
      spec.sweep_axis != "levels" && spec.sweep_axis != "scheme")
    throw std::runtime_error("config: unknown sweep.axis '" + spec.sweep_axis + "'");
  return spec;
}

ExperimentSpec load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const ExperimentSpec& spec) {
  std::ostringstream os;
  const auto& sc = spec.scenario;
  os << "scenario.name = " << spec.name << "\n";
  os << "network.cell_radius_m = " << fmt_g(sc.cell_radius_m) << "\n";
  os << "network.urllc_users = " << sc.urllc_users << "\n";
  os << "network.embb_users = " << sc.embb_users << "\n";
  os << "network.mmtc_users = " << sc.mmtc_users << "\n";
  os << "network.embb_numerology = " << sc.embb_numerology << "\n";
  os << "network.urllc_numerology = " << sc.urllc_numerology << "\n";
  os << "network.embb_subchannels = " << sc.embb_subchannels << "\n";
  os << "network.urllc_subchannels = " << sc.urllc_subchannels << "\n";
  os << "qos.embb_rate_bps_hz = " << fmt_g(sc.embb_rate_bps_hz) << "\n";
  os << "qos.latency_ms = " << fmt_g(sc.latency_ms) << "\n";
  os << "qos.dep = " << fmt_g(sc.dep) << "\n";
  os << "qos.packet_bytes = " << fmt_g(sc.packet_bytes) << "\n";
  os << "power.max_dbm = " << fmt_g(sc.max_power_dbm) << "\n";
  os << "power.circuit_w = " << fmt_g(sc.circuit_power_w) << "\n";
  os << "noise.figure_db = " << fmt_g(sc.noise_figure_db) << "\n";
  os << "noise.psd_dbm_hz = " << fmt_g(sc.noise_psd_dbm_hz) << "\n";
  os << "channel.rician_k_db = " << fmt_g(sc.rician_k_db) << "\n";
  os << "channel.pathloss_ref_db = " << fmt_g(sc.pathloss_ref_db) << "\n";
  os << "channel.pathloss_slope_db = " << fmt_g(sc.pathloss_slope_db) << "\n";
  os << "train.episodes = " << spec.episodes << "\n";
  os << "train.timeslots = " << spec.timeslots << "\n";
  os << "train.target_sync = " << spec.target_sync << "\n";
  os << "train.eps_start = " << fmt_g(spec.eps_start) << "\n";
  os << "train.eps_decay = " << fmt_g(spec.eps_decay) << "\n";
  os << "train.eps_floor = " << fmt_g(spec.eps_floor) << "\n";
  os << "train.learning_rate = " << fmt_g(spec.learning_rate) << "\n";
  os << "train.discount = " << fmt_g(spec.discount) << "\n";
  os << "train.reward_scale = " << fmt_g(spec.reward_scale) << "\n";
  os << "train.batch = " << spec.batch << "\n";
  os << "train.replay_capacity = " << spec.replay_capacity << "\n";
  os << "rl.levels = " << spec.levels << "\n";
  os << "sweep.axis = " << spec.sweep_axis << "\n";
  if (!spec.sweep_values.empty()) {
    os << "sweep.values = ";
    for (size_t i = 0; i < spec.sweep_values.size(); ++i)
      os << (i ? "," : "") << fmt_g(spec.sweep_values[i]);
    os << "\n";
  }
  for (size_t i = 0; i < spec.requirement_tuples.size(); ++i) {
    const auto& t = spec.requirement_tuples[i];
    os << "sweep.requirement." << (i + 1) << " = " << fmt_g(t.latency_ms) << ","
       << fmt_g(t.dep) << "," << fmt_g(t.embb_rate_bps_hz) << "\n";
  }
  os << "run.schemes = ";
  for (size_t i = 0; i < spec.schemes.size(); ++i)
    os << (i ? "," : "") << to_string(spec.schemes[i]);
  os << "\n";
  os << "run.replications = " << spec.replications << "\n";
  os << "run.seed = " << spec.base_seed << "\n";
  os << "run.out_dir = " << spec.out_dir << "\n";
  os << "run.save_models = " << (spec.save_models ? 1 : 0) << "\n";
  os << "convergence.window = " << spec.convergence_window << "\n";
  os << "convergence.tol = " << fmt_g(spec.convergence_tol) << "\n";
  return os.str();
}

void save_config(const ExperimentSpec& spec, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_config: cannot open " + path);
  os << format_config(spec);
}

NetworkConfig build_network(const ScenarioParams& params, std::uint64_t seed) {
  NetworkConfig net;
  net.cell_radius_m = params.cell_radius_m;
  net.pathloss_ref_db = params.pathloss_ref_db;
  net.pathloss_slope_db = params.pathloss_slope_db;
  net.rician_k_db = params.rician_k_db;
  net.noise.figure_db = params.noise_figure_db;
  net.noise.psd_dbm_hz = params.noise_psd_dbm_hz;
  net.noise.circuit_power_w = params.circuit_power_w;

  int sc_id = 0;
  for (int i = 0; i < params.urllc_subchannels; ++i, ++sc_id)
    net.subchannels.push_back({sc_id, params.urllc_numerology,
                               bandwidth_of(params.urllc_numerology), ServiceClass::Urllc});
  for (int i = 0; i < params.embb_subchannels; ++i, ++sc_id)
    net.subchannels.push_back({sc_id, params.embb_numerology,
                               bandwidth_of(params.embb_numerology), ServiceClass::Embb});

  const double w_e = bandwidth_of(params.embb_numerology);
  const double p_max = dbm_to_watt(params.max_power_dbm);
  Rng pos_rng(derive_seed(seed, 0x705ULL));
  auto place = [&](UserDevice& dev) {
    const double r = params.cell_radius_m * std::sqrt(pos_rng.uniform());
    const double phi = 2.0 * M_PI * pos_rng.uniform();
    dev.x_m = r * std::cos(phi);
    dev.y_m = r * std::sin(phi);
  };
  int uid = 0;
  for (int i = 0; i < params.urllc_users; ++i) {
    UserDevice dev;
    dev.id = uid++;
    dev.service = ServiceClass::Urllc;
    dev.max_power_w = p_max;
    dev.packet_bits = params.packet_bytes * 8.0;
    dev.latency_s = params.latency_ms * 1e-3;
    dev.dep = params.dep;
    place(dev);
    net.users.push_back(dev);
  }
  for (int i = 0; i < params.embb_users; ++i) {
    UserDevice dev;
    dev.id = uid++;
    dev.service = ServiceClass::Embb;
    dev.max_power_w = p_max;
    dev.rate_target_bps = params.embb_rate_bps_hz * w_e;
    place(dev);
    net.users.push_back(dev);
  }
  for (int i = 0; i < params.mmtc_users; ++i) {
    UserDevice dev;
    dev.id = uid++;
    dev.service = ServiceClass::Mmtc;
    dev.max_power_w = p_max;
    dev.packet_bits = params.packet_bytes * 8.0;
    dev.latency_s = params.latency_ms * 1e-3;
    dev.dep = params.dep;
    place(dev);
    net.users.push_back(dev);
  }
  grant_gb_round_robin(net);
  return net;
}

namespace {

struct Job {
  Scheme scheme;
  int sweep_index = 0;      // index into the sweep points
  std::string sweep_value;  // printable label
  int replication = 0;
  ScenarioParams scenario;
  int levels = 0;
  std::uint64_t seed = 0;
};

struct JobOutput {
  ResultRow row;
  double mean_episode_s = 0;
  std::string trace_path;
};

EpisodeConfig make_episode_config(const ExperimentSpec& spec, const Job& job) {
  EpisodeConfig cfg;
  cfg.episodes = spec.episodes;
  cfg.timeslots = spec.timeslots;
  cfg.target_sync = spec.target_sync;
  cfg.scheme = job.scheme;
  cfg.seed = job.seed;
  cfg.levels = job.levels;
  cfg.eps_start = spec.eps_start;
  cfg.eps_decay = spec.eps_decay;
  cfg.eps_floor = spec.eps_floor;
  cfg.agent.adam.lr = spec.learning_rate;
  cfg.agent.discount = spec.discount;
  cfg.agent.reward_scale = spec.reward_scale;
  cfg.agent.batch = spec.batch;
  cfg.agent.replay_capacity = static_cast<size_t>(spec.replay_capacity);
  cfg.tabular.alpha = spec.learning_rate;
  cfg.tabular.discount = spec.discount;
  cfg.tabular.reward_scale = spec.reward_scale;
  return cfg;
}

double window_mean(std::span<const double> v, int window) {
  if (v.empty()) return 0;
  const int w = std::min<int>(window, static_cast<int>(v.size()));
  double s = 0;
  for (size_t i = v.size() - w; i < v.size(); ++i) s += v[i];
  return s / w;
}

void write_trace_csv(const TrainingLog& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open trace file " + path);
  os << "episode,mean_reward,mean_loss,violation_rate,mean_zeta,epsilon\n";
  for (size_t i = 0; i < log.episodes.size(); ++i) {
    const auto& e = log.episodes[i];
    os << (i + 1) << "," << fmt_g(e.mean_reward) << "," << fmt_g(e.mean_loss) << ","
       << fmt_g(e.violation_rate) << "," << fmt_g(e.mean_zeta) << ","
       << fmt_g(e.epsilon) << "\n";
  }
}

}  // namespace

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SGNOMA_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 2;
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, int workers) {
  // enumerate sweep points
  struct Point {
    std::string label;
    ScenarioParams scenario;
    int levels;
    int index;
  };
  std::vector<Point> points;
  if (spec.sweep_axis == "mmtc") {
    auto values = spec.sweep_values.empty() ? std::vector<double>{2, 4, 6, 8} : spec.sweep_values;
    for (size_t i = 0; i < values.size(); ++i) {
      Point p{fmt_g(values[i]), spec.scenario, spec.levels, static_cast<int>(i)};
      p.scenario.mmtc_users = static_cast<int>(values[i]);
      points.push_back(std::move(p));
    }
  } else if (spec.sweep_axis == "requirements") {
    for (size_t i = 0; i < spec.requirement_tuples.size(); ++i) {
      const auto& t = spec.requirement_tuples[i];
      Point p{t.label(), spec.scenario, spec.levels, static_cast<int>(i)};
      p.scenario.latency_ms = t.latency_ms;
      p.scenario.dep = t.dep;
      p.scenario.embb_rate_bps_hz = t.embb_rate_bps_hz;
      points.push_back(std::move(p));
    }
  } else if (spec.sweep_axis == "levels") {
    auto values = spec.sweep_values.empty() ? std::vector<double>{2, 4} : spec.sweep_values;
    for (size_t i = 0; i < values.size(); ++i) {
      Point p{fmt_g(values[i]), spec.scenario, static_cast<int>(values[i]), static_cast<int>(i)};
      points.push_back(std::move(p));
    }
  } else {  // none / scheme: the scheme dimension is always enumerated
    points.push_back({"-", spec.scenario, spec.levels, 0});
  }

  std::vector<Job> jobs;
  for (Scheme scheme : spec.schemes)
    for (const auto& point : points)
      for (int rep = 0; rep < spec.replications; ++rep) {
        Job j;
        j.scheme = scheme;
        j.sweep_index = point.index;
        j.sweep_value = point.label;
        j.replication = rep;
        j.scenario = point.scenario;
        j.levels = point.levels;
        // scheme- and sweep-point-independent: every scheme sees the same
        // cell and fading, and sweep points compare paired drops (user sets
        // nest as counts grow, so trend checks are matched, not re-rolled)
        j.seed = derive_seed(spec.base_seed, static_cast<std::uint64_t>(rep));
        jobs.push_back(std::move(j));
      }

  fs::create_directories(spec.out_dir);
  fs::create_directories(spec.out_dir + "/traces");
  if (spec.save_models) fs::create_directories(spec.out_dir + "/models");

  std::vector<JobOutput> outputs(jobs.size());
  std::atomic<size_t> next{0};
  auto worker_fn = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) break;
      const Job& job = jobs[i];
      JobOutput& out = outputs[i];
      ResultRow& row = out.row;
      row.scenario = spec.name;
      row.scheme = to_string(job.scheme);
      row.sweep_axis = spec.sweep_axis;
      row.sweep_value = job.sweep_value;
      row.seed = job.seed;
      const std::string base = sanitize(spec.name) + "_" + sanitize(spec.sweep_axis) + "_" +
                               sanitize(job.sweep_value) + "_" + row.scheme + "_s" +
                               std::to_string(job.seed);
      try {
        const auto network = build_network(job.scenario, job.seed);
        const auto cfg = make_episode_config(spec, job);
        TrainedModels models;
        const auto log = run_training(network, cfg, &models);
        const auto rewards = log.episode_rewards();
        row.avg_ee = window_mean(rewards, spec.convergence_window);
        const auto conv =
            detect_convergence(rewards, spec.convergence_window, spec.convergence_tol);
        row.convergence_episode = conv.value_or(0);
        row.episodes_to_converge = conv.value_or(spec.episodes);
        row.violation_rate = [&] {
          double s = 0;
          const int w = std::min<int>(spec.convergence_window, static_cast<int>(log.episodes.size()));
          for (size_t e = log.episodes.size() - w; e < log.episodes.size(); ++e)
            s += log.episodes[e].violation_rate;
          return s / w;
        }();
        out.trace_path = spec.out_dir + "/traces/" + base + ".csv";
        write_trace_csv(log, out.trace_path);
        if (spec.save_models)
          for (size_t a = 0; a < models.online.size(); ++a)
            save_params_file(models.online[a],
                             spec.out_dir + "/models/" + base + "_agent" + std::to_string(a) + ".bin");
        if (!log.episode_wall_s.empty()) {
          double s = 0;
          for (double v : log.episode_wall_s) s += v;
          out.mean_episode_s = s / log.episode_wall_s.size();
        }
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
    }
  };

  const int n_workers = std::min<int>(resolve_workers(workers), static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int i = 1; i < n_workers; ++i) pool.emplace_back(worker_fn);
  worker_fn();
  for (auto& t : pool) t.join();

  std::vector<ResultRow> rows;
  rows.reserve(outputs.size());
  for (auto& o : outputs) rows.push_back(std::move(o.row));
  emit_csv(rows, spec.out_dir + "/results.csv");

  // wall-clock sidecar; deliberately not part of the deterministic outputs
  std::ofstream timings(spec.out_dir + "/timings.csv");
  timings << "scheme,sweep_value,seed,mean_episode_s,convergence_episode\n";
  for (size_t i = 0; i < outputs.size(); ++i)
    timings << rows[i].scheme << "," << rows[i].sweep_value << "," << rows[i].seed << ","
            << fmt_g(outputs[i].mean_episode_s) << "," << rows[i].convergence_episode << "\n";
  return rows;
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("emit_csv: cannot open " + path);
  os << "scenario,scheme,sweep_axis,sweep_value,seed,avg_ee_bits_per_joule,"
        "convergence_episode,episodes_to_converge,violation_rate,status\n";
  for (const auto& r : rows)
    os << r.scenario << "," << r.scheme << "," << r.sweep_axis << "," << r.sweep_value << ","
       << r.seed << "," << fmt_g(r.avg_ee) << "," << r.convergence_episode << ","
       << r.episodes_to_converge << "," << fmt_g(r.violation_rate) << "," << r.status << "\n";
  if (!os) throw std::runtime_error("emit_csv: write failed for " + path);
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_results_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) return {};
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() < 10) throw std::runtime_error("read_results_csv: malformed row: " + line);
    ResultRow r;
    r.scenario = f[0];
    r.scheme = f[1];
    r.sweep_axis = f[2];
    r.sweep_value = f[3];
    r.seed = static_cast<std::uint64_t>(std::stoull(f[4]));
    r.avg_ee = std::stod(f[5]);
    r.convergence_episode = std::stoi(f[6]);
    r.episodes_to_converge = std::stoi(f[7]);
    r.violation_rate = std::stod(f[8]);
    r.status = f[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ConvergenceSummaryRow> summarize_convergence(std::span<const RunTiming> runs) {
  std::vector<ConvergenceSummaryRow> out;
  for (const auto& run : runs) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const auto& r) { return r.scheme == run.scheme; });
    if (it == out.end()) {
      out.push_back({run.scheme, 0, 0, 0, 0});
      it = out.end() - 1;
    }
    it->avg_episode_s += run.mean_episode_s;
    it->episodes += run.convergence_episode;
    it->runs += 1;
  }
  for (auto& r : out) {
    if (r.runs > 0) {
      r.avg_episode_s /= r.runs;
      r.episodes /= r.runs;
    }
    r.convergence_s = r.avg_episode_s * r.episodes;
  }
  return out;
}

ConvergenceSummaryRow summarize_scheme(const std::string& name,
                                       std::span<const TrainingLog* const> logs,
                                       int window, double tol) {
  std::vector<RunTiming> runs;
  for (const auto* log : logs) {
    RunTiming t;
    t.scheme = name;
    const auto rewards = log->episode_rewards();
    t.convergence_episode = detect_convergence(rewards, window, tol).value_or(0);
    if (!log->episode_wall_s.empty()) {
      double s = 0;
      for (double v : log->episode_wall_s) s += v;
      t.mean_episode_s = s / log->episode_wall_s.size();
    }
    runs.push_back(std::move(t));
  }
  auto rows = summarize_convergence(runs);
  return rows.empty() ? ConvergenceSummaryRow{name, 0, 0, 0, 0} : rows.front();
}

std::string format_summary_table(std::span<const ConvergenceSummaryRow> rows) {
  std::ostringstream os;
  os << "scheme        avg s/episode   episodes   conv. time s   runs\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s  %13.4f  %9.1f  %13.2f  %5d\n", r.scheme.c_str(),
                  r.avg_episode_s, r.episodes, r.convergence_s, r.runs);
    os << buf;
  }
  return os.str();
}

}  // namespace sgnoma
