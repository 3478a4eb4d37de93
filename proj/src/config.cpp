#include "cdoa/config.hpp"

#include <fstream>
#include <sstream>

namespace cdoa {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::Matrix2d& m) {
  return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

Eigen::Matrix2d matrix_from_json(const json& j, const char* name) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_array() || j[0].size() != 2 ||
      !j[1].is_array() || j[1].size() != 2)
    throw InvalidArgument(std::string("config: ") + name + " must be a 2x2 array");
  Eigen::Matrix2d m;
  m << j[0][0].get<double>(), j[0][1].get<double>(), j[1][0].get<double>(), j[1][1].get<double>();
  return m;
}

std::string resampling_name(Resampling r) {
  return r == Resampling::Multinomial ? "multinomial" : "systematic";
}

Resampling parse_resampling(const std::string& s) {
  if (s == "multinomial") return Resampling::Multinomial;
  if (s == "systematic") return Resampling::Systematic;
  throw InvalidArgument("config: unknown resampling '" + s + "'");
}

std::string baseline_input_name(BaselineInput b) { return b == BaselineInput::Raw ? "raw" : "window"; }

BaselineInput parse_baseline_input(const std::string& s) {
  if (s == "raw") return BaselineInput::Raw;
  if (s == "window") return BaselineInput::Window;
  throw InvalidArgument("config: unknown baseline_input '" + s + "'");
}

// Rejects keys in `user` that the schema `schema` does not know about.
void check_keys(const json& user, const json& schema, const std::string& path) {
  if (!user.is_object() || !schema.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) throw InvalidArgument("config: unknown key '" + here + "'");
    check_keys(value, schema[key], here);
  }
}

}  // namespace

void Hyperparams::validate() const {
  if (window_len < 1) throw InvalidArgument("window_len must be >= 1");
  if (!(ewma_alpha >= 0.0 && ewma_alpha <= 1.0)) throw InvalidArgument("ewma_alpha must be in [0, 1]");
  if (window < 1) throw InvalidArgument("window must be >= 1");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be > 0");
  if (gradient != "auto") (void)parse_gradient_method(gradient);
  pf.validate();
  if (!(em_resolution > 0.0)) throw InvalidArgument("em_resolution must be > 0");
  if (!(odometry_noise_std >= 0.0)) throw InvalidArgument("odometry_noise_std must be >= 0");
  baselines.validate();
}

NodeLayout ExperimentConfig::layout() const {
  if (nodes.empty()) return NodeLayout::corners(workspace, sensing_range);
  return NodeLayout::create(nodes, sensing_range);
}

std::vector<double> ExperimentConfig::effective_noise_levels() const {
  return noise_levels.empty() ? std::vector<double>{channel.noise_std} : noise_levels;
}

std::vector<Trajectory> ExperimentConfig::build_trajectories() const {
  std::vector<Trajectory> out;
  for (auto kind : trajectories) {
    if (kind == TrajectoryKind::Custom)
      out.push_back(custom_trajectory(custom_waypoints, workspace, trajectory_step));
    else
      out.push_back(generate_trajectory(workspace, kind, trajectory_step, lane_spacing));
  }
  return out;
}

void ExperimentConfig::validate() const {
  (void)Workspace::create(workspace.x_min, workspace.x_max, workspace.y_min, workspace.y_max);
  (void)layout();
  channel.validate();
  for (double n : noise_levels) {
    ChannelModel c = channel;
    c.noise_std = n;
    c.validate();
  }
  if (methods.empty()) throw InvalidArgument("config: no method selected");
  hyper.validate();
  if (trajectories.empty()) throw InvalidArgument("config: no trajectory selected");
  if (trials < 1) throw InvalidArgument("config: trials must be >= 1");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["workspace"] = {{"x_min", c.workspace.x_min},
                    {"x_max", c.workspace.x_max},
                    {"y_min", c.workspace.y_min},
                    {"y_max", c.workspace.y_max}};
  json nodes = json::array();
  for (const auto& n : c.nodes) nodes.push_back({{"id", n.id}, {"x", n.pos.x()}, {"y", n.pos.y()}});
  j["layout"] = {{"nodes", nodes}, {"sensing_range", c.sensing_range}};
  j["channel"] = {{"ref_rssi_a", c.channel.ref_rssi_a},
                  {"path_loss_eta", c.channel.path_loss_eta},
                  {"noise_std", c.channel.noise_std},
                  {"min_distance", c.channel.min_distance},
                  {"noise_levels", c.noise_levels}};
  j["method"] = c.methods;
  const auto& h = c.hyper;
  const auto& b = h.baselines;
  j["hyperparams"] = {
      {"window_len", h.window_len},
      {"ewma_alpha", h.ewma_alpha},
      {"window", h.window},
      {"sigma", h.sigma},
      {"gradient", h.gradient},
      {"bearing", std::string(to_string(h.bearing))},
      {"particles", h.pf.particles},
      {"pf_resolution", h.pf.resolution},
      {"motion_std", h.pf.motion_std},
      {"resampling", resampling_name(h.pf.resampling)},
      {"em_resolution", h.em_resolution},
      {"em_prune", h.em_prune},
      {"use_odometry", h.use_odometry},
      {"odometry_noise_std", h.odometry_noise_std},
      {"baseline_input", baseline_input_name(h.baseline_input)},
      {"baselines",
       {{"grid_resolution", b.grid_resolution},
        {"irssi_k", b.irssi_k},
        {"irssi_bag", b.irssi_bag},
        {"wcl_mode", std::string(to_string(b.wcl_mode))},
        {"pfekf",
         {{"particles", b.pfekf.particles},
          {"F", matrix_to_json(b.pfekf.ekf.f)},
          {"H", matrix_to_json(b.pfekf.ekf.h)},
          {"Q", matrix_to_json(b.pfekf.ekf.q)},
          {"R", matrix_to_json(b.pfekf.ekf.r)},
          {"P0", matrix_to_json(b.pfekf.initial_covariance)},
          {"jitter", b.pfekf.particle_jitter},
          {"rssi_sigma", b.pfekf.rssi_sigma}}}}}};
  json kinds = json::array();
  for (auto k : c.trajectories) kinds.push_back(std::string(to_string(k)));
  json wps = json::array();
  for (const auto& p : c.custom_waypoints) wps.push_back(json::array({p.x(), p.y()}));
  j["trajectory"] = {{"kinds", kinds},
                     {"step", c.trajectory_step},
                     {"lane_spacing", c.lane_spacing},
                     {"waypoints", wps}};
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  return j;
}

ExperimentConfig config_from_json(const json& user) { return config_from_json(user, default_config()); }

ExperimentConfig config_from_json(const json& user, const ExperimentConfig& base) {
  json j = to_json(base);
  check_keys(user, j, "");
  j.merge_patch(user);

  ExperimentConfig c;
  try {
    const auto& ws = j.at("workspace");
    c.workspace = Workspace::create(ws.at("x_min").get<double>(), ws.at("x_max").get<double>(),
                                    ws.at("y_min").get<double>(), ws.at("y_max").get<double>());
    c.nodes.clear();
    for (const auto& n : j.at("layout").at("nodes"))
      c.nodes.push_back({n.at("id").get<std::string>(), {n.at("x").get<double>(), n.at("y").get<double>()}});
    c.sensing_range = j.at("layout").at("sensing_range").get<double>();

    const auto& ch = j.at("channel");
    c.channel.ref_rssi_a = ch.at("ref_rssi_a").get<double>();
    c.channel.path_loss_eta = ch.at("path_loss_eta").get<double>();
    c.channel.noise_std = ch.at("noise_std").get<double>();
    c.channel.min_distance = ch.at("min_distance").get<double>();
    c.noise_levels = ch.at("noise_levels").get<std::vector<double>>();

    const auto& m = j.at("method");
    c.methods = m.is_string() ? std::vector<std::string>{m.get<std::string>()}
                              : m.get<std::vector<std::string>>();

    const auto& h = j.at("hyperparams");
    auto& hp = c.hyper;
    hp.window_len = h.at("window_len").get<int>();
    hp.ewma_alpha = h.at("ewma_alpha").get<double>();
    hp.window = h.at("window").get<std::size_t>();
    hp.sigma = h.at("sigma").get<double>();
    hp.gradient = h.at("gradient").get<std::string>();
    hp.bearing = parse_bearing_model(h.at("bearing").get<std::string>());
    hp.pf.particles = h.at("particles").get<int>();
    hp.pf.resolution = h.at("pf_resolution").get<double>();
    hp.pf.motion_std = h.at("motion_std").get<double>();
    hp.pf.resampling = parse_resampling(h.at("resampling").get<std::string>());
    hp.pf.window = hp.window;
    hp.pf.sigma = hp.sigma;
    hp.em_resolution = h.at("em_resolution").get<double>();
    hp.em_prune = h.at("em_prune").get<bool>();
    hp.use_odometry = h.at("use_odometry").get<bool>();
    hp.odometry_noise_std = h.at("odometry_noise_std").get<double>();
    hp.baseline_input = parse_baseline_input(h.at("baseline_input").get<std::string>());
    const auto& b = h.at("baselines");
    hp.baselines.grid_resolution = b.at("grid_resolution").get<double>();
    hp.baselines.irssi_k = b.at("irssi_k").get<int>();
    hp.baselines.irssi_bag = b.at("irssi_bag").get<int>();
    hp.baselines.wcl_mode = parse_weight_mode(b.at("wcl_mode").get<std::string>());
    const auto& pe = b.at("pfekf");
    hp.baselines.pfekf.particles = pe.at("particles").get<int>();
    hp.baselines.pfekf.ekf.f = matrix_from_json(pe.at("F"), "F");
    hp.baselines.pfekf.ekf.h = matrix_from_json(pe.at("H"), "H");
    hp.baselines.pfekf.ekf.q = matrix_from_json(pe.at("Q"), "Q");
    hp.baselines.pfekf.ekf.r = matrix_from_json(pe.at("R"), "R");
    hp.baselines.pfekf.initial_covariance = matrix_from_json(pe.at("P0"), "P0");
    hp.baselines.pfekf.particle_jitter = pe.at("jitter").get<double>();
    hp.baselines.pfekf.rssi_sigma = pe.at("rssi_sigma").get<double>();

    const auto& t = j.at("trajectory");
    c.trajectories.clear();
    for (const auto& k : t.at("kinds")) c.trajectories.push_back(parse_trajectory_kind(k.get<std::string>()));
    c.trajectory_step = t.at("step").get<double>();
    c.lane_spacing = t.at("lane_spacing").get<double>();
    c.custom_waypoints.clear();
    for (const auto& p : t.at("waypoints")) c.custom_waypoints.push_back({p.at(0).get<double>(), p.at(1).get<double>()});

    c.trials = j.at("trials").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void apply_overrides(json& j, const std::vector<std::string>& overrides) {
  const json schema = to_json(default_config());
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw InvalidArgument("override '" + ov + "' is not key=value");
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json::json_pointer ptr;
    std::stringstream ks(key);
    std::string part;
    while (std::getline(ks, part, '.')) ptr /= part;
    if (!schema.contains(ptr)) throw InvalidArgument("override key '" + key + "' is not in the config schema");
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    j[ptr] = value;
  }
}

ExperimentConfig default_config() {
  // The 6 x 6 m simulation study: noise swept over 1-4 dBm, three
  // trajectories, 20 seeds. Window length, bag size and WCL weighting are
  // tuned here; the structs keep their library defaults.
  ExperimentConfig c;
  c.noise_levels = {1.0, 2.0, 3.0, 4.0};
  c.channel.noise_std = 2.0;
  c.hyper.window = 30;
  c.hyper.pf.window = 30;
  c.hyper.baselines.irssi_bag = 16;
  c.hyper.baselines.wcl_mode = WeightMode::RawRssi;
  return c;
}

ExperimentConfig hardware_config() {
  // Same grid and particle pitch as the simulation study; the path is
  // densified to keep about as many waypoints per meter of workspace.
  ExperimentConfig c = default_config();
  c.workspace = Workspace::create(0.0, 2.34, 0.0, 1.75);
  c.trajectory_step = 0.1;
  c.lane_spacing = 0.4;
  return c;
}

ExperimentConfig preset_config(std::string_view name) {
  if (name == "default") return default_config();
  if (name == "hardware") return hardware_config();
  throw InvalidArgument("unknown preset '" + std::string(name) + "' (expected default or hardware)");
}

}  // namespace cdoa
