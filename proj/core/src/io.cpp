#include "lookout/io.hpp"

#include "lookout/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace lookout {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::kMalformedConfig, what); }

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    malformed(what + ": " + e.what());
  }
}

template <typename T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) malformed(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    malformed(std::string("bad value for '") + key + "'");
  }
}

template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = get<T>(j, key);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) malformed(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&key](const char* a) { return key == a; })) {
      malformed("unknown key '" + key + "' in " + where);
    }
  }
}

void check_header(const json& j, const char* format, int version) {
  if (!j.is_object() || !j.contains("format") || j["format"] != format) {
    throw Error(ErrorCode::kCheckpointVersion, std::string("not a ") + format + " file");
  }
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != version) {
    throw Error(ErrorCode::kCheckpointVersion,
                std::string(format) + " version mismatch, expected " + std::to_string(version));
  }
}

json header(const char* format, int version) { return json{{"format", format}, {"version", version}}; }

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", values}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = get<Eigen::Index>(j, "rows");
  const auto cols = get<Eigen::Index>(j, "cols");
  const auto values = get<std::vector<double>>(j, "values");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(values.size()) != rows * cols) malformed("matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json lane_json(const LaneCenterline& lane) {
  json pts = json::array();
  for (const Pose2& p : lane.points()) pts.push_back({p.x, p.y});
  return json{{"speed_limit", lane.speed_limit()}, {"points", pts}};
}

LaneCenterline lane_from(const json& j) {
  std::vector<Vec2> pts;
  for (const auto& p : get<std::vector<std::array<double, 2>>>(j, "points")) pts.emplace_back(p[0], p[1]);
  try {
    // The stored vertices are already dense; rebuild them as they are.
    return LaneCenterline::from_points(pts, get<double>(j, "speed_limit"), std::numeric_limits<double>::infinity());
  } catch (const Error& e) {
    malformed(std::string("bad lane: ") + e.what());
  }
}

json actor_json(const ActorState& a) {
  return json{{"id", a.id},         {"x", a.pose.x},         {"y", a.pose.y},
              {"heading", a.pose.heading}, {"speed", a.speed}, {"length", a.length},
              {"width", a.width},   {"class", actor_class_name(a.cls)}};
}

ActorState actor_from(const json& j) {
  ActorState a;
  a.id = get<int>(j, "id");
  a.pose = {get<double>(j, "x"), get<double>(j, "y"), get<double>(j, "heading")};
  a.speed = get<double>(j, "speed");
  a.length = get<double>(j, "length");
  a.width = get<double>(j, "width");
  try {
    a.cls = actor_class_from_name(get<std::string>(j, "class"));
  } catch (const Error& e) {
    malformed(e.what());
  }
  return a;
}

json scene_json(const Scene& s, const std::vector<int>& lane_refs) {
  json actors = json::array();
  for (const ActorState& a : s.actors) actors.push_back(actor_json(a));
  json history = json::array();
  for (const auto& h : s.history) {
    json poses = json::array();
    for (const Pose2& p : h) poses.push_back({p.x, p.y, p.heading});
    history.push_back(poses);
  }
  return json{{"timestamp", s.timestamp}, {"sdv", actor_json(s.sdv)}, {"actors", actors},
              {"lanes", lane_refs},       {"route_lane", s.route_lane_index},
              {"history_dt", s.history_dt}, {"history", history}};
}

Scene scene_from(const json& j, const std::vector<LaneCenterline>& table) {
  Scene s;
  s.timestamp = get<double>(j, "timestamp");
  s.sdv = actor_from(get<json>(j, "sdv"));
  for (const json& a : get<json>(j, "actors")) s.actors.push_back(actor_from(a));
  std::vector<LaneCenterline> lanes;
  for (int idx : get<std::vector<int>>(j, "lanes")) {
    if (idx < 0 || idx >= static_cast<int>(table.size())) malformed("lane index out of range");
    lanes.push_back(table[static_cast<std::size_t>(idx)]);
  }
  s.lanes = std::make_shared<const std::vector<LaneCenterline>>(std::move(lanes));
  s.route_lane_index = get<int>(j, "route_lane");
  s.history_dt = get<double>(j, "history_dt");
  for (const auto& h : get<std::vector<std::vector<std::array<double, 3>>>>(j, "history")) {
    std::vector<Pose2> poses;
    for (const auto& p : h) poses.push_back({p[0], p[1], p[2]});
    s.history.push_back(std::move(poses));
  }
  try {
    validate_scene(s);
  } catch (const Error& e) {
    malformed(std::string("bad scene: ") + e.what());
  }
  return s;
}

json params_json(const nn::ParameterSet& params) {
  json out = json::array();
  for (const nn::Parameter& p : params.all()) {
    json m = matrix_json(p.value);
    m["name"] = p.name;
    out.push_back(m);
  }
  return out;
}

void assign_params(nn::ParameterSet& params, const json& j, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != params.size()) {
    throw Error(ErrorCode::kCheckpointVersion, path + ": parameter count does not match the model");
  }
  for (int i = 0; i < params.size(); ++i) {
    const json& e = j[static_cast<std::size_t>(i)];
    nn::Parameter& p = params[i];
    if (get<std::string>(e, "name") != p.name) {
      throw Error(ErrorCode::kCheckpointVersion, path + ": parameter '" + p.name + "' not found in order");
    }
    Eigen::MatrixXd m = matrix_from(e);
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
      throw Error(ErrorCode::kCheckpointVersion, path + ": parameter '" + p.name + "' has the wrong shape");
    }
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      if (!std::isfinite(m(k))) malformed(path + ": non-finite weight in '" + p.name + "'");
    }
    p.value = std::move(m);
  }
}

json read_checkpoint(const std::string& path, const char* kind) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingCheckpoint, "missing checkpoint: " + path);
  const json j = parse_json(read_text(path), path);
  check_header(j, "lookout.checkpoint", kCheckpointVersion);
  if (get<std::string>(j, "kind") != kind) {
    throw Error(ErrorCode::kCheckpointVersion, path + " holds a " + get<std::string>(j, "kind") + ", expected " + kind);
  }
  return j;
}

void write_checkpoint(const std::string& path, const char* kind, const json& config, const nn::ParameterSet& params) {
  json j = header("lookout.checkpoint", kCheckpointVersion);
  j["kind"] = kind;
  j["config"] = config;
  j["params"] = params_json(params);
  write_text(path, j.dump() + "\n");
}

json forecast_config_json(const ForecastConfig& c) {
  return json{{"latent_dim", c.latent_dim}, {"hidden", c.hidden}, {"steps", c.steps}, {"dt", c.dt},
              {"residual_scale", c.residual_scale}, {"log_sigma_min", c.log_sigma_min},
              {"log_sigma_max", c.log_sigma_max}};
}

json motion_json(const ScriptedMotion& m) {
  return json{{"path", m.path}, {"s0", m.s0}, {"times", m.times}, {"speeds", m.speeds}};
}

ScriptedMotion motion_from(const json& j) {
  return {get<int>(j, "path"), get<double>(j, "s0"), get<std::vector<double>>(j, "times"),
          get<std::vector<double>>(j, "speeds")};
}

std::string number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) malformed("bad number '" + s + "' in CSV");
  return v;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += csv_cell(cells[i]);
  }
  return out + "\n";
}

const char* kOpenLoopColumns[] = {"scene", "min_sade", "mean_sade", "min_sasd", "mean_sasd", "mean_plan_asd", "count"};
const char* kAblationColumns[] = {"variant",   "description", "collision_rate", "progress", "progress_per_collision",
                                  "jerk",      "lat_accel",   "accel",          "decel",    "rollouts",
                                  "collisions"};

std::vector<std::string> open_loop_cells(const std::string& name, const OpenLoopRow& r) {
  return {name, number(r.min_sade), number(r.mean_sade), number(r.min_sasd), number(r.mean_sasd),
          number(r.mean_plan_asd), std::to_string(r.count)};
}

void require_header(const CsvTable& t, const char* const* names, std::size_t n) {
  if (t.header.size() != n || !std::equal(t.header.begin(), t.header.end(), names)) malformed("unexpected CSV header");
  for (const auto& row : t.rows) {
    if (row.size() != n) malformed("CSV row has the wrong number of cells");
  }
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Rounds a span to 1, 2 or 5 times a power of ten.
double nice_step(double span, int ticks) {
  const double raw = span / std::max(1, ticks);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f <= 1.0 ? 1.0 : f <= 2.0 ? 2.0 : f <= 5.0 ? 5.0 : 10.0) * mag;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

void save_checkpoint(const std::string& path, const ForecastModel& model) {
  write_checkpoint(path, "decoder", forecast_config_json(model.config()), model.params());
}

void save_checkpoint(const std::string& path, const DiverseSampler& sampler) {
  const DiverseSamplerConfig& c = sampler.config();
  write_checkpoint(path, "sampler",
                   json{{"k", c.k}, {"latent_dim", c.latent_dim}, {"hidden", c.hidden}, {"log_a_min", c.log_a_min},
                        {"log_a_max", c.log_a_max}, {"head_offset_init", c.head_offset_init}},
                   sampler.params());
}

void save_checkpoint(const std::string& path, const Scorer& scorer) {
  const ScorerConfig& c = scorer.config();
  write_checkpoint(path, "scorer",
                   json{{"k", c.k}, {"hidden", c.hidden}, {"alpha", c.alpha}, {"trajectory_scale", c.trajectory_scale}},
                   scorer.params());
}

ForecastModel load_forecast_model(const std::string& path) {
  const json j = read_checkpoint(path, "decoder");
  const json& c = get<json>(j, "config");
  ForecastConfig config;
  config.latent_dim = get<int>(c, "latent_dim");
  config.hidden = get<int>(c, "hidden");
  config.steps = get<int>(c, "steps");
  config.dt = get<double>(c, "dt");
  config.residual_scale = get<double>(c, "residual_scale");
  config.log_sigma_min = get<double>(c, "log_sigma_min");
  config.log_sigma_max = get<double>(c, "log_sigma_max");
  ForecastModel model = ForecastModel::create(config, 0);
  assign_params(model.params(), get<json>(j, "params"), path);
  return model;
}

DiverseSampler load_sampler(const std::string& path) {
  const json j = read_checkpoint(path, "sampler");
  const json& c = get<json>(j, "config");
  DiverseSamplerConfig config;
  config.k = get<int>(c, "k");
  config.latent_dim = get<int>(c, "latent_dim");
  config.hidden = get<int>(c, "hidden");
  config.log_a_min = get<double>(c, "log_a_min");
  config.log_a_max = get<double>(c, "log_a_max");
  config.head_offset_init = get<double>(c, "head_offset_init");
  DiverseSampler sampler = DiverseSampler::create(config, 0);
  assign_params(sampler.params(), get<json>(j, "params"), path);
  return sampler;
}

Scorer load_scorer(const std::string& path) {
  const json j = read_checkpoint(path, "scorer");
  const json& c = get<json>(j, "config");
  ScorerConfig config;
  config.k = get<int>(c, "k");
  config.hidden = get<int>(c, "hidden");
  config.alpha = get<double>(c, "alpha");
  config.trajectory_scale = get<double>(c, "trajectory_scale");
  Scorer scorer = Scorer::create(config, 0);
  assign_params(scorer.params(), get<json>(j, "params"), path);
  return scorer;
}

// ---------------------------------------------------------------------------

std::string dataset_to_json(const Dataset& dataset) {
  json lanes = json::array();
  std::vector<json> seen;
  json samples = json::array();
  for (const ForecastSample& s : dataset.samples) {
    std::vector<int> refs;
    if (s.scene.lanes) {
      for (const LaneCenterline& lane : *s.scene.lanes) {
        json lj = lane_json(lane);
        const auto it = std::find(seen.begin(), seen.end(), lj);
        if (it == seen.end()) {
          refs.push_back(static_cast<int>(seen.size()));
          seen.push_back(lj);
          lanes.push_back(std::move(lj));
        } else {
          refs.push_back(static_cast<int>(it - seen.begin()));
        }
      }
    }
    samples.push_back(json{{"scene", scene_json(s.scene, refs)}, {"future", matrix_json(s.future)}, {"mode", s.mode}});
  }
  json j = header("lookout.dataset", kDatasetVersion);
  j["family"] = dataset.family;
  j["seed"] = dataset.seed;
  j["lanes"] = lanes;
  j["samples"] = samples;
  return j.dump() + "\n";
}

Dataset dataset_from_json(const std::string& text) {
  const json j = parse_json(text, "dataset");
  check_header(j, "lookout.dataset", kDatasetVersion);
  Dataset d;
  d.family = get<std::string>(j, "family");
  d.seed = get<std::uint64_t>(j, "seed");
  std::vector<LaneCenterline> table;
  for (const json& l : get<json>(j, "lanes")) table.push_back(lane_from(l));
  for (const json& s : get<json>(j, "samples")) {
    ForecastSample sample;
    sample.scene = scene_from(get<json>(s, "scene"), table);
    sample.future = matrix_from(get<json>(s, "future"));
    sample.mode = get<int>(s, "mode");
    if (sample.future.rows() != static_cast<Eigen::Index>(sample.scene.actors.size())) {
      malformed("future rows must match the actor count");
    }
    d.samples.push_back(std::move(sample));
  }
  return d;
}

void save_dataset(const std::string& path, const Dataset& dataset) { write_text(path, dataset_to_json(dataset)); }

Dataset load_dataset(const std::string& path) { return dataset_from_json(read_text(path)); }

std::string scenario_to_json(const ScenarioScript& s) {
  json lanes = json::array();
  for (const LaneCenterline& l : s.lanes) lanes.push_back(lane_json(l));
  json paths = json::array();
  for (const LaneCenterline& l : s.paths) paths.push_back(lane_json(l));
  json actors = json::array();
  for (const ActorSpec& a : s.actors) {
    const ActorBehavior& b = a.behavior;
    json behavior{{"kind", behavior_name(b.kind)}};
    switch (b.kind) {
      case BehaviorKind::kScripted:
        behavior["motion"] = motion_json(b.motion);
        break;
      case BehaviorKind::kIdmFollow:
        behavior["path"] = b.path;
        behavior["s0"] = b.s0;
        behavior["initial_speed"] = b.initial_speed;
        behavior["desired_speed"] = b.desired_speed;
        break;
      case BehaviorKind::kModeSwitch: {
        json modes = json::array();
        for (const ScriptMode& m : b.modes) {
          modes.push_back(json{{"name", m.name}, {"probability", m.probability}, {"motion", motion_json(m.motion)}});
        }
        behavior["modes"] = modes;
        break;
      }
    }
    actors.push_back(json{{"id", a.id}, {"class", actor_class_name(a.cls)}, {"length", a.length},
                          {"width", a.width}, {"behavior", behavior}});
  }
  json j = header("lookout.scenario", kScenarioVersion);
  j.update(json{{"name", s.name},
                {"family", s.family},
                {"lanes", lanes},
                {"route_lane", s.route_lane},
                {"paths", paths},
                {"sdv_station", s.sdv_station},
                {"sdv_speed", s.sdv_speed},
                {"sdv_length", s.sdv_length},
                {"sdv_width", s.sdv_width},
                {"actors", actors},
                {"duration", s.duration},
                {"sim_dt", s.sim_dt},
                {"divergence_threshold", s.divergence_threshold},
                {"snapshot_time", s.snapshot_time},
                {"seed", s.seed}});
  return j.dump(1) + "\n";
}

ScenarioScript scenario_from_json(const std::string& text) {
  const json j = parse_json(text, "scenario");
  check_header(j, "lookout.scenario", kScenarioVersion);
  ScenarioScript s;
  s.name = get<std::string>(j, "name");
  s.family = get<std::string>(j, "family");
  for (const json& l : get<json>(j, "lanes")) s.lanes.push_back(lane_from(l));
  s.route_lane = get<int>(j, "route_lane");
  for (const json& l : get<json>(j, "paths")) s.paths.push_back(lane_from(l));
  s.sdv_station = get<double>(j, "sdv_station");
  s.sdv_speed = get<double>(j, "sdv_speed");
  s.sdv_length = get<double>(j, "sdv_length");
  s.sdv_width = get<double>(j, "sdv_width");
  for (const json& a : get<json>(j, "actors")) {
    ActorSpec spec;
    spec.id = get<int>(a, "id");
    try {
      spec.cls = actor_class_from_name(get<std::string>(a, "class"));
    } catch (const Error& e) {
      malformed(e.what());
    }
    spec.length = get<double>(a, "length");
    spec.width = get<double>(a, "width");
    const json& b = get<json>(a, "behavior");
    spec.behavior.kind = behavior_from_name(get<std::string>(b, "kind"));
    switch (spec.behavior.kind) {
      case BehaviorKind::kScripted:
        spec.behavior.motion = motion_from(get<json>(b, "motion"));
        break;
      case BehaviorKind::kIdmFollow:
        spec.behavior.path = get<int>(b, "path");
        spec.behavior.s0 = get<double>(b, "s0");
        spec.behavior.initial_speed = get<double>(b, "initial_speed");
        spec.behavior.desired_speed = get<double>(b, "desired_speed");
        break;
      case BehaviorKind::kModeSwitch:
        for (const json& m : get<json>(b, "modes")) {
          spec.behavior.modes.push_back(
              {get<std::string>(m, "name"), get<double>(m, "probability"), motion_from(get<json>(m, "motion"))});
        }
        break;
    }
    s.actors.push_back(std::move(spec));
  }
  s.duration = get<double>(j, "duration");
  s.sim_dt = get<double>(j, "sim_dt");
  s.divergence_threshold = get<double>(j, "divergence_threshold");
  s.snapshot_time = get<double>(j, "snapshot_time");
  s.seed = get<std::uint64_t>(j, "seed");
  s.validate();
  return s;
}

std::string rollout_log_to_json(const RolloutLog& log) {
  json steps = json::array();
  for (const StepRecord& r : log.steps) {
    json actors = json::array();
    for (const ActorState& a : r.actors) actors.push_back(actor_json(a));
    steps.push_back(json{{"step", r.step},         {"time", r.time},           {"sdv", actor_json(r.sdv)},
                         {"station", r.sdv_station}, {"accel", r.accel},       {"jerk", r.jerk},
                         {"lat_accel", r.lat_accel}, {"action_index", r.action_index},
                         {"objective", r.objective}, {"actors", actors}});
  }
  json collisions = json::array();
  for (const CollisionEvent& c : log.collisions) collisions.push_back(json{{"step", c.step}, {"actor_id", c.actor_id}});
  json j = header("lookout.rollout_log", kRolloutLogVersion);
  j.update(json{{"scenario", log.scenario},
                {"seed", log.seed},
                {"planner", log.planner},
                {"modes", log.modes},
                {"initial_station", log.initial_station},
                {"progress", log.progress},
                {"terminated_early", log.terminated_early},
                {"termination", log.termination},
                {"collisions", collisions},
                {"steps", steps}});
  return j.dump() + "\n";
}

RolloutLog rollout_log_from_json(const std::string& text) {
  const json j = parse_json(text, "rollout log");
  check_header(j, "lookout.rollout_log", kRolloutLogVersion);
  RolloutLog log;
  log.scenario = get<std::string>(j, "scenario");
  log.seed = get<std::uint64_t>(j, "seed");
  log.planner = get<std::string>(j, "planner");
  log.modes = get<std::vector<int>>(j, "modes");
  log.initial_station = get<double>(j, "initial_station");
  log.progress = get<double>(j, "progress");
  log.terminated_early = get<bool>(j, "terminated_early");
  log.termination = get<std::string>(j, "termination");
  for (const json& c : get<json>(j, "collisions")) log.collisions.push_back({get<int>(c, "step"), get<int>(c, "actor_id")});
  for (const json& s : get<json>(j, "steps")) {
    StepRecord r;
    r.step = get<int>(s, "step");
    r.time = get<double>(s, "time");
    r.sdv = actor_from(get<json>(s, "sdv"));
    r.sdv_station = get<double>(s, "station");
    r.accel = get<double>(s, "accel");
    r.jerk = get<double>(s, "jerk");
    r.lat_accel = get<double>(s, "lat_accel");
    r.action_index = get<int>(s, "action_index");
    r.objective = get<double>(s, "objective");
    for (const json& a : get<json>(s, "actors")) r.actors.push_back(actor_from(a));
    log.steps.push_back(std::move(r));
  }
  return log;
}

// ---------------------------------------------------------------------------

RunConfig run_config_from_json(const std::string& text) {
  const json j = parse_json(text, "run config");
  check_keys(j, "run config", {"version", "seed", "data", "forecast", "sampler", "scorer", "planner", "weights", "campaign", "metrics"});
  if (j.contains("version") && get<int>(j, "version") != kRunConfigVersion) {
    throw Error(ErrorCode::kCheckpointVersion, "run config version mismatch, expected " + std::to_string(kRunConfigVersion));
  }
  RunConfig c;
  get_opt(j, "seed", c.seed);
  c.campaign.seed = c.seed;
  try {
    if (j.contains("data")) {
      const json& d = j["data"];
      check_keys(d, "data", {"family", "train_count", "test_count", "mode_probabilities"});
      if (d.contains("family")) c.data.family = family_from_name(get<std::string>(d, "family"));
      get_opt(d, "train_count", c.data.train_count);
      get_opt(d, "test_count", c.data.test_count);
      get_opt(d, "mode_probabilities", c.data.options.mode_probabilities);
    }
    if (j.contains("forecast")) {
      const json& f = j["forecast"];
      check_keys(f, "forecast", {"latent_dim", "hidden", "residual_scale", "iterations", "batch_size", "learning_rate",
                                 "beta", "cyclical_beta", "cycle_length", "huber_delta"});
      get_opt(f, "latent_dim", c.forecast.latent_dim);
      get_opt(f, "hidden", c.forecast.hidden);
      get_opt(f, "residual_scale", c.forecast.residual_scale);
      get_opt(f, "iterations", c.forecast_train.iterations);
      get_opt(f, "batch_size", c.forecast_train.batch_size);
      get_opt(f, "learning_rate", c.forecast_train.learning_rate);
      get_opt(f, "beta", c.forecast_train.beta);
      get_opt(f, "cyclical_beta", c.forecast_train.cyclical_beta);
      get_opt(f, "cycle_length", c.forecast_train.cycle_length);
      get_opt(f, "huber_delta", c.forecast_train.huber_delta);
    }
    if (j.contains("sampler")) {
      const json& s = j["sampler"];
      check_keys(s, "sampler", {"k", "hidden", "head_offset_init", "iterations", "learning_rate", "w_reconstruction",
                                "w_planning", "w_general", "beta", "sigma_d", "baseline", "head_baseline",
                                "independent_planning_noise", "reinforce_draws"});
      get_opt(s, "k", c.sampler.k);
      get_opt(s, "hidden", c.sampler.hidden);
      get_opt(s, "head_offset_init", c.sampler.head_offset_init);
      get_opt(s, "iterations", c.sampler_train.iterations);
      get_opt(s, "learning_rate", c.sampler_train.learning_rate);
      get_opt(s, "w_reconstruction", c.sampler_train.objective.w_reconstruction);
      get_opt(s, "w_planning", c.sampler_train.objective.w_planning);
      get_opt(s, "w_general", c.sampler_train.objective.w_general);
      get_opt(s, "beta", c.sampler_train.objective.beta);
      get_opt(s, "sigma_d", c.sampler_train.objective.sigma_d);
      get_opt(s, "baseline", c.sampler_train.objective.baseline);
      get_opt(s, "head_baseline", c.sampler_train.objective.head_baseline);
      get_opt(s, "independent_planning_noise", c.sampler_train.objective.independent_planning_noise);
      get_opt(s, "reinforce_draws", c.sampler_train.reinforce_draws);
    }
    if (j.contains("scorer")) {
      const json& s = j["scorer"];
      check_keys(s, "scorer", {"hidden", "alpha", "iterations", "batch_size", "learning_rate", "reverse_kl"});
      get_opt(s, "hidden", c.scorer.hidden);
      get_opt(s, "alpha", c.scorer.alpha);
      get_opt(s, "iterations", c.scorer_train.iterations);
      get_opt(s, "batch_size", c.scorer_train.batch_size);
      get_opt(s, "learning_rate", c.scorer_train.learning_rate);
      get_opt(s, "reverse_kl", c.scorer_train.reverse_kl);
    }
    if (j.contains("planner")) {
      const json& p = j["planner"];
      check_keys(p, "planner", {"preset", "kind", "lateral_mid_offsets", "lateral_end_offsets", "action_velocity_count",
                                "contingent_mid_velocity_count", "contingent_end_velocity_count", "action_horizon",
                                "horizon", "speed_margin", "max_accel"});
      get_opt(p, "preset", c.planner_preset);
      SamplerConfig& t = c.campaign.rollout.sampler;
      t = SamplerConfig::from_preset(c.planner_preset);
      if (p.contains("kind")) c.campaign.rollout.planner = planner_from_name(get<std::string>(p, "kind"));
      get_opt(p, "lateral_mid_offsets", t.lateral_mid_offsets);
      get_opt(p, "lateral_end_offsets", t.lateral_end_offsets);
      get_opt(p, "action_velocity_count", t.action_velocity_count);
      get_opt(p, "contingent_mid_velocity_count", t.contingent_mid_velocity_count);
      get_opt(p, "contingent_end_velocity_count", t.contingent_end_velocity_count);
      get_opt(p, "action_horizon", t.action_horizon);
      get_opt(p, "horizon", t.horizon);
      get_opt(p, "speed_margin", t.speed_margin);
      get_opt(p, "max_accel", t.max_accel);
      t.validate();
    }
    if (j.contains("weights")) {
      const json& w = j["weights"];
      if (!w.is_object()) malformed("weights must be an object");
      for (const auto& [key, value] : w.items()) {
        int index = -1;
        for (int i = 0; i < kNumSubcosts; ++i) {
          if (key == subcost_name(i)) index = i;
        }
        if (index < 0) malformed("unknown key '" + key + "' in weights");
        if (!value.is_number() || value.get<double>() < 0.0) malformed("weight '" + key + "' must be a nonnegative number");
        c.campaign.rollout.weights[index] = value.get<double>();
      }
    }
    if (j.contains("campaign")) {
      const json& p = j["campaign"];
      check_keys(p, "campaign", {"family", "rollouts", "seed", "mode_probabilities"});
      if (p.contains("family")) c.campaign.family = family_from_name(get<std::string>(p, "family"));
      get_opt(p, "rollouts", c.campaign.rollouts);
      get_opt(p, "seed", c.campaign.seed);
      get_opt(p, "mode_probabilities", c.campaign.options.mode_probabilities);
    }
    if (j.contains("metrics")) {
      const json& m = j["metrics"];
      check_keys(m, "metrics", {"asd_normalization"});
      if (m.contains("asd_normalization")) {
        const std::string n = get<std::string>(m, "asd_normalization");
        if (n == "printed") {
          c.asd = AsdNormalization::kPrinted;
        } else if (n == "pairwise") {
          c.asd = AsdNormalization::kPairwise;
        } else {
          malformed("asd_normalization must be 'printed' or 'pairwise'");
        }
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedConfig) throw;
    malformed(e.what());
  }
  c.sampler.latent_dim = c.forecast.latent_dim;
  c.scorer.k = c.sampler.k;
  if (c.data.train_count < 1 || c.data.test_count < 0) malformed("dataset counts must be positive");
  if (c.sampler.k < 1) malformed("k must be at least 1");
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j{{"version", kRunConfigVersion}, {"seed", c.seed}};
  j["data"] = {{"family", family_name(c.data.family)},
               {"train_count", c.data.train_count},
               {"test_count", c.data.test_count},
               {"mode_probabilities", c.data.options.mode_probabilities}};
  j["forecast"] = {{"latent_dim", c.forecast.latent_dim},
                   {"hidden", c.forecast.hidden},
                   {"residual_scale", c.forecast.residual_scale},
                   {"iterations", c.forecast_train.iterations},
                   {"batch_size", c.forecast_train.batch_size},
                   {"learning_rate", c.forecast_train.learning_rate},
                   {"beta", c.forecast_train.beta},
                   {"cyclical_beta", c.forecast_train.cyclical_beta},
                   {"cycle_length", c.forecast_train.cycle_length},
                   {"huber_delta", c.forecast_train.huber_delta}};
  const SamplerObjective& o = c.sampler_train.objective;
  j["sampler"] = {{"k", c.sampler.k},
                  {"hidden", c.sampler.hidden},
                  {"head_offset_init", c.sampler.head_offset_init},
                  {"iterations", c.sampler_train.iterations},
                  {"learning_rate", c.sampler_train.learning_rate},
                  {"w_reconstruction", o.w_reconstruction},
                  {"w_planning", o.w_planning},
                  {"w_general", o.w_general},
                  {"beta", o.beta},
                  {"sigma_d", o.sigma_d},
                  {"baseline", o.baseline},
                  {"head_baseline", o.head_baseline},
                  {"independent_planning_noise", o.independent_planning_noise},
                  {"reinforce_draws", c.sampler_train.reinforce_draws}};
  j["scorer"] = {{"hidden", c.scorer.hidden},
                 {"alpha", c.scorer.alpha},
                 {"iterations", c.scorer_train.iterations},
                 {"batch_size", c.scorer_train.batch_size},
                 {"learning_rate", c.scorer_train.learning_rate},
                 {"reverse_kl", c.scorer_train.reverse_kl}};
  const SamplerConfig& t = c.campaign.rollout.sampler;
  j["planner"] = {{"preset", c.planner_preset},
                  {"kind", planner_name(c.campaign.rollout.planner)},
                  {"lateral_mid_offsets", t.lateral_mid_offsets},
                  {"lateral_end_offsets", t.lateral_end_offsets},
                  {"action_velocity_count", t.action_velocity_count},
                  {"contingent_mid_velocity_count", t.contingent_mid_velocity_count},
                  {"contingent_end_velocity_count", t.contingent_end_velocity_count},
                  {"action_horizon", t.action_horizon},
                  {"horizon", t.horizon},
                  {"speed_margin", t.speed_margin},
                  {"max_accel", t.max_accel}};
  json weights = json::object();
  for (int i = 0; i < kNumSubcosts; ++i) weights[subcost_name(i)] = c.campaign.rollout.weights[i];
  j["weights"] = weights;
  j["campaign"] = {{"family", family_name(c.campaign.family)},
                   {"rollouts", c.campaign.rollouts},
                   {"seed", c.campaign.seed},
                   {"mode_probabilities", c.campaign.options.mode_probabilities}};
  j["metrics"] = {{"asd_normalization", c.asd == AsdNormalization::kPrinted ? "printed" : "pairwise"}};
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) { return run_config_from_json(read_text(path)); }

// ---------------------------------------------------------------------------

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool row_started = false;
  bool comment = false;
  auto end_row = [&]() {
    if (row_started) {
      row.push_back(cell);
      if (t.header.empty()) {
        t.header = row;
      } else {
        t.rows.push_back(row);
      }
    }
    row.clear();
    cell.clear();
    row_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (comment) {
      if (c == '\n') comment = false;
      continue;
    }
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
      continue;
    }
    if (!row_started && c == '#') {
      comment = true;
      continue;
    }
    if (c == '\r') continue;
    if (c == '\n') {
      end_row();
      continue;
    }
    row_started = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  if (quoted) malformed("unterminated quote in CSV");
  end_row();
  return t;
}

std::string open_loop_csv(const OpenLoopReport& report) {
  std::string out = "# lookout.open_loop v" + std::to_string(kCsvVersion) + "; distances in meters\n";
  out += csv_line({std::begin(kOpenLoopColumns), std::end(kOpenLoopColumns)});
  for (std::size_t i = 0; i < report.scenes.size(); ++i) out += csv_line(open_loop_cells(std::to_string(i), report.scenes[i]));
  out += csv_line(open_loop_cells("aggregate", report.aggregate));
  return out;
}

std::string open_loop_class_csv(const OpenLoopReport& report) {
  std::string out = "# lookout.open_loop_by_class v" + std::to_string(kCsvVersion) + "; distances in meters\n";
  std::vector<std::string> head{std::begin(kOpenLoopColumns), std::end(kOpenLoopColumns)};
  head[0] = "class";
  out += csv_line(head);
  for (const auto& [cls, row] : report.per_class) out += csv_line(open_loop_cells(actor_class_name(cls), row));
  return out;
}

OpenLoopReport parse_open_loop_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  require_header(t, kOpenLoopColumns, std::size(kOpenLoopColumns));
  OpenLoopReport r;
  bool have_aggregate = false;
  for (const auto& cells : t.rows) {
    OpenLoopRow row{parse_number(cells[1]), parse_number(cells[2]), parse_number(cells[3]),
                    parse_number(cells[4]), parse_number(cells[5]), static_cast<int>(parse_number(cells[6]))};
    if (cells[0] == "aggregate") {
      r.aggregate = row;
      have_aggregate = true;
    } else {
      if (cells[0] != std::to_string(r.scenes.size())) malformed("scene rows out of order");
      r.scenes.push_back(row);
    }
  }
  if (!have_aggregate) malformed("missing aggregate row");
  return r;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "# lookout.closed_loop v" + std::to_string(kCsvVersion) +
                    "; jerk, lat_accel, accel and decel are means of absolute values\n";
  out += csv_line({std::begin(kAblationColumns), std::end(kAblationColumns)});
  for (const AblationRow& r : rows) {
    const ClosedLoopReport& c = r.report;
    out += csv_line({r.name, r.description, number(c.collision_rate), number(c.progress), number(c.progress_per_collision),
                     number(c.jerk), number(c.lat_accel), number(c.accel), number(c.decel), std::to_string(c.rollouts),
                     std::to_string(c.collisions)});
  }
  return out;
}

std::vector<AblationRow> parse_ablation_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  require_header(t, kAblationColumns, std::size(kAblationColumns));
  std::vector<AblationRow> rows;
  for (const auto& c : t.rows) {
    AblationRow r;
    r.name = c[0];
    r.description = c[1];
    r.report.collision_rate = parse_number(c[2]);
    r.report.progress = parse_number(c[3]);
    r.report.progress_per_collision = parse_number(c[4]);
    r.report.jerk = parse_number(c[5]);
    r.report.lat_accel = parse_number(c[6]);
    r.report.accel = parse_number(c[7]);
    r.report.decel = parse_number(c[8]);
    r.report.rollouts = static_cast<int>(parse_number(c[9]));
    r.report.collisions = static_cast<int>(parse_number(c[10]));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  const std::vector<std::string> head{"variant", "CR[%]", "progress[m]", "m/collision", "jerk", "lat_acc", "acc", "dec", "n"};
  std::vector<std::vector<std::string>> cells{head};
  for (const AblationRow& r : rows) {
    const ClosedLoopReport& c = r.report;
    cells.push_back({r.name, fixed(c.collision_rate, 2), fixed(c.progress, 2),
                     std::isinf(c.progress_per_collision) ? "no collisions" : fixed(c.progress_per_collision, 2),
                     fixed(c.jerk, 3), fixed(c.lat_accel, 3), fixed(c.accel, 3), fixed(c.decel, 3),
                     std::to_string(c.rollouts)});
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += "  ";
      const std::string pad(width[i] - row[i].size(), ' ');
      out += i == 0 ? row[i] + pad : pad + row[i];
    }
    out += "\n";
  }
  return out;
}

std::string action_breakdown_csv(const CostTable& table, const std::vector<double>& probabilities) {
  if (probabilities.size() != table.num_futures()) throw Error(ErrorCode::kShapeMismatch, "one probability per future");
  std::string out = "# lookout.action_breakdown v" + std::to_string(kCsvVersion) + "\n";
  out += csv_line({"action", "action_worst_cost", "expected_cost_to_go", "contingency_objective",
                   "expected_objective", "expected_contingent"});
  for (std::size_t a = 0; a < table.num_actions(); ++a) {
    double worst = -std::numeric_limits<double>::infinity();
    for (double c : table.action[a]) worst = std::max(worst, c);
    double to_go = 0.0;
    for (std::size_t k = 0; k < probabilities.size(); ++k) to_go += probabilities[k] * cost_to_go(table, a, k).cost;
    double best = std::numeric_limits<double>::infinity();
    int best_j = -1;
    for (std::size_t j = 0; j < table.contingent[a].size(); ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < probabilities.size(); ++k) v += probabilities[k] * (table.action[a][k] + table.contingent[a][j][k]);
      if (v < best) {
        best = v;
        best_j = static_cast<int>(j);
      }
    }
    out += csv_line({std::to_string(a), number(worst), number(to_go), number(worst + to_go), number(best),
                     std::to_string(best_j)});
  }
  return out;
}

std::string cost_breakdown_csv(const Scene& scene, const PlanningProblem& problem, const CostWeights& weights,
                               const CostConfig& config) {
  const LaneCenterline& lane = scene.lanes->at(static_cast<std::size_t>(scene.route_lane_index));
  std::string out = "# lookout.cost_breakdown v" + std::to_string(kCsvVersion) + "\n";
  std::vector<std::string> head{"action", "contingent", "future"};
  for (int i = 0; i < kNumSubcosts; ++i) head.emplace_back(subcost_name(i));
  head.emplace_back("total");
  out += csv_line(head);
  auto row = [&](std::size_t a, int j, std::size_t k, const Trajectory& traj) {
    const CostBreakdown b = total_cost(traj, problem.tracks[k], lane, weights, config);
    std::vector<std::string> cells{std::to_string(a), std::to_string(j), std::to_string(k)};
    for (int i = 0; i < kNumSubcosts; ++i) cells.push_back(number(b[i]));
    cells.push_back(number(b.total));
    out += csv_line(cells);
  };
  for (std::size_t a = 0; a < problem.candidates.size(); ++a) {
    const PlanCandidate& cand = problem.candidates[a];
    for (std::size_t k = 0; k < problem.tracks.size(); ++k) {
      row(a, -1, k, cand.action);
      for (std::size_t j = 0; j < cand.contingents.size(); ++j) row(a, static_cast<int>(j), k, cand.contingents[j]);
    }
  }
  return out;
}

std::string svg_scatter(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const std::vector<PlotPoint>& points) {
  constexpr double kW = 640, kH = 440, kLeft = 70, kRight = 30, kTop = 40, kBottom = 60;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!points.empty()) {
    x0 = x1 = points.front().x;
    y0 = y1 = points.front().y;
    for (const PlotPoint& p : points) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  auto widen = [](double& lo, double& hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      lo = 0;
      hi = 1;
    }
    const double pad = hi > lo ? 0.08 * (hi - lo) : std::max(1.0, std::abs(lo) * 0.1);
    lo = lo >= 0.0 ? std::max(0.0, lo - pad) : lo - pad;
    hi += pad;
  };
  widen(x0, x1);
  widen(y0, y1);
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  const double xs = nice_step(x1 - x0, 6), ys = nice_step(y1 - y0, 6);
  for (double v = std::ceil(x0 / xs) * xs; v <= x1; v += xs) {
    o << "<line x1=\"" << sx(v) << "\" y1=\"" << kTop + ph << "\" x2=\"" << sx(v) << "\" y2=\"" << kTop + ph + 5
      << "\" stroke=\"#333\"/><text x=\"" << sx(v) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
      << xml_escape(fixed(v, xs < 1 ? 2 : 0)) << "</text>\n";
  }
  for (double v = std::ceil(y0 / ys) * ys; v <= y1; v += ys) {
    o << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << sy(v) << "\" x2=\"" << kLeft << "\" y2=\"" << sy(v)
      << "\" stroke=\"#333\"/><text x=\"" << kLeft - 8 << "\" y=\"" << sy(v) + 4 << "\" text-anchor=\"end\">"
      << xml_escape(fixed(v, ys < 1 ? 2 : 0)) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label)
    << "</text>\n";
  for (const PlotPoint& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
    o << "<circle cx=\"" << sx(p.x) << "\" cy=\"" << sy(p.y) << "\" r=\"5\" fill=\"#1f77b4\"/>";
    if (!p.label.empty()) {
      o << "<text x=\"" << sx(p.x) + 8 << "\" y=\"" << sy(p.y) - 6 << "\">" << xml_escape(p.label) << "</text>";
    }
    o << "\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace lookout
