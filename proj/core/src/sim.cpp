#include "lookout/sim.hpp"

#include "lookout/error.hpp"
#include "lookout/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace lookout {

namespace {

constexpr std::size_t kSdvIndex = std::numeric_limits<std::size_t>::max();
constexpr double kDivergenceHorizon = 1.0;
constexpr double kLeadMargin = 0.5;
constexpr double kLeadSearchOffset = 8.0;

Pose2 pose_on(const LaneCenterline& path, double s) {
  const double len = path.length();
  if (s < 0.0 || s > len) {
    const double at = s < 0.0 ? 0.0 : len;
    const Vec2 p = path.point_at(at);
    const double h = path.heading_at(at);
    const double ext = s - at;
    return {p.x() + std::cos(h) * ext, p.y() + std::sin(h) * ext, h};
  }
  const Vec2 p = path.point_at(s);
  return {p.x(), p.y(), path.heading_at(s)};
}

// Half extents of a box measured along and across a direction.
std::pair<double, double> extents(const ActorState& a, double direction) {
  const double dh = a.pose.heading - direction;
  const double c = std::abs(std::cos(dh));
  const double s = std::abs(std::sin(dh));
  return {0.5 * (a.length * c + a.width * s), 0.5 * (a.length * s + a.width * c)};
}

void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kMalformedConfig, what);
}

}  // namespace

double idm_accel(double v, const std::optional<LeadInfo>& lead, double v0, const IdmParams& params) {
  const double speed = std::max(0.0, v);
  const double free = v0 > 1e-9 ? 1.0 - std::pow(speed / v0, params.delta) : -1.0;
  if (!lead) return std::max(params.max_accel * free, -params.emergency_decel);
  if (lead->gap <= 0.0) return -params.emergency_decel;
  const double dv = speed - lead->speed;
  const double dynamic = speed * params.time_headway + speed * dv / (2.0 * std::sqrt(params.max_accel * params.comfort_decel));
  const double s_star = params.min_gap + std::max(0.0, dynamic);
  const double ratio = s_star / lead->gap;
  return std::max(params.max_accel * (free - ratio * ratio), -params.emergency_decel);
}

double ScriptedMotion::speed_at(double t) const {
  if (times.empty()) return 0.0;
  if (t <= times.front()) return speeds.front();
  if (t >= times.back()) return speeds.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
  const double w = (t - times[i]) / (times[i + 1] - times[i]);
  return speeds[i] + w * (speeds[i + 1] - speeds[i]);
}

double ScriptedMotion::station_at(double t) const {
  if (times.empty() || t <= 0.0) return s0 + (times.empty() ? 0.0 : speeds.front() * t);
  double s = s0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (t <= times[i]) break;
    const double hi = std::min(t, times[i + 1]);
    s += 0.5 * (speeds[i] + speed_at(hi)) * (hi - times[i]);
  }
  if (t > times.back()) s += speeds.back() * (t - times.back());
  return s;
}

const char* behavior_name(BehaviorKind kind) {
  switch (kind) {
    case BehaviorKind::kScripted:
      return "scripted_trajectory";
    case BehaviorKind::kIdmFollow:
      return "idm_follow";
    case BehaviorKind::kModeSwitch:
      return "mode_switch";
  }
  return "scripted_trajectory";
}

BehaviorKind behavior_from_name(const std::string& name) {
  if (name == "scripted_trajectory") return BehaviorKind::kScripted;
  if (name == "idm_follow") return BehaviorKind::kIdmFollow;
  if (name == "mode_switch") return BehaviorKind::kModeSwitch;
  throw Error(ErrorCode::kMalformedConfig, "unknown behavior '" + name + "'");
}

void ScenarioScript::validate() const {
  check(!lanes.empty(), "scenario needs at least one lane");
  check(route_lane >= 0 && route_lane < static_cast<int>(lanes.size()), "route lane index out of range");
  check(duration > 0.0, "duration must be positive");
  check(sim_dt > 0.0, "sim_dt must be positive");
  check(divergence_threshold > 0.0, "divergence threshold must be positive");
  auto check_motion = [&](const ScriptedMotion& m) {
    check(m.path >= 0 && m.path < static_cast<int>(paths.size()), "motion path index out of range");
    check(!m.times.empty() && m.times.size() == m.speeds.size(), "motion needs matching times and speeds");
    check(m.times.front() == 0.0, "motion times must start at 0");
    for (std::size_t i = 1; i < m.times.size(); ++i) check(m.times[i] > m.times[i - 1], "motion times must increase");
    for (double v : m.speeds) check(v >= 0.0, "motion speeds must be nonnegative");
  };
  std::vector<int> ids;
  for (const ActorSpec& a : actors) {
    check(a.id != 0, "actor id 0 is reserved for the SDV");
    check(std::find(ids.begin(), ids.end(), a.id) == ids.end(), "duplicate actor id");
    ids.push_back(a.id);
    const ActorBehavior& b = a.behavior;
    switch (b.kind) {
      case BehaviorKind::kScripted:
        check_motion(b.motion);
        break;
      case BehaviorKind::kIdmFollow:
        check(b.path >= 0 && b.path < static_cast<int>(paths.size()), "idm path index out of range");
        check(b.initial_speed >= 0.0, "initial speed must be nonnegative");
        break;
      case BehaviorKind::kModeSwitch: {
        check(!b.modes.empty(), "mode_switch needs modes");
        double sum = 0.0;
        for (const ScriptMode& m : b.modes) {
          check(m.probability >= 0.0, "mode probabilities must be nonnegative");
          sum += m.probability;
          check_motion(m.motion);
        }
        check(std::abs(sum - 1.0) <= 1e-9, "mode probabilities must sum to 1");
        break;
      }
    }
  }
}

std::vector<int> resolve_modes(const ScenarioScript& script) {
  std::vector<int> out;
  for (std::size_t i = 0; i < script.actors.size(); ++i) {
    const ActorBehavior& b = script.actors[i].behavior;
    if (b.kind != BehaviorKind::kModeSwitch) {
      out.push_back(-1);
      continue;
    }
    Rng rng = make_rng(script.seed, "mode", i);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    int pick = static_cast<int>(b.modes.size()) - 1;
    for (std::size_t m = 0; m < b.modes.size(); ++m) {
      acc += b.modes[m].probability;
      if (u < acc) {
        pick = static_cast<int>(m);
        break;
      }
    }
    out.push_back(pick);
  }
  return out;
}

// ---------------------------------------------------------------------------
// World

World::World(const ScenarioScript& script, std::vector<int> modes, bool sdv_reactive)
    : script_(&script), modes_(std::move(modes)), sdv_reactive_(sdv_reactive) {
  script.validate();
  if (modes_.size() != script.actors.size()) throw Error(ErrorCode::kInvalidArgument, "one mode entry per actor");
  lanes_ = std::make_shared<const std::vector<LaneCenterline>>(script.lanes);
  const LaneCenterline& route = script.lanes[static_cast<std::size_t>(script.route_lane)];
  sdv_s_ = script.sdv_station;
  sdv_.id = 0;
  sdv_.pose = pose_on(route, sdv_s_);
  sdv_.speed = script.sdv_speed;
  sdv_.length = script.sdv_length;
  sdv_.width = script.sdv_width;

  for (std::size_t i = 0; i < script.actors.size(); ++i) {
    const ActorSpec& spec = script.actors[i];
    const ActorBehavior& b = spec.behavior;
    const ScriptedMotion* motion = nullptr;
    int path = b.path;
    double s = b.s0;
    double v = b.initial_speed;
    bool reactive = true;
    if (b.kind == BehaviorKind::kScripted) {
      motion = &b.motion;
    } else if (b.kind == BehaviorKind::kModeSwitch) {
      const int m = modes_[i];
      if (m < 0 || m >= static_cast<int>(b.modes.size())) throw Error(ErrorCode::kInvalidArgument, "mode index out of range");
      motion = &b.modes[static_cast<std::size_t>(m)].motion;
    }
    if (motion) {
      path = motion->path;
      s = motion->station_at(0.0);
      v = motion->speed_at(0.0);
      reactive = false;
    }
    const LaneCenterline& lane = script.paths[static_cast<std::size_t>(path)];
    ActorState a;
    a.id = spec.id;
    a.cls = spec.cls;
    a.length = spec.length;
    a.width = spec.width;
    a.pose = pose_on(lane, s);
    a.speed = v;
    actors_.push_back(a);
    path_.push_back(path);
    station_.push_back(s);
    reactive_.push_back(reactive ? 1 : 0);
    motion_.push_back(motion);
    desired_.push_back(b.kind == BehaviorKind::kIdmFollow && b.desired_speed > 0.0 ? b.desired_speed : lane.speed_limit());
    std::vector<Pose2> hist;
    for (int k = kHistorySteps; k >= 1; --k) hist.push_back(pose_on(lane, s - v * script.sim_dt * k));
    history_.push_back(std::move(hist));
  }
}

Scene World::scene() const {
  Scene s;
  s.timestamp = time_;
  s.sdv = sdv_;
  s.actors = actors_;
  s.lanes = lanes_;
  s.route_lane_index = script_->route_lane;
  s.history_dt = script_->sim_dt;
  s.history = history_;
  return s;
}

std::optional<LeadInfo> World::lead_for(std::size_t index, const LaneCenterline& path, double s,
                                        double length) const {
  const ActorState& self = index == kSdvIndex ? sdv_ : actors_[index];
  std::optional<LeadInfo> best;
  auto consider = [&](const ActorState& other) {
    const auto p = path.project(other.pose.position(), kLeadSearchOffset);
    if (!p || p->s <= s) return;
    const auto [along, across] = extents(other, p->heading);
    if (std::abs(p->d) >= 0.5 * self.width + across + kLeadMargin) return;
    const double gap = p->s - s - 0.5 * length - along;
    const double speed = std::max(0.0, other.speed * std::cos(other.pose.heading - p->heading));
    if (!best || gap < best->gap) best = LeadInfo{gap, speed};
  };
  if (index != kSdvIndex) consider(sdv_);
  for (std::size_t j = 0; j < actors_.size(); ++j) {
    if (j != index) consider(actors_[j]);
  }
  return best;
}

void World::step(const std::optional<ActorState>& sdv_next, double sdv_next_station) {
  const double dt = script_->sim_dt;
  const IdmParams idm;
  const std::size_t n = actors_.size();
  std::vector<double> next_s(n);
  std::vector<double> next_v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LaneCenterline& path = script_->paths[static_cast<std::size_t>(path_[i])];
    const double s = station_[i];
    const double v = actors_[i].speed;
    const auto lead = lead_for(i, path, s, actors_[i].length);
    const double a = idm_accel(v, lead, desired_[i], idm);
    if (!reactive_[i]) {
      // Compare where the script goes within the horizon with what a
      // reactive driver would do from here.
      const double h = kDivergenceHorizon;
      const double idm_s = v + a * h >= 0.0 ? s + v * h + 0.5 * a * h * h : s + v * v / (-2.0 * a);
      if (motion_[i]->station_at(time_ + h) - idm_s > script_->divergence_threshold) reactive_[i] = 1;
    }
    if (reactive_[i]) {
      next_v[i] = std::max(0.0, v + a * dt);
      next_s[i] = s + 0.5 * (v + next_v[i]) * dt;
    } else {
      next_v[i] = motion_[i]->speed_at(time_ + dt);
      next_s[i] = motion_[i]->station_at(time_ + dt);
    }
  }
  double sdv_s = sdv_next_station;
  ActorState sdv = sdv_;
  if (sdv_reactive_) {
    const LaneCenterline& route = script_->lanes[static_cast<std::size_t>(script_->route_lane)];
    const double a = idm_accel(sdv_.speed, lead_for(kSdvIndex, route, sdv_s_, sdv_.length), route.speed_limit(), idm);
    const double v = std::max(0.0, sdv_.speed + a * dt);
    sdv_s = sdv_s_ + 0.5 * (sdv_.speed + v) * dt;
    sdv.pose = pose_on(route, sdv_s);
    sdv.speed = v;
  } else if (sdv_next) {
    sdv = *sdv_next;
    sdv.id = 0;
  } else {
    sdv_s = sdv_s_;
  }

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Pose2>& h = history_[i];
    h.erase(h.begin());
    h.push_back(actors_[i].pose);
    station_[i] = next_s[i];
    actors_[i].speed = next_v[i];
    actors_[i].pose = pose_on(script_->paths[static_cast<std::size_t>(path_[i])], next_s[i]);
  }
  sdv_ = sdv;
  sdv_s_ = sdv_s;
  time_ += dt;
  ++step_;
}

// ---------------------------------------------------------------------------
// Futures

FutureProvider model_provider(const ModelBundle& models, ForecastSource source, int k, std::uint64_t seed) {
  if (!models.decoder) throw Error(ErrorCode::kInvalidArgument, "model provider needs a decoder");
  if (source == ForecastSource::kDiverse && !models.sampler) {
    throw Error(ErrorCode::kInvalidArgument, "diverse forecasts need a sampler");
  }
  return [models, source, k, seed](const Scene& scene, int step) {
    FutureSet set;
    if (source == ForecastSource::kDiverse) {
      set = infer_diverse(*models.sampler, *models.decoder, scene);
    } else {
      Rng rng = make_rng(seed, "rollout.prior", static_cast<std::uint64_t>(step));
      set = forecast_prior(*models.decoder, scene, k, rng);
    }
    if (models.scorer && !scene.actors.empty()) models.scorer->score(scene, set, models.decoder->config());
    return set;
  };
}

FutureProvider constant_velocity_provider(int k) {
  return [k](const Scene& scene, int) {
    ScenePrediction p;
    p.dt = kForecastDt;
    p.xy.resize(static_cast<Eigen::Index>(scene.actors.size()), 2 * kForecastSteps);
    for (std::size_t i = 0; i < scene.actors.size(); ++i) {
      const ActorState& a = scene.actors[i];
      for (int t = 0; t < kForecastSteps; ++t) {
        const double d = a.speed * kForecastDt * (t + 1);
        p.xy(static_cast<Eigen::Index>(i), 2 * t) = a.pose.x + d * std::cos(a.pose.heading);
        p.xy(static_cast<Eigen::Index>(i), 2 * t + 1) = a.pose.y + d * std::sin(a.pose.heading);
      }
    }
    FutureSet set;
    set.futures.assign(static_cast<std::size_t>(std::max(1, k)), p);
    set.set_uniform();
    return set;
  };
}

// ---------------------------------------------------------------------------
// Rollouts

int RolloutLog::num_collision_onsets() const {
  int count = 0;
  for (const CollisionEvent& e : collisions) {
    const bool continued = std::any_of(collisions.begin(), collisions.end(), [&e](const CollisionEvent& p) {
      return p.actor_id == e.actor_id && p.step == e.step - 1;
    });
    if (!continued) ++count;
  }
  return count;
}

namespace {

struct Executor {
  const ScenarioScript& script;
  const RolloutConfig& config;
  World world;
  FrenetState fs;
  RolloutLog log;
  double prev_accel = 0.0;

  Executor(const ScenarioScript& s, const RolloutConfig& c, std::vector<int> modes)
      : script(s), config(c), world(s, modes, false) {
    if (std::abs(config.sampler.dt - script.sim_dt) > 1e-12) {
      throw Error(ErrorCode::kMalformedConfig, "planner dt must equal the simulation step");
    }
    config.sampler.validate();
    fs.s = script.sdv_station;
    fs.s_dot = script.sdv_speed;
    log.scenario = script.name;
    log.seed = script.seed;
    log.planner = planner_name(config.planner);
    log.modes = modes;
    log.initial_station = fs.s;
  }

  int num_steps() const { return static_cast<int>(std::lround(script.duration / script.sim_dt)); }

  void execute(const PlanCandidate& cand, int index, double objective) {
    const double dt = script.sim_dt;
    ActorState sdv = world.sdv();
    const double v_prev = sdv.speed;
    sdv.pose = {cand.action.waypoints[1].x(), cand.action.waypoints[1].y(), cand.action.heading[1]};
    sdv.speed = cand.action.speed[1];
    const FrenetState next = cand.action_frenet[1];
    world.step(sdv, next.s);
    fs = next;

    StepRecord r;
    r.step = world.step_index() - 1;
    r.time = world.time();
    r.sdv = world.sdv();
    r.sdv_station = fs.s;
    r.accel = (sdv.speed - v_prev) / dt;
    r.jerk = (r.accel - prev_accel) / dt;
    r.lat_accel = sdv.speed * sdv.speed * cand.action.curvature[1];
    prev_accel = r.accel;
    r.action_index = index;
    r.objective = objective;
    r.actors = world.actors();
    const OrientedBox mine = box_of(r.sdv);
    for (const ActorState& a : r.actors) {
      if (obb_overlap(mine, box_of(a))) log.collisions.push_back({r.step, a.id});
    }
    log.steps.push_back(std::move(r));
  }

  bool off_lane() const {
    const LaneCenterline& route = script.lanes[static_cast<std::size_t>(script.route_lane)];
    return std::abs(fs.d) > config.cost.half_road_width + 0.5 * script.sdv_width || fs.s >= route.length();
  }

  void stop(const std::string& why) {
    log.terminated_early = true;
    log.termination = why;
  }

  RolloutLog finish() {
    log.progress = fs.s - log.initial_station;
    return std::move(log);
  }
};

}  // namespace

RolloutLog run_rollout(const ScenarioScript& script, const RolloutConfig& config, const FutureProvider& provider) {
  Executor ex(script, config, resolve_modes(script));
  const int steps = ex.num_steps();
  for (int i = 0; i < steps; ++i) {
    if (ex.off_lane()) {
      ex.stop("sdv left the route lane");
      break;
    }
    const Scene scene = ex.world.scene();
    const FutureSet futures = provider(scene, i);
    PlanningProblem problem;
    try {
      problem = build_problem(scene, ex.fs, futures, config.sampler, config.weights, config.cost);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyCandidateSet) throw;
      ex.stop(e.what());
      break;
    }
    const PlannerOutput out = plan(config.planner, problem.candidates, problem.table, futures.probabilities);
    ex.execute(problem.candidates[static_cast<std::size_t>(out.action_index)], out.action_index, out.total_objective);
  }
  return ex.finish();
}

RolloutLog replay(const ScenarioScript& script, const RolloutConfig& config, const RolloutLog& log) {
  Executor ex(script, config, log.modes);
  const LaneCenterline& route = script.lanes[static_cast<std::size_t>(script.route_lane)];
  for (const StepRecord& rec : log.steps) {
    const std::vector<PlanCandidate> cands = generate_candidates(ex.fs, route, config.sampler);
    if (rec.action_index < 0 || rec.action_index >= static_cast<int>(cands.size())) {
      throw Error(ErrorCode::kInvalidArgument, "recorded action index out of range");
    }
    ex.execute(cands[static_cast<std::size_t>(rec.action_index)], rec.action_index, rec.objective);
  }
  if (log.terminated_early) ex.stop(log.termination);
  return ex.finish();
}

TrafficLog run_traffic(const ScenarioScript& script, const std::vector<int>& modes, bool keep_scenes) {
  World world(script, modes, true);
  TrafficLog out;
  const int steps = static_cast<int>(std::lround(script.duration / script.sim_dt));
  for (int i = 0; i <= steps; ++i) {
    if (keep_scenes) out.scenes.push_back(world.scene());
    out.times.push_back(world.time());
    out.sdv.push_back(world.sdv());
    out.actors.push_back(world.actors());
    std::vector<OrientedBox> boxes{box_of(world.sdv())};
    for (const ActorState& a : world.actors()) boxes.push_back(box_of(a));
    for (std::size_t a = 0; a < boxes.size(); ++a) {
      for (std::size_t b = a + 1; b < boxes.size(); ++b) {
        if (obb_overlap(boxes[a], boxes[b])) ++out.actor_collisions;
      }
    }
    if (i < steps) world.step(std::nullopt, 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario families

const char* family_name(Family family) {
  switch (family) {
    case Family::kLaneFollow:
      return "lane_follow";
    case Family::kYieldOrGo:
      return "yield_or_go";
    case Family::kCutIn:
      return "cut_in";
    case Family::kUnprotectedLeft:
      return "unprotected_left";
  }
  return "lane_follow";
}

Family family_from_name(const std::string& name) {
  if (name == "lane_follow") return Family::kLaneFollow;
  if (name == "yield_or_go") return Family::kYieldOrGo;
  if (name == "cut_in") return Family::kCutIn;
  if (name == "unprotected_left" || name == "fork") return Family::kUnprotectedLeft;
  throw Error(ErrorCode::kInvalidArgument, "unknown scenario family '" + name + "'");
}

std::vector<double> default_mode_probabilities(Family family) {
  switch (family) {
    case Family::kLaneFollow:
      return {};
    case Family::kYieldOrGo:
      return {0.7, 0.3};
    case Family::kCutIn:
      return {0.6, 0.4};
    case Family::kUnprotectedLeft:
      return {0.7, 0.3};
  }
  return {};
}

namespace {

constexpr double kRouteLimit = 12.0;
constexpr double kRouteLength = 450.0;
constexpr double kLaneOffset = 3.5;

struct Uniform {
  Rng rng;
  double operator()(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
};

ScriptedMotion motion(int path, double s0, std::vector<double> times, std::vector<double> speeds) {
  return ScriptedMotion{path, s0, std::move(times), std::move(speeds)};
}

std::vector<double> probabilities_for(Family family, const FamilyOptions& options) {
  std::vector<double> p = options.mode_probabilities.empty() ? default_mode_probabilities(family) : options.mode_probabilities;
  if (p.size() != default_mode_probabilities(family).size()) {
    throw Error(ErrorCode::kMalformedConfig, std::string("wrong number of mode probabilities for ") + family_name(family));
  }
  return p;
}

ActorSpec vehicle(int id, ActorBehavior behavior) {
  ActorSpec a;
  a.id = id;
  a.behavior = std::move(behavior);
  return a;
}

ActorBehavior scripted(ScriptedMotion m) {
  ActorBehavior b;
  b.kind = BehaviorKind::kScripted;
  b.motion = std::move(m);
  return b;
}

ActorBehavior idm_follow(int path, double s0, double speed, double desired) {
  ActorBehavior b;
  b.kind = BehaviorKind::kIdmFollow;
  b.path = path;
  b.s0 = s0;
  b.initial_speed = speed;
  b.desired_speed = desired;
  return b;
}

ActorBehavior mode_switch(std::vector<ScriptMode> modes) {
  ActorBehavior b;
  b.kind = BehaviorKind::kModeSwitch;
  b.modes = std::move(modes);
  return b;
}

ScenarioScript base_script(Family family, std::uint64_t seed) {
  ScenarioScript s;
  s.family = family_name(family);
  s.name = s.family + "_" + std::to_string(seed);
  s.seed = seed;
  s.lanes.push_back(LaneCenterline::straight({0.0, 0.0}, 0.0, kRouteLength, kRouteLimit));
  s.route_lane = 0;
  return s;
}

ScenarioScript lane_follow(std::uint64_t seed, Uniform& u) {
  ScenarioScript s = base_script(Family::kLaneFollow, seed);
  s.lanes.push_back(LaneCenterline::straight({kRouteLength, kLaneOffset}, kPi, kRouteLength, 10.0));
  s.paths = {s.lanes[0], s.lanes[1]};
  s.sdv_speed = u(7.0, 11.0);
  s.sdv_station = u(20.0, 40.0);
  const double lead_v = u(5.0, 10.0);
  s.actors.push_back(vehicle(1, scripted(motion(0, s.sdv_station + u(25.0, 45.0), {0.0}, {lead_v}))));
  const double opp_v = u(6.0, 10.0);
  s.actors.push_back(vehicle(2, scripted(motion(1, kRouteLength - s.sdv_station - u(60.0, 120.0), {0.0}, {opp_v}))));
  s.snapshot_time = u(1.0, 10.0);
  return s;
}

// Crossing road at x = 120 heading +y; the stop line sits 4.5 m before
// the route centerline.
ScenarioScript yield_or_go(std::uint64_t seed, Uniform& u, const std::vector<double>& p) {
  constexpr double kCrossX = 120.0;
  constexpr double kStart = -80.0;
  constexpr double kStopY = -4.5;
  ScenarioScript s = base_script(Family::kYieldOrGo, seed);
  s.lanes.push_back(LaneCenterline::straight({kCrossX, kStart}, 0.5 * kPi, kStopY - kStart, 10.0));
  s.lanes.push_back(LaneCenterline::straight({kCrossX, kStopY}, 0.5 * kPi, 80.0 - kStopY, 10.0));
  s.paths = {s.lanes[0], LaneCenterline::straight({kCrossX, kStart}, 0.5 * kPi, 160.0, 10.0)};

  const double v = u(6.0, 9.0);
  const double t_j = u(3.5, 5.0);
  const double v_slow = 3.0;
  // Front bumper stops at the stop line after decelerating from v_slow over 1.5 s.
  const double stop_s = (kStopY - kStart) - 2.4;
  const double slow_s = stop_s - 0.5 * v_slow * 1.5;
  const double s0 = slow_s - v * (t_j - 2.0) - (v + v_slow);
  ScriptMode yield{"yield", p[0], motion(1, s0, {0.0, t_j - 2.0, t_j, t_j + 1.5}, {v, v, v_slow, 0.0})};
  ScriptMode go{"go", p[1], motion(1, s0, {0.0, t_j - 2.0, t_j, t_j + 3.0}, {v, v, v_slow, 8.0})};
  s.actors.push_back(vehicle(1, mode_switch({yield, go})));

  s.sdv_speed = u(8.0, 11.0);
  const double gap = u(40.0, 55.0);
  s.sdv_station = std::max(5.0, kCrossX - gap - s.sdv_speed * t_j);
  s.snapshot_time = std::max(1.0, t_j + u(-2.5, 0.5));
  return s;
}

// Adjacent lane on the left; the cut-in path merges into the route lane.
ScenarioScript cut_in(std::uint64_t seed, Uniform& u, const std::vector<double>& p) {
  ScenarioScript s = base_script(Family::kCutIn, seed);
  s.lanes.push_back(LaneCenterline::straight({0.0, kLaneOffset}, 0.0, kRouteLength, kRouteLimit));
  s.sdv_speed = u(8.0, 10.0);
  s.sdv_station = u(20.0, 40.0);
  const double v = u(11.0, 12.5);
  const double ahead = u(8.0, 16.0);
  const double t_j = u(2.0, 4.0);
  const double s0 = s.sdv_station + ahead;
  const double x_lc = s0 + v * t_j;
  std::vector<Vec2> merge{{0.0, kLaneOffset}};
  for (int k = 0; k <= 20; ++k) {
    const double w = k / 20.0;
    const double smooth = w * w * (3.0 - 2.0 * w);
    merge.emplace_back(x_lc + 30.0 * w, kLaneOffset * (1.0 - smooth));
  }
  merge.emplace_back(kRouteLength, 0.0);
  s.paths = {s.lanes[1], LaneCenterline::from_points(merge, kRouteLimit)};
  ScriptMode stay{"stay", p[0], motion(0, s0, {0.0}, {v})};
  ScriptMode in{"cut_in", p[1], motion(1, s0, {0.0}, {v})};
  s.actors.push_back(vehicle(1, mode_switch({stay, in})));
  s.snapshot_time = std::max(1.0, t_j + u(-2.0, 1.0));
  return s;
}

// Oncoming lane at y = 3.5 split at the junction x = 150, plus a left-turn
// lane that crosses the route. Car 1 turns or goes straight; car 2 follows.
ScenarioScript unprotected_left(std::uint64_t seed, Uniform& u, const std::vector<double>& p) {
  constexpr double kJunction = 150.0;
  constexpr double kStartX = 300.0;
  constexpr double kRadius = 7.0;
  ScenarioScript s = base_script(Family::kUnprotectedLeft, seed);
  s.lanes.push_back(LaneCenterline::straight({kStartX, kLaneOffset}, kPi, kStartX - kJunction, 10.0));
  s.lanes.push_back(LaneCenterline::straight({kJunction, kLaneOffset}, kPi, kJunction, 10.0));
  std::vector<Vec2> arc;
  for (int k = 0; k <= 12; ++k) {
    const double th = 0.5 * kPi * k / 12.0;
    arc.emplace_back(kJunction - kRadius * std::sin(th), kLaneOffset - kRadius + kRadius * std::cos(th));
  }
  std::vector<Vec2> turn_lane = arc;
  turn_lane.emplace_back(kJunction - kRadius, -60.0);
  s.lanes.push_back(LaneCenterline::from_points(turn_lane, 10.0, 1.0));
  std::vector<Vec2> turn_path{{kStartX, kLaneOffset}};
  turn_path.insert(turn_path.end(), arc.begin(), arc.end());
  turn_path.emplace_back(kJunction - kRadius, -60.0);
  s.paths = {LaneCenterline::straight({kStartX, kLaneOffset}, kPi, kStartX, 10.0),
             LaneCenterline::from_points(turn_path, 10.0, 1.0)};

  const double v1 = u(7.0, 9.0);
  const double t_j = u(4.5, 6.0);
  const double v_turn = 4.5;
  const double s0 = (kStartX - kJunction) - v1 * (t_j - 2.0) - (v1 + v_turn);
  const double arc_time = 0.5 * kPi * kRadius / v_turn;
  ScriptMode straight{"straight", p[0], motion(0, s0, {0.0, t_j - 2.0, t_j, t_j + 2.0}, {v1, v1, v_turn, v1})};
  ScriptMode turn{"turn", p[1], motion(1, s0, {0.0, t_j - 2.0, t_j, t_j + arc_time, t_j + arc_time + 2.0},
                                       {v1, v1, v_turn, v_turn, 7.0})};
  s.actors.push_back(vehicle(1, mode_switch({straight, turn})));
  s.actors.push_back(vehicle(2, idm_follow(0, s0 - u(14.0, 22.0), v1, v1)));

  // Where the turn path crosses the route centerline.
  const double cross_x = kJunction - std::sqrt(kRadius * kRadius - (kRadius - kLaneOffset) * (kRadius - kLaneOffset));
  s.sdv_speed = u(9.0, 11.0);
  const double gap = u(30.0, 45.0);
  s.sdv_station = std::max(5.0, cross_x - gap - s.sdv_speed * t_j);
  s.snapshot_time = std::max(1.0, t_j + u(-3.0, 2.0));
  return s;
}

}  // namespace

ScenarioScript make_scenario(Family family, std::uint64_t seed, const FamilyOptions& options) {
  Uniform u{make_rng(seed, "scenario")};
  const std::vector<double> p = probabilities_for(family, options);
  ScenarioScript s;
  switch (family) {
    case Family::kLaneFollow:
      s = lane_follow(seed, u);
      break;
    case Family::kYieldOrGo:
      s = yield_or_go(seed, u, p);
      break;
    case Family::kCutIn:
      s = cut_in(seed, u, p);
      break;
    case Family::kUnprotectedLeft:
      s = unprotected_left(seed, u, p);
      break;
  }
  s.validate();
  return s;
}

ForecastSample sample_scenario(const ScenarioScript& script, const std::vector<int>& modes) {
  World world(script, modes, true);
  const int snap = static_cast<int>(std::lround(script.snapshot_time / script.sim_dt));
  const int stride = static_cast<int>(std::lround(kForecastDt / script.sim_dt));
  while (world.step_index() < snap) world.step(std::nullopt, 0.0);
  ForecastSample out;
  out.scene = world.scene();
  out.future.resize(static_cast<Eigen::Index>(world.actors().size()), 2 * kForecastSteps);
  for (int t = 0; t < kForecastSteps; ++t) {
    for (int k = 0; k < stride; ++k) world.step(std::nullopt, 0.0);
    for (std::size_t i = 0; i < world.actors().size(); ++i) {
      out.future(static_cast<Eigen::Index>(i), 2 * t) = world.actors()[i].pose.x;
      out.future(static_cast<Eigen::Index>(i), 2 * t + 1) = world.actors()[i].pose.y;
    }
  }
  const auto mode = std::max_element(modes.begin(), modes.end());
  out.mode = mode == modes.end() ? 0 : std::max(0, *mode);
  return out;
}

Dataset generate_dataset(Family family, int count, std::uint64_t seed, const FamilyOptions& options) {
  if (count < 0) throw Error(ErrorCode::kInvalidArgument, "count must be nonnegative");
  Dataset d;
  d.family = family_name(family);
  d.seed = seed;
  d.samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const ScenarioScript script = make_scenario(family, derive_seed(seed, "dataset", static_cast<std::uint64_t>(i)), options);
    d.samples.push_back(sample_scenario(script, resolve_modes(script)));
  }
  return d;
}

}  // namespace lookout
