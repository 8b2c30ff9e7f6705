#include "lookout/cost.hpp"

#include "lookout/error.hpp"

#include <algorithm>
#include <cmath>

namespace lookout {

const char* subcost_name(int index) {
  static const char* const kNames[kNumSubcosts] = {
      "collision", "safety_distance", "headway", "lane_offset", "road_boundary", "speed_limit",
      "progress",  "jerk",            "accel",   "decel",       "lat_accel",     "curvature"};
  if (index < 0 || index >= kNumSubcosts) throw Error(ErrorCode::kInvalidArgument, "subcost index out of range");
  return kNames[index];
}

CostWeights CostWeights::scaled(double factor) const {
  CostWeights out = *this;
  for (double& v : out.w) v *= factor;
  return out;
}

void CostWeights::validate() const {
  for (int i = 0; i < kNumSubcosts; ++i) {
    if (!std::isfinite((*this)[i]) || (*this)[i] < 0.0) {
      throw Error(ErrorCode::kMalformedConfig, std::string("weight '") + subcost_name(i) + "' must be >= 0");
    }
  }
}

void CostConfig::validate() const {
  for (double p : collision_penalty) {
    if (!(p >= 0.0)) throw Error(ErrorCode::kMalformedConfig, "collision penalties must be >= 0");
  }
  if (!(near_distance > 0.0) || !(comfort_decel > 0.0) || !(hard_decel > 0.0) || !(reference_dt > 0.0) ||
      !(sdv_length > 0.0) || !(sdv_width > 0.0) || reaction_time < 0.0 || max_curvature < 0.0) {
    throw Error(ErrorCode::kMalformedConfig, "cost parameters out of range");
  }
}

void CostBreakdown::apply(const CostWeights& weights) {
  total = 0.0;
  for (int i = 0; i < kNumSubcosts; ++i) total += weights[i] * (*this)[i];
}

std::size_t FutureTracks::index_of(double t) const {
  const double x = (t - t0) / dt;
  const double r = std::round(x);
  if (std::abs(x - r) > 1e-6 || r < 0.0 || r > static_cast<double>(steps)) {
    throw Error(ErrorCode::kAlignment, "trajectory time not on the future grid");
  }
  return static_cast<std::size_t>(r);
}

namespace {

void fill_lane_terms(ActorTrack& track, const LaneCenterline& lane) {
  const std::size_t n = track.boxes.size();
  track.station.assign(n, 0.0);
  track.lateral.assign(n, 0.0);
  track.along_speed.assign(n, 0.0);
  track.on_lane.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto proj = lane.project(track.boxes[i].center, 20.0);
    if (!proj) continue;
    track.on_lane[i] = 1;
    track.station[i] = proj->s;
    track.lateral[i] = proj->d;
    track.along_speed[i] = std::max(0.0, track.speed[i] * std::cos(track.boxes[i].heading - proj->heading));
  }
}

ActorTrack track_from_positions(const ActorState& actor, const std::vector<Vec2>& pos, double dt) {
  ActorTrack track;
  track.cls = actor.cls;
  const DerivedKinematics k = derive_kinematics(pos, dt, actor.pose.heading);
  track.speed = k.speed;
  track.boxes.resize(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    track.boxes[i] = OrientedBox{pos[i], i == 0 ? actor.pose.heading : k.heading[i], actor.length, actor.width};
  }
  track.frames.reserve(track.boxes.size());
  for (const OrientedBox& b : track.boxes) track.frames.push_back(BoxFrame::of(b));
  if (!track.speed.empty()) track.speed[0] = actor.speed;
  return track;
}

}  // namespace

FutureTracks build_tracks(const Scene& scene, const ScenePrediction& prediction,
                          const LaneCenterline& lane, double dt, std::size_t steps) {
  if (prediction.num_actors() != static_cast<int>(scene.actors.size())) {
    throw Error(ErrorCode::kShapeMismatch, "prediction rows must match scene actors");
  }
  FutureTracks out;
  out.dt = dt;
  out.steps = steps;
  const int T = prediction.num_steps();
  const double horizon = prediction.dt * T;
  for (std::size_t n = 0; n < scene.actors.size(); ++n) {
    const ActorState& actor = scene.actors[n];
    std::vector<Vec2> pos(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
      const double t = std::min(dt * static_cast<double>(i), horizon);
      const double u = t / prediction.dt;
      const int hi = std::min(T, static_cast<int>(std::ceil(u - 1e-9)));
      const int lo = std::max(0, hi - 1);
      auto knot = [&](int k) -> Vec2 {
        if (k == 0) return actor.pose.position();
        const auto r = static_cast<Eigen::Index>(n);
        return {prediction.xy(r, 2 * (k - 1)), prediction.xy(r, 2 * (k - 1) + 1)};
      };
      if (hi == 0) {
        pos[i] = knot(0);
      } else {
        const double w = std::clamp(u - lo, 0.0, 1.0);
        pos[i] = (1.0 - w) * knot(lo) + w * knot(hi);
      }
    }
    ActorTrack track = track_from_positions(actor, pos, dt);
    fill_lane_terms(track, lane);
    out.actors.push_back(std::move(track));
  }
  return out;
}

FutureTracks static_tracks(const Scene& scene, const LaneCenterline& lane, double dt,
                           std::size_t steps) {
  FutureTracks out;
  out.dt = dt;
  out.steps = steps;
  for (const ActorState& actor : scene.actors) {
    ActorTrack track = track_from_positions(actor, std::vector<Vec2>(steps + 1, actor.pose.position()), dt);
    std::fill(track.speed.begin(), track.speed.end(), 0.0);
    fill_lane_terms(track, lane);
    out.actors.push_back(std::move(track));
  }
  return out;
}

namespace {

double step_scale(const Trajectory& traj, const CostConfig& config) { return traj.dt / config.reference_dt; }

double half_diagonal(double length, double width) { return 0.5 * std::hypot(length, width); }

const std::vector<double>& lateral_of(const Trajectory& traj, const LaneCenterline& lane, bool station,
                                      std::vector<double>& out) {
  const std::vector<double>& cached = station ? traj.station : traj.lateral;
  if (cached.size() == traj.size()) return cached;
  out.assign(traj.size(), 0.0);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto p = lane.project(traj.waypoints[i]);
    if (!p) throw Error(ErrorCode::kProjectionOutOfRange, "trajectory leaves the lane extent");
    out[i] = station ? p->s : p->d;
  }
  return out;
}

}  // namespace

std::vector<BoxFrame> sdv_frames(const Trajectory& traj, const CostConfig& config) {
  std::vector<BoxFrame> out;
  out.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out.push_back(BoxFrame::of(OrientedBox{traj.waypoints[i], traj.heading[i], config.sdv_length, config.sdv_width}));
  }
  return out;
}

CollisionTerms collision_cost(const Trajectory& traj, const FutureTracks& tracks,
                              const CostConfig& config) {
  return collision_cost(traj, sdv_frames(traj, config), tracks, config);
}

CollisionTerms collision_cost(const Trajectory& traj, const std::vector<BoxFrame>& footprint,
                              const FutureTracks& tracks, const CostConfig& config) {
  CollisionTerms out;
  if (traj.size() < 2 || tracks.actors.empty()) return out;
  if (footprint.size() != traj.size()) throw Error(ErrorCode::kShapeMismatch, "footprint does not match trajectory");
  const double scale = step_scale(traj, config);
  const double sdv_reach = half_diagonal(config.sdv_length, config.sdv_width);
  const std::size_t first = tracks.index_of(traj.time_at(1));
  tracks.index_of(traj.end_time());
  for (const ActorTrack& actor : tracks.actors) {
    const bool cached = actor.frames.size() == actor.boxes.size();
    const double penalty = config.collision_penalty[static_cast<std::size_t>(actor.cls)];
    double reach = -1.0;
    for (std::size_t i = 1; i < traj.size(); ++i) {
      const std::size_t g = first + i - 1;
      const OrientedBox& box = actor.boxes[g];
      const BoxFrame& sdv = footprint[i];
      if (reach < 0.0) reach = sdv_reach + half_diagonal(box.length, box.width) + config.near_distance;
      if ((box.center - sdv.center).squaredNorm() > reach * reach) continue;
      const BoxFrame other = cached ? actor.frames[g] : BoxFrame::of(box);
      const double v = traj.speed[i];
      const double gap = box_separation(sdv, other);
      if (gap <= 0.0) {
        out.collision += scale * penalty;
        out.proximity += scale * v * v;
        continue;
      }
      if (gap >= config.near_distance) continue;
      const double dist = box_distance(sdv, other);
      if (dist < config.near_distance) out.proximity += scale * v * v * (1.0 - dist / config.near_distance);
    }
  }
  return out;
}

double headway_cost(const Trajectory& traj, const FutureTracks& tracks, const LaneCenterline& lane,
                    const CostConfig& config) {
  if (traj.size() < 2 || tracks.actors.empty()) return 0.0;
  const double scale = step_scale(traj, config);
  std::vector<double> scratch;
  const std::vector<double>& station = lateral_of(traj, lane, true, scratch);
  const std::size_t first = tracks.index_of(traj.time_at(1));
  tracks.index_of(traj.end_time());
  double total = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const std::size_t g = first + i - 1;
    const double s = station[i];
    const ActorTrack* lead = nullptr;
    for (const ActorTrack& actor : tracks.actors) {
      if (!actor.on_lane[g] || std::abs(actor.lateral[g]) >= config.same_lane_half_width) continue;
      if (actor.station[g] <= s) continue;
      if (!lead || actor.station[g] < lead->station[g]) lead = &actor;
    }
    if (!lead) continue;
    const double v = traj.speed[i];
    const double v_lead = lead->along_speed[g];
    const double gap = lead->station[g] - s - 0.5 * (config.sdv_length + lead->boxes[g].length);
    const double d_safe = v * config.reaction_time + v * v / (2.0 * config.comfort_decel) -
                          v_lead * v_lead / (2.0 * config.hard_decel);
    const double violation = std::max(0.0, d_safe - gap);
    total += scale * violation * violation;
  }
  return total;
}

TrafficRuleTerms traffic_rule_costs(const Trajectory& traj, const LaneCenterline& lane,
                                    const CostConfig& config) {
  TrafficRuleTerms out;
  if (traj.size() < 2) return out;
  const double scale = step_scale(traj, config);
  std::vector<double> scratch;
  const std::vector<double>& d = lateral_of(traj, lane, false, scratch);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    out.lane_offset += scale * std::abs(d[i]);
    out.road_boundary += scale * std::max(0.0, std::abs(d[i]) + 0.5 * config.sdv_width - config.half_road_width);
    out.speed_limit += scale * std::max(0.0, traj.speed[i] - lane.speed_limit());
  }
  return out;
}

ComfortTerms comfort_and_progress(const Trajectory& traj, const LaneCenterline& lane,
                                  const CostConfig& config) {
  ComfortTerms out;
  if (traj.size() < 2) return out;
  const double dt = traj.dt;
  const double scale = step_scale(traj, config);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double a = traj.accel[i];
    const double v = traj.speed[i];
    const double k = traj.curvature[i];
    out.jerk += traj.jerk[i] * traj.jerk[i] * dt;
    out.accel += std::max(0.0, a) * std::max(0.0, a) * dt;
    out.decel += std::max(0.0, -a) * std::max(0.0, -a) * dt;
    const double lat = v * v * k;
    out.lat_accel += lat * lat * dt;
    const double excess = std::max(0.0, std::abs(k) - config.max_curvature);
    out.curvature += scale * excess * excess;
  }
  if (traj.station.size() == traj.size()) {
    out.progress = -(traj.station.back() - traj.station.front());
  } else {
    const auto a = lane.project(traj.waypoints.front());
    const auto b = lane.project(traj.waypoints.back());
    if (!a || !b) throw Error(ErrorCode::kProjectionOutOfRange, "trajectory leaves the lane extent");
    out.progress = -(b->s - a->s);
  }
  return out;
}

CostBreakdown static_cost(const Trajectory& traj, const LaneCenterline& lane,
                          const CostWeights& weights, const CostConfig& config) {
  CostBreakdown out;
  const TrafficRuleTerms rules = traffic_rule_costs(traj, lane, config);
  const ComfortTerms comfort = comfort_and_progress(traj, lane, config);
  out[kLaneOffset] = rules.lane_offset;
  out[kRoadBoundary] = rules.road_boundary;
  out[kSpeedLimit] = rules.speed_limit;
  out[kProgress] = comfort.progress;
  out[kJerk] = comfort.jerk;
  out[kAccel] = comfort.accel;
  out[kDecel] = comfort.decel;
  out[kLatAccel] = comfort.lat_accel;
  out[kCurvature] = comfort.curvature;
  out.apply(weights);
  return out;
}

CostBreakdown dynamic_cost(const Trajectory& traj, const FutureTracks& tracks,
                           const LaneCenterline& lane, const CostWeights& weights,
                           const CostConfig& config) {
  return dynamic_cost(traj, sdv_frames(traj, config), tracks, lane, weights, config);
}

CostBreakdown dynamic_cost(const Trajectory& traj, const std::vector<BoxFrame>& footprint,
                           const FutureTracks& tracks, const LaneCenterline& lane,
                           const CostWeights& weights, const CostConfig& config) {
  CostBreakdown out;
  const CollisionTerms c = collision_cost(traj, footprint, tracks, config);
  out[kCollision] = c.collision;
  out[kSafetyDistance] = c.proximity;
  out[kHeadway] = headway_cost(traj, tracks, lane, config);
  out.apply(weights);
  return out;
}

CostBreakdown total_cost(const Trajectory& traj, const FutureTracks& tracks,
                         const LaneCenterline& lane, const CostWeights& weights,
                         const CostConfig& config) {
  CostBreakdown out = static_cost(traj, lane, weights, config);
  const CostBreakdown dyn = dynamic_cost(traj, tracks, lane, weights, config);
  for (int i = 0; i < kNumSubcosts; ++i) out[i] += dyn[i];
  out.apply(weights);
  return out;
}

}  // namespace lookout
