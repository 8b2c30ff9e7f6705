#include "lookout/geom.hpp"

#include "lookout/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace lookout {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Vec2 left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

}  // namespace

double normalize_angle(double angle) {
  double a = std::fmod(angle, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

const char* actor_class_name(ActorClass cls) {
  switch (cls) {
    case ActorClass::kVehicle:
      return "vehicle";
    case ActorClass::kPedestrian:
      return "pedestrian";
    case ActorClass::kBicyclist:
      return "bicyclist";
  }
  return "vehicle";
}

ActorClass actor_class_from_name(const std::string& name) {
  if (name == "vehicle") return ActorClass::kVehicle;
  if (name == "pedestrian") return ActorClass::kPedestrian;
  if (name == "bicyclist") return ActorClass::kBicyclist;
  throw Error(ErrorCode::kInvalidArgument, "unknown actor class '" + name + "'");
}

// ---------------------------------------------------------------------------
// LaneCenterline

LaneCenterline LaneCenterline::from_points(const std::vector<Vec2>& raw, double speed_limit,
                                           double max_spacing) {
  if (max_spacing <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "lane spacing must be positive");
  }
  std::vector<Vec2> pts;
  pts.reserve(raw.size());
  for (const Vec2& p : raw) {
    if (pts.empty() || (p - pts.back()).norm() > 1e-9) pts.push_back(p);
  }
  if (pts.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "lane needs at least two distinct points");
  }

  std::vector<Vec2> dense;
  dense.push_back(pts.front());
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 a = pts[i - 1];
    const Vec2 b = pts[i];
    const double len = (b - a).norm();
    const auto pieces = static_cast<int>(std::ceil(len / max_spacing - 1e-12));
    for (int k = 1; k < pieces; ++k) {
      dense.push_back(a + (b - a) * (static_cast<double>(k) / pieces));
    }
    dense.push_back(b);
  }

  LaneCenterline lane;
  lane.speed_limit_ = speed_limit;
  const std::size_t n = dense.size();
  lane.arclength_.resize(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    lane.arclength_[i] = lane.arclength_[i - 1] + (dense[i] - dense[i - 1]).norm();
  }

  std::vector<Vec2> seg_normals(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec2 d = dense[i + 1] - dense[i];
    seg_normals[i] = left_normal(std::atan2(d.y(), d.x()));
  }
  lane.vertex_normals_.resize(n);
  lane.vertex_normals_[0] = seg_normals.front();
  lane.vertex_normals_[n - 1] = seg_normals.back();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    Vec2 m = seg_normals[i - 1] + seg_normals[i];
    lane.vertex_normals_[i] = m.norm() < 1e-9 ? seg_normals[i] : Vec2(m.normalized());
  }

  lane.points_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& nrm = lane.vertex_normals_[i];
    lane.points_[i] = Pose2{dense[i].x(), dense[i].y(), std::atan2(-nrm.x(), nrm.y())};
  }
  for (std::size_t first = 0; first + 1 < n; first += kBlock) {
    const std::size_t last = std::min(first + kBlock, n - 1);
    Vec2 c = Vec2::Zero();
    for (std::size_t i = first; i <= last; ++i) c += dense[i];
    c /= static_cast<double>(last - first + 1);
    double r = 0.0;
    for (std::size_t i = first; i <= last; ++i) r = std::max(r, (dense[i] - c).norm());
    lane.block_center_.push_back(c);
    lane.block_radius_.push_back(r);
  }
  return lane;
}

LaneCenterline LaneCenterline::straight(Vec2 start, double heading, double length,
                                        double speed_limit) {
  const Vec2 dir(std::cos(heading), std::sin(heading));
  return from_points({start, start + dir * length}, speed_limit);
}

std::size_t LaneCenterline::segment_index(double s) const {
  const auto it = std::upper_bound(arclength_.begin(), arclength_.end(), s);
  std::size_t idx = it == arclength_.begin() ? 0 : static_cast<std::size_t>(it - arclength_.begin()) - 1;
  return std::min(idx, arclength_.size() - 2);
}

Vec2 LaneCenterline::point_at(double s) const {
  const std::size_t i = segment_index(s);
  const double len = arclength_[i + 1] - arclength_[i];
  const double u = std::clamp((s - arclength_[i]) / len, 0.0, 1.0);
  return points_[i].position() + (points_[i + 1].position() - points_[i].position()) * u;
}

Vec2 LaneCenterline::normal_at(double s) const {
  const std::size_t i = segment_index(s);
  const double len = arclength_[i + 1] - arclength_[i];
  const double u = std::clamp((s - arclength_[i]) / len, 0.0, 1.0);
  const Vec2 m = vertex_normals_[i] + (vertex_normals_[i + 1] - vertex_normals_[i]) * u;
  return m.normalized();
}

double LaneCenterline::heading_at(double s) const {
  const Vec2 n = normal_at(s);
  return std::atan2(-n.x(), n.y());
}

double LaneCenterline::curvature_at(double s) const {
  const std::size_t i = segment_index(s);
  const double len = arclength_[i + 1] - arclength_[i];
  const double u = std::clamp((s - arclength_[i]) / len, 0.0, 1.0);
  const Vec2 dm = vertex_normals_[i + 1] - vertex_normals_[i];
  const Vec2 m = vertex_normals_[i] + dm * u;
  return cross(m, dm) / m.squaredNorm() / len;
}

Vec2 LaneCenterline::to_cartesian(double s, double d) const {
  return point_at(s) + normal_at(s) * d;
}

std::optional<LaneCenterline::Projection> LaneCenterline::project(const Vec2& p,
                                                                  double max_offset) const {
  constexpr double kTol = 1e-9;
  double best_abs = std::numeric_limits<double>::infinity();
  std::optional<Projection> best;

  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    if (i % kBlock == 0) {
      // |d| is at least the distance from p to the block's segments.
      const std::size_t blk = i / kBlock;
      if ((p - block_center_[blk]).norm() - block_radius_[blk] > std::min(best_abs, max_offset)) {
        i += kBlock - 1;
        continue;
      }
    }
    const Vec2 a = points_[i].position();
    const Vec2 b = points_[i + 1].position();
    const double len = arclength_[i + 1] - arclength_[i];
    const double lim = std::min(best_abs, max_offset) + len;
    if (std::min((p - a).squaredNorm(), (p - b).squaredNorm()) > lim * lim) continue;

    const Vec2 q = p - a;
    const Vec2 dvec = b - a;
    const Vec2& n0 = vertex_normals_[i];
    const Vec2 mvec = vertex_normals_[i + 1] - n0;
    const double c0 = cross(q, n0);
    const double c1 = cross(q, mvec) - cross(dvec, n0);
    const double c2 = -cross(dvec, mvec);

    double roots[2];
    int count = 0;
    if (std::abs(c2) <= 1e-14 * (std::abs(c1) + std::abs(c0)) || c2 == 0.0) {
      if (c1 != 0.0) roots[count++] = -c0 / c1;
    } else {
      const double disc = c1 * c1 - 4.0 * c2 * c0;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (c1 + (c1 >= 0.0 ? sq : -sq));
        if (qq != 0.0) {
          roots[count++] = qq / c2;
          roots[count++] = c0 / qq;
        } else {
          roots[count++] = 0.0;
        }
      }
    }

    for (int r = 0; r < count; ++r) {
      double u = roots[r];
      if (u < -kTol || u > 1.0 + kTol) continue;
      u = std::clamp(u, 0.0, 1.0);
      const Vec2 foot = a + dvec * u;
      const Vec2 n = (n0 + mvec * u).normalized();
      const double d = (p - foot).dot(n);
      if (std::abs(d) > max_offset || std::abs(d) >= best_abs) continue;
      best_abs = std::abs(d);
      best = Projection{arclength_[i] + u * len, d, std::atan2(-n.x(), n.y())};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Trajectories

DerivedKinematics derive_kinematics(std::span<const Vec2> wp, double dt,
                                    double fallback_heading) {
  DerivedKinematics k;
  const std::size_t n = wp.size();
  k.speed.assign(n, 0.0);
  k.accel.assign(n, 0.0);
  k.jerk.assign(n, 0.0);
  k.heading.assign(n, fallback_heading);
  k.curvature.assign(n, 0.0);
  if (n < 2) return k;

  auto span_of = [n](std::size_t i) -> std::pair<std::size_t, std::size_t> {
    if (i == 0) return {0, 1};
    if (i + 1 == n) return {n - 2, n - 1};
    return {i - 1, i + 1};
  };
  auto diff = [&](const std::vector<double>& v, std::size_t i) {
    const auto [lo, hi] = span_of(i);
    return (v[hi] - v[lo]) / (dt * static_cast<double>(hi - lo));
  };

  bool moved = false;
  double held = fallback_heading;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = span_of(i);
    const Vec2 disp = wp[hi] - wp[lo];
    const double dist = disp.norm();
    k.speed[i] = dist / (dt * static_cast<double>(hi - lo));
    if (dist > 1e-9) {
      held = std::atan2(disp.y(), disp.x());
      moved = true;
    }
    k.heading[i] = moved ? held : fallback_heading;
  }
  for (std::size_t i = 0; i < n; ++i) k.accel[i] = diff(k.speed, i);
  for (std::size_t i = 0; i < n; ++i) k.jerk[i] = diff(k.accel, i);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = span_of(i);
    const double ds = (wp[hi] - wp[lo]).norm();
    k.curvature[i] = ds < kCurvatureGuard ? 0.0 : normalize_angle(k.heading[hi] - k.heading[lo]) / ds;
  }
  return k;
}

void rederive(Trajectory& traj, double fallback_heading) {
  DerivedKinematics k = derive_kinematics(traj.waypoints, traj.dt, fallback_heading);
  traj.speed = std::move(k.speed);
  traj.accel = std::move(k.accel);
  traj.jerk = std::move(k.jerk);
  traj.heading = std::move(k.heading);
  traj.curvature = std::move(k.curvature);
}

Trajectory make_trajectory(double t0, double dt, std::vector<Vec2> waypoints,
                           double fallback_heading) {
  if (dt <= 0.0) throw Error(ErrorCode::kInvalidArgument, "trajectory dt must be positive");
  Trajectory traj;
  traj.t0 = t0;
  traj.dt = dt;
  traj.waypoints = std::move(waypoints);
  rederive(traj, fallback_heading);
  return traj;
}

Trajectory resample(const Trajectory& traj, double t0, double dt, std::size_t count) {
  constexpr double kSlack = 1e-9;
  if (traj.waypoints.empty() || count == 0) {
    throw Error(ErrorCode::kAlignment, "cannot resample an empty trajectory");
  }
  const double t_end = t0 + dt * static_cast<double>(count - 1);
  if (t0 < traj.t0 - kSlack || t_end > traj.end_time() + kSlack) {
    throw Error(ErrorCode::kAlignment, "trajectory does not cover the requested horizon");
  }
  std::vector<Vec2> out(count);
  const std::size_t last = traj.waypoints.size() - 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = t0 + dt * static_cast<double>(i);
    const double x = std::clamp((t - traj.t0) / traj.dt, 0.0, static_cast<double>(last));
    const auto lo = std::min(static_cast<std::size_t>(x), last == 0 ? 0 : last - 1);
    const std::size_t hi = std::min(lo + 1, last);
    const double u = x - static_cast<double>(lo);
    out[i] = traj.waypoints[lo] + (traj.waypoints[hi] - traj.waypoints[lo]) * u;
  }
  const double fallback = traj.heading.empty() ? 0.0 : traj.heading.front();
  return make_trajectory(t0, dt, std::move(out), fallback);
}

// ---------------------------------------------------------------------------
// Scenes and Frenet conversions

const LaneCenterline& Scene::route_lane() const {
  return lanes->at(static_cast<std::size_t>(route_lane_index));
}

void validate_scene(const Scene& scene) {
  if (!scene.lanes || scene.lanes->empty()) {
    throw Error(ErrorCode::kInvalidArgument, "scene has no lanes");
  }
  if (scene.route_lane_index < 0 ||
      static_cast<std::size_t>(scene.route_lane_index) >= scene.lanes->size()) {
    throw Error(ErrorCode::kInvalidArgument, "route lane index out of range");
  }
  std::set<int> ids;
  for (const ActorState& a : scene.actors) {
    if (!ids.insert(a.id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate actor id " + std::to_string(a.id));
    }
    if (a.length <= 0.0 || a.width <= 0.0 || a.speed < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "actor " + std::to_string(a.id) + " has invalid size or speed");
    }
  }
  if (scene.history.size() != scene.actors.size()) {
    throw Error(ErrorCode::kInvalidArgument, "history count does not match actor count");
  }
  for (const auto& h : scene.history) {
    if (h.size() != scene.history.front().size()) {
      throw Error(ErrorCode::kInvalidArgument, "history lengths differ across actors");
    }
  }
}

FrenetState project_to_frenet(const ActorState& actor, double accel,
                              const LaneCenterline& lane) {
  const auto proj = lane.project(actor.pose.position(), 50.0);
  if (!proj) {
    throw Error(ErrorCode::kProjectionOutOfRange,
                "pose (" + std::to_string(actor.pose.x) + ", " + std::to_string(actor.pose.y) +
                    ") is beyond the lane extent");
  }
  const double rel = normalize_angle(actor.pose.heading - proj->heading);
  const double scale = 1.0 - lane.curvature_at(proj->s) * proj->d;
  FrenetState fs;
  fs.s = proj->s;
  fs.d = proj->d;
  fs.s_dot = actor.speed * std::cos(rel) / scale;
  fs.d_dot = actor.speed * std::sin(rel);
  fs.s_ddot = accel * std::cos(rel) / scale;
  fs.d_ddot = accel * std::sin(rel);
  return fs;
}

Trajectory from_frenet(std::span<const FrenetState> states, const LaneCenterline& lane,
                       double t0, double dt) {
  std::vector<Vec2> wp;
  wp.reserve(states.size());
  Trajectory traj;
  traj.station.reserve(states.size());
  traj.lateral.reserve(states.size());
  for (const FrenetState& fs : states) {
    wp.push_back(lane.to_cartesian(fs.s, fs.d));
    traj.station.push_back(fs.s);
    traj.lateral.push_back(fs.d);
  }
  double fallback = 0.0;
  if (!states.empty()) {
    const FrenetState& f = states.front();
    const double along = f.s_dot * (1.0 - lane.curvature_at(f.s) * f.d);
    fallback = lane.heading_at(f.s);
    if (std::hypot(along, f.d_dot) > 1e-9) fallback = normalize_angle(fallback + std::atan2(f.d_dot, along));
  }
  traj.t0 = t0;
  traj.dt = dt;
  traj.waypoints = std::move(wp);
  rederive(traj, fallback);
  return traj;
}

// ---------------------------------------------------------------------------
// Oriented boxes

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 ax(std::cos(heading), std::sin(heading));
  const Vec2 ay(-ax.y(), ax.x());
  const Vec2 hx = ax * (0.5 * length);
  const Vec2 hy = ay * (0.5 * width);
  return {center + hx + hy, center - hx + hy, center - hx - hy, center + hx - hy};
}

OrientedBox box_of(const ActorState& actor) {
  return OrientedBox{actor.pose.position(), actor.pose.heading, actor.length, actor.width};
}

BoxFrame BoxFrame::of(const OrientedBox& box) {
  BoxFrame f;
  f.center = box.center;
  f.u = Vec2(std::cos(box.heading), std::sin(box.heading));
  f.v = Vec2(-f.u.y(), f.u.x());
  f.half_length = 0.5 * box.length;
  f.half_width = 0.5 * box.width;
  const Vec2 hx = f.u * f.half_length;
  const Vec2 hy = f.v * f.half_width;
  f.corners = {box.center + hx + hy, box.center - hx + hy, box.center - hx - hy, box.center + hx - hy};
  return f;
}

namespace {

double radius_on(const BoxFrame& box, const Vec2& axis) {
  return box.half_length * std::abs(box.u.dot(axis)) + box.half_width * std::abs(box.v.dot(axis));
}

// Squared distance from p to the (filled) box.
double point_box_distance2(const Vec2& p, const BoxFrame& box) {
  const Vec2 q = p - box.center;
  const double ex = std::max(0.0, std::abs(q.dot(box.u)) - box.half_length);
  const double ey = std::max(0.0, std::abs(q.dot(box.v)) - box.half_width);
  return ex * ex + ey * ey;
}

}  // namespace

double box_separation(const BoxFrame& a, const BoxFrame& b) {
  const Vec2 delta = b.center - a.center;
  double gap = -std::numeric_limits<double>::infinity();
  for (const Vec2* axis : {&a.u, &a.v, &b.u, &b.v}) {
    gap = std::max(gap, std::abs(delta.dot(*axis)) - radius_on(a, *axis) - radius_on(b, *axis));
  }
  return gap;
}

double box_distance(const BoxFrame& a, const BoxFrame& b) {
  if (box_separation(a, b) <= 0.0) return 0.0;
  // Disjoint convex polygons attain their distance at a vertex of one of them.
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    best = std::min(best, point_box_distance2(a.corners[i], b));
    best = std::min(best, point_box_distance2(b.corners[i], a));
  }
  return std::sqrt(best);
}

bool obb_overlap(const OrientedBox& a, const OrientedBox& b) {
  return box_separation(BoxFrame::of(a), BoxFrame::of(b)) <= 0.0;
}

double obb_distance(const OrientedBox& a, const OrientedBox& b) {
  return box_distance(BoxFrame::of(a), BoxFrame::of(b));
}

Vec2 local_to_world(const Pose2& frame, const Vec2& local) {
  const double c = std::cos(frame.heading);
  const double s = std::sin(frame.heading);
  return {frame.x + c * local.x() - s * local.y(), frame.y + s * local.x() + c * local.y()};
}

Vec2 world_to_local(const Pose2& frame, const Vec2& world) {
  const double c = std::cos(frame.heading);
  const double s = std::sin(frame.heading);
  const Vec2 d(world.x() - frame.x, world.y() - frame.y);
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

}  // namespace lookout
