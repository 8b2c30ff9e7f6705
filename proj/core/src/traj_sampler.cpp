#include "lookout/traj_sampler.hpp"

#include "lookout/error.hpp"

#include <algorithm>
#include <cmath>

namespace lookout {

double PolynomialProfile::value(double t) const {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * t + *it;
  return acc;
}

double PolynomialProfile::first(double t) const {
  double acc = 0.0;
  for (std::size_t i = coefficients.size(); i-- > 1;) acc = acc * t + static_cast<double>(i) * coefficients[i];
  return acc;
}

double PolynomialProfile::second(double t) const {
  double acc = 0.0;
  for (std::size_t i = coefficients.size(); i-- > 2;) {
    acc = acc * t + static_cast<double>(i * (i - 1)) * coefficients[i];
  }
  return acc;
}

double PolynomialProfile::third(double t) const {
  double acc = 0.0;
  for (std::size_t i = coefficients.size(); i-- > 3;) {
    acc = acc * t + static_cast<double>(i * (i - 1) * (i - 2)) * coefficients[i];
  }
  return acc;
}

// Both solvers work in normalized time u = t / T, where the boundary system
// has constant coefficients, then rescale k_i = c_i * T^i.
PolynomialProfile solve_quintic(const Boundary3& start, const Boundary3& end, double duration) {
  if (!(duration > 0.0)) throw Error(ErrorCode::kInvalidArgument, "quintic duration must be positive");
  const double T = duration;
  const double c0 = start.p;
  const double c1 = start.v;
  const double c2 = 0.5 * start.a;
  const double r0 = end.p - (c0 + c1 * T + c2 * T * T);
  const double r1 = (end.v - (c1 + 2.0 * c2 * T)) * T;
  const double r2 = (end.a - 2.0 * c2) * T * T;
  const double k3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2;
  const double k4 = -15.0 * r0 + 7.0 * r1 - r2;
  const double k5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2;
  const double T3 = T * T * T;
  return PolynomialProfile{{c0, c1, c2, k3 / T3, k4 / (T3 * T), k5 / (T3 * T * T)}, T};
}

PolynomialProfile solve_quartic(const Boundary3& start, const Boundary2& end, double duration) {
  if (!(duration > 0.0)) throw Error(ErrorCode::kInvalidArgument, "quartic duration must be positive");
  const double T = duration;
  const double c0 = start.p;
  const double c1 = start.v;
  const double c2 = 0.5 * start.a;
  const double r1 = (end.v - (c1 + 2.0 * c2 * T)) * T;
  const double r2 = (end.a - 2.0 * c2) * T * T;
  const double k3 = r1 - r2 / 3.0;
  const double k4 = -0.5 * r1 + 0.25 * r2;
  const double T3 = T * T * T;
  return PolynomialProfile{{c0, c1, c2, k3 / T3, k4 / (T3 * T)}, T};
}

Boundary3 LateralPath::eval(double t) const {
  const PolynomialProfile& p = t <= t_mid ? first : second;
  const double local = std::clamp(t <= t_mid ? t : t - t_mid, 0.0, p.duration);
  return {p.value(local), p.first(local), p.second(local)};
}

// ---------------------------------------------------------------------------

SamplerConfig SamplerConfig::desk() {
  SamplerConfig c;
  c.preset = "desk";
  c.lateral_mid_offsets = {-1.2, -0.8, -0.4, 0.0, 0.4, 0.8, 1.2};
  c.lateral_end_offsets = {0.0};
  c.action_velocity_count = 6;
  c.contingent_mid_velocity_count = 5;
  c.contingent_end_velocity_count = 6;
  return c;
}

SamplerConfig SamplerConfig::paper() {
  SamplerConfig c;
  c.preset = "paper";
  c.lateral_mid_offsets = {-1.5, -0.75, 0.0, 0.75, 1.5};
  c.lateral_end_offsets = {-0.5, 0.0, 0.5};
  c.action_velocity_count = 16;
  c.contingent_mid_velocity_count = 13;
  c.contingent_end_velocity_count = 20;
  return c;
}

SamplerConfig SamplerConfig::from_preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw Error(ErrorCode::kMalformedConfig, "unknown sampler preset '" + name + "'");
}

namespace {

std::size_t steps_for(double span, double dt) {
  const double n = span / dt;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-6) {
    throw Error(ErrorCode::kMalformedConfig, "sampler horizons must be positive multiples of dt");
  }
  return static_cast<std::size_t>(r);
}

// Re-derives a continuation's kinematics with a few samples of the preceding
// segment prepended, so differences at the junction see both sides.
void rederive_continuation(Trajectory& tail, const Trajectory& head) {
  const std::size_t context = std::min<std::size_t>(3, head.size() - 1);
  std::vector<Vec2> wp(head.waypoints.end() - 1 - static_cast<std::ptrdiff_t>(context),
                       head.waypoints.end() - 1);
  wp.insert(wp.end(), tail.waypoints.begin(), tail.waypoints.end());
  DerivedKinematics k = derive_kinematics(wp, tail.dt, head.heading.back());
  auto slice = [context](std::vector<double>& v) {
    v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(context));
  };
  slice(k.speed);
  slice(k.accel);
  slice(k.jerk);
  slice(k.heading);
  slice(k.curvature);
  tail.speed = std::move(k.speed);
  tail.accel = std::move(k.accel);
  tail.jerk = std::move(k.jerk);
  tail.heading = std::move(k.heading);
  tail.curvature = std::move(k.curvature);
}

}  // namespace

std::size_t SamplerConfig::action_steps() const { return steps_for(action_horizon, dt); }

std::size_t SamplerConfig::contingent_steps() const {
  return steps_for(horizon - action_horizon, dt);
}

void SamplerConfig::validate() const {
  if (!(dt > 0.0) || !(action_horizon > 0.0) || !(horizon > action_horizon)) {
    throw Error(ErrorCode::kMalformedConfig, "sampler requires 0 < action_horizon < horizon and dt > 0");
  }
  action_steps();
  if (contingent_steps() % 2 != 0) {
    throw Error(ErrorCode::kMalformedConfig, "contingent horizon must split into two equal segments");
  }
  if (lateral_mid_offsets.empty() || lateral_end_offsets.empty()) {
    throw Error(ErrorCode::kMalformedConfig, "lateral offset sets must be nonempty");
  }
  if ((action_velocities.empty() && action_velocity_count < 1) ||
      (contingent_mid_velocities.empty() && contingent_mid_velocity_count < 1) ||
      (contingent_end_velocities.empty() && contingent_end_velocity_count < 1)) {
    throw Error(ErrorCode::kMalformedConfig, "velocity sample counts must be positive");
  }
}

std::vector<LateralPath> generate_lateral_paths(const FrenetState& sdv,
                                                const LaneCenterline& /*lane*/,
                                                const SamplerConfig& config) {
  const double t_mid = 0.5 * config.horizon;
  std::vector<LateralPath> paths;
  paths.reserve(config.lateral_mid_offsets.size() * config.lateral_end_offsets.size());
  for (double mid : config.lateral_mid_offsets) {
    for (double end : config.lateral_end_offsets) {
      LateralPath path;
      path.t_mid = t_mid;
      path.mid_offset = mid;
      path.end_offset = end;
      path.first = solve_quintic({sdv.d, sdv.d_dot, sdv.d_ddot}, {mid, 0.0, 0.0}, t_mid);
      path.second = solve_quintic({mid, 0.0, 0.0}, {end, 0.0, 0.0}, config.horizon - t_mid);
      paths.push_back(std::move(path));
    }
  }
  return paths;
}

std::vector<LongitudinalSample> realize_longitudinal(const PolynomialProfile& profile,
                                                     std::size_t steps, double dt) {
  std::vector<LongitudinalSample> out(steps + 1);
  bool stopped = false;
  LongitudinalSample hold;
  double prev_t = 0.0;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = dt * static_cast<double>(k);
    if (!stopped) {
      const double v = profile.first(t);
      if (v < 0.0) {
        // Bisect for the first zero crossing of the velocity in (prev_t, t].
        double lo = k == 0 ? 0.0 : prev_t;
        double hi = t;
        if (profile.first(lo) <= 0.0) hi = lo;
        for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
          const double mid = 0.5 * (lo + hi);
          (profile.first(mid) >= 0.0 ? lo : hi) = mid;
        }
        hold = {profile.value(hi), 0.0, 0.0};
        stopped = true;
      } else {
        out[k] = {profile.value(t), v, profile.second(t)};
      }
    }
    if (stopped) out[k] = hold;
    prev_t = t;
  }
  return out;
}

std::vector<double> velocity_grid(double hi, int count) {
  hi = std::max(hi, 0.0);
  if (count <= 1) return {hi};
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = hi * i / (count - 1);
  return grid;
}

std::vector<ContingentProfile> contingent_profiles(const LongitudinalSample& start,
                                                   double speed_limit,
                                                   const SamplerConfig& config) {
  const std::size_t steps = config.contingent_steps();
  const std::size_t half_steps = steps / 2;
  const double half = config.dt * static_cast<double>(half_steps);
  const double v_cap = speed_limit * config.speed_margin;

  const std::vector<double> mids =
      config.contingent_mid_velocities.empty()
          ? velocity_grid(std::min(v_cap, start.v + config.max_accel * half),
                          config.contingent_mid_velocity_count)
          : config.contingent_mid_velocities;

  std::vector<ContingentProfile> out;
  for (double v_mid : mids) {
    const auto first = realize_longitudinal(solve_quartic({start.s, start.v, start.a}, {v_mid, 0.0}, half),
                                            half_steps, config.dt);
    const LongitudinalSample junction = first.back();
    const std::vector<double> ends =
        config.contingent_end_velocities.empty()
            ? velocity_grid(std::min(v_cap, junction.v + config.max_accel * half),
                            config.contingent_end_velocity_count)
            : config.contingent_end_velocities;
    for (double v_end : ends) {
      const auto second = realize_longitudinal(
          solve_quartic({junction.s, junction.v, junction.a}, {v_end, 0.0}, half), half_steps, config.dt);
      ContingentProfile c;
      c.mid_velocity = v_mid;
      c.end_velocity = v_end;
      c.samples.reserve(steps + 1);
      c.samples.insert(c.samples.end(), first.begin(), first.end());
      c.samples.insert(c.samples.end(), second.begin() + 1, second.end());
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<PlanCandidate> generate_candidates(const FrenetState& sdv, const LaneCenterline& lane,
                                               const SamplerConfig& config) {
  config.validate();
  const double dt = config.dt;
  const std::size_t na = config.action_steps();
  const std::size_t nc = config.contingent_steps();
  const double v_cap = lane.speed_limit() * config.speed_margin;
  const double lane_end = lane.length();

  const auto paths = generate_lateral_paths(sdv, lane, config);
  const std::vector<double> action_targets =
      config.action_velocities.empty()
          ? velocity_grid(std::min(v_cap, sdv.s_dot + config.max_accel * config.action_horizon),
                          config.action_velocity_count)
          : config.action_velocities;

  std::vector<PlanCandidate> candidates;
  std::vector<FrenetState> frenet;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    std::vector<Boundary3> lateral(na + nc + 1);
    for (std::size_t k = 0; k < lateral.size(); ++k) lateral[k] = paths[p].eval(dt * static_cast<double>(k));

    for (double v_target : action_targets) {
      const auto lon = realize_longitudinal(
          solve_quartic({sdv.s, std::max(sdv.s_dot, 0.0), sdv.s_ddot}, {v_target, 0.0}, config.action_horizon),
          na, dt);
      if (lon.back().s > lane_end || lon.front().s < 0.0) continue;

      PlanCandidate cand;
      cand.path_id = static_cast<int>(p);
      cand.action_velocity = v_target;
      cand.action_frenet.resize(na + 1);
      for (std::size_t k = 0; k <= na; ++k) {
        cand.action_frenet[k] = {lon[k].s, lon[k].v, lon[k].a, lateral[k].p, lateral[k].v, lateral[k].a};
      }
      cand.action = from_frenet(cand.action_frenet, lane, 0.0, dt);

      for (const ContingentProfile& cp : contingent_profiles(lon.back(), lane.speed_limit(), config)) {
        if (cp.samples.back().s > lane_end) continue;
        frenet.resize(nc + 1);
        for (std::size_t k = 0; k <= nc; ++k) {
          const Boundary3& lat = lateral[na + k];
          frenet[k] = {cp.samples[k].s, cp.samples[k].v, cp.samples[k].a, lat.p, lat.v, lat.a};
        }
        Trajectory tail = from_frenet(frenet, lane, config.action_horizon, dt);
        rederive_continuation(tail, cand.action);
        cand.contingents.push_back(std::move(tail));
        cand.contingent_velocities.emplace_back(cp.mid_velocity, cp.end_velocity);
      }
      if (!cand.contingents.empty()) candidates.push_back(std::move(cand));
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::kEmptyCandidateSet, "no feasible candidates on the route lane");
  }
  return candidates;
}

std::vector<PlanCandidate> generate_candidates(const Scene& scene, const LaneCenterline& lane,
                                               const SamplerConfig& config) {
  FrenetState fs;
  try {
    fs = project_to_frenet(scene.sdv, 0.0, lane);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kProjectionOutOfRange) {
      throw Error(ErrorCode::kEmptyCandidateSet, std::string("SDV not on route lane: ") + e.what());
    }
    throw;
  }
  return generate_candidates(fs, lane, config);
}

Trajectory concatenate(const Trajectory& action, const Trajectory& contingent) {
  std::vector<Vec2> wp = action.waypoints;
  wp.insert(wp.end(), contingent.waypoints.begin() + 1, contingent.waypoints.end());
  Trajectory out = make_trajectory(action.t0, action.dt, std::move(wp),
                                   action.heading.empty() ? 0.0 : action.heading.front());
  if (!action.station.empty() && !contingent.station.empty()) {
    out.station = action.station;
    out.station.insert(out.station.end(), contingent.station.begin() + 1, contingent.station.end());
    out.lateral = action.lateral;
    out.lateral.insert(out.lateral.end(), contingent.lateral.begin() + 1, contingent.lateral.end());
  }
  return out;
}

}  // namespace lookout
