#include "lookout/error.hpp"
#include "lookout/geom.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lookout;

namespace {

LaneCenterline arc_lane(double radius, double sweep) {
  std::vector<Vec2> pts;
  for (int i = 0; i <= 40; ++i) {
    const double a = -kPi / 2 + sweep * i / 40.0;
    pts.emplace_back(radius * std::cos(a), radius + radius * std::sin(a));
  }
  return LaneCenterline::from_points(pts, 15.0);
}

// Brute-force rectangle geometry: corner containment, edge crossings and
// segment distances.
double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool inside(const OrientedBox& box, const Vec2& p) {
  const Vec2 d = p - box.center;
  const double c = std::cos(box.heading), s = std::sin(box.heading);
  const double along = d.x() * c + d.y() * s;
  const double across = -d.x() * s + d.y() * c;
  return std::abs(along) <= box.length / 2 + 1e-12 && std::abs(across) <= box.width / 2 + 1e-12;
}

bool segments_cross(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross(p2 - p1, q1 - p1), d2 = cross(p2 - p1, q2 - p1);
  const double d3 = cross(q2 - q1, p1 - q1), d4 = cross(q2 - q1, p2 - q1);
  return d1 * d2 <= 0 && d3 * d4 <= 0;
}

double point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - p).norm();
}

bool brute_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners(), cb = b.corners();
  for (const Vec2& p : ca) if (inside(b, p)) return true;
  for (const Vec2& p : cb) if (inside(a, p)) return true;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (segments_cross(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4])) return true;
  return false;
}

double brute_distance(const OrientedBox& a, const OrientedBox& b) {
  if (brute_overlap(a, b)) return 0.0;
  const auto ca = a.corners(), cb = b.corners();
  double best = INFINITY;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, point_segment(ca[i], cb[j], cb[(j + 1) % 4]));
      best = std::min(best, point_segment(cb[j], ca[i], ca[(i + 1) % 4]));
    }
  }
  return best;
}

}  // namespace

TEST(Geom, NormalizeAngleRange) {
  EXPECT_DOUBLE_EQ(normalize_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(normalize_angle(-kPi), kPi);
  EXPECT_NEAR(normalize_angle(3 * kPi + 0.25), -kPi + 0.25, 1e-12);
  EXPECT_NEAR(normalize_angle(-0.5), -0.5, 1e-15);
}

TEST(Geom, FrenetRoundTripOnArc) {
  const LaneCenterline lane = arc_lane(60.0, kPi / 2);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> s_d(1.0, lane.length() - 1.0), d_d(-3.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    const double s = s_d(rng), d = d_d(rng);
    const auto p = lane.project(lane.to_cartesian(s, d));
    ASSERT_TRUE(p.has_value());
    EXPECT_NEAR(p->s, s, 1e-9);
    EXPECT_NEAR(p->d, d, 1e-9);
  }
}

TEST(Geom, ArcLaneCurvatureAndLength) {
  const LaneCenterline lane = arc_lane(60.0, kPi / 2);
  // Chord polyline of a circle: 40 chords of the quarter arc.
  const double chord = 2 * 60.0 * std::sin(kPi / 2 / 80.0);
  EXPECT_NEAR(lane.length(), 40 * chord, 1e-9);
  EXPECT_NEAR(lane.curvature_at(lane.length() / 2), 1.0 / 60.0, 2e-3 / 60.0);
  EXPECT_GT(lane.normal_at(10.0).y(), 0.0);  // left of travel heading +x at the start
}

TEST(Geom, ProjectBeyondEndsIsEmpty) {
  const LaneCenterline lane = LaneCenterline::straight({0, 0}, 0.0, 50.0, 10.0);
  EXPECT_FALSE(lane.project({-5.0, 0.0}).has_value());
  EXPECT_FALSE(lane.project({55.0, 1.0}).has_value());
  EXPECT_FALSE(lane.project({10.0, 80.0}).has_value());
  const auto p = lane.project({12.5, -1.5});
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(p->s, 12.5, 1e-12);
  EXPECT_NEAR(p->d, -1.5, 1e-12);
}

TEST(Geom, LaneNeedsTwoPoints) {
  try {
    LaneCenterline::from_points({{1, 1}, {1, 1}}, 10.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(Geom, ProjectToFrenetRejectsOffLane) {
  const LaneCenterline lane = LaneCenterline::straight({0, 0}, 0.0, 50.0, 10.0);
  ActorState a;
  a.pose = {80.0, 0.0, 0.0};
  try {
    project_to_frenet(a, 0.0, lane);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kProjectionOutOfRange);
  }
  a.pose = {10.0, 2.0, 0.3};
  a.speed = 5.0;
  const FrenetState f = project_to_frenet(a, 1.0, lane);
  EXPECT_NEAR(f.s, 10.0, 1e-12);
  EXPECT_NEAR(f.d, 2.0, 1e-12);
  EXPECT_NEAR(f.s_dot, 5.0 * std::cos(0.3), 1e-12);
  EXPECT_NEAR(f.d_dot, 5.0 * std::sin(0.3), 1e-12);
}

TEST(Geom, FromFrenetFollowsLane) {
  const LaneCenterline lane = arc_lane(40.0, kPi / 3);
  std::vector<FrenetState> states;
  for (int i = 0; i <= 20; ++i) states.push_back({2.0 + 0.8 * i, 8.0, 0.0, 0.5, 0.0, 0.0});
  const Trajectory t = from_frenet(states, lane, 1.0, 0.1);
  ASSERT_EQ(t.size(), states.size());
  EXPECT_DOUBLE_EQ(t.t0, 1.0);
  for (std::size_t i = 0; i < states.size(); ++i) {
    EXPECT_NEAR((t.waypoints[i] - lane.to_cartesian(states[i].s, states[i].d)).norm(), 0.0, 1e-12);
  }
}

TEST(Geom, KinematicsOfConstantAcceleration) {
  const double dt = 0.1, a = 2.0;
  std::vector<Vec2> wp;
  for (int i = 0; i < 30; ++i) {
    const double t = dt * i;
    wp.emplace_back(3.0 + 0.5 * a * t * t + 4.0 * t, 0.0);
  }
  const DerivedKinematics k = derive_kinematics(wp, dt);
  for (int i = 1; i + 1 < 30; ++i) EXPECT_NEAR(k.speed[i], 4.0 + a * dt * i, 1e-9);
  for (int i = 2; i + 2 < 30; ++i) EXPECT_NEAR(k.accel[i], a, 1e-9);
  for (int i = 4; i + 4 < 30; ++i) EXPECT_NEAR(k.jerk[i], 0.0, 1e-7);
  for (int i = 0; i < 30; ++i) EXPECT_NEAR(k.curvature[i], 0.0, 1e-12);
}

TEST(Geom, KinematicsOnCircle) {
  const double r = 25.0, w = 0.4, dt = 0.1;
  std::vector<Vec2> wp;
  for (int i = 0; i < 40; ++i) wp.emplace_back(r * std::cos(w * dt * i), r * std::sin(w * dt * i));
  const DerivedKinematics k = derive_kinematics(wp, dt);
  for (int i = 2; i + 2 < 40; ++i) {
    EXPECT_NEAR(k.speed[i], r * std::sin(w * dt) / dt, 1e-9);
    EXPECT_NEAR(k.heading[i], normalize_angle(w * dt * i + kPi / 2), 1e-9);
    EXPECT_NEAR(k.curvature[i], 2 * w * dt / (2 * r * std::sin(w * dt)), 1e-9);
  }
}

TEST(Geom, StationaryHoldsHeading) {
  std::vector<Vec2> wp{{0, 0}, {0, 0}, {1, 1}, {1, 1}, {1, 1}};
  const DerivedKinematics k = derive_kinematics(wp, 0.1, 0.7);
  EXPECT_DOUBLE_EQ(k.heading[0], 0.7);
  EXPECT_NEAR(k.heading[3], kPi / 4, 1e-12);
  EXPECT_NEAR(k.heading[4], kPi / 4, 1e-12);
}

TEST(Geom, ResampleAlignment) {
  const Trajectory t = make_trajectory(0.0, 0.5, {{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  const Trajectory r = resample(t, 0.2, 0.1, 5);
  EXPECT_NEAR(r.waypoints[0].x(), 0.4, 1e-12);
  EXPECT_NEAR(r.waypoints[4].x(), 1.2, 1e-12);
  try {
    resample(t, 1.0, 0.1, 30);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlignment);
  }
}

TEST(Geom, OrientedBoxesMatchBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-6.0, 6.0), ang(-kPi, kPi), size(0.4, 5.0);
  int overlaps = 0;
  for (int i = 0; i < 3000; ++i) {
    OrientedBox a{{pos(rng), pos(rng)}, ang(rng), size(rng), size(rng)};
    OrientedBox b{{pos(rng), pos(rng)}, ang(rng), size(rng), size(rng)};
    const bool expect = brute_overlap(a, b);
    overlaps += expect;
    ASSERT_EQ(obb_overlap(a, b), expect) << i;
    const double d = brute_distance(a, b);
    ASSERT_NEAR(obb_distance(a, b), d, 1e-9) << i;
    const BoxFrame fa = BoxFrame::of(a), fb = BoxFrame::of(b);
    ASSERT_NEAR(box_distance(fa, fb), d, 1e-9) << i;
    const double sep = box_separation(fa, fb);
    ASSERT_EQ(sep <= 0.0, expect) << i;
    if (!expect) ASSERT_LE(sep, d + 1e-12);
  }
  EXPECT_GT(overlaps, 300);
  EXPECT_LT(overlaps, 2700);
}

TEST(Geom, TouchingBoxesOverlap) {
  OrientedBox a{{0, 0}, 0.0, 2.0, 2.0};
  OrientedBox b{{2, 0}, 0.0, 2.0, 2.0};
  EXPECT_TRUE(obb_overlap(a, b));
  b.center = {2.5, 0};
  EXPECT_FALSE(obb_overlap(a, b));
  EXPECT_NEAR(obb_distance(a, b), 0.5, 1e-12);
}

TEST(Geom, FrameTransformsInvert) {
  const Pose2 f{3.0, -2.0, 0.9};
  const Vec2 p{1.5, 4.0};
  EXPECT_NEAR((local_to_world(f, world_to_local(f, p)) - p).norm(), 0.0, 1e-12);
}
