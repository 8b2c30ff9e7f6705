#pragma once

// Closed-loop simulation: scripted and reactive (IDM) background actors, an
// MPC loop that replans every step, and the scripted scenario families used
// to generate training data.

#include "lookout/cost.hpp"
#include "lookout/diverse_sampler.hpp"
#include "lookout/forecast.hpp"
#include "lookout/planner.hpp"
#include "lookout/scorer.hpp"
#include "lookout/traj_sampler.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lookout {

struct IdmParams {
  double delta = 4.0;
  double min_gap = 2.0;       // s0 [m]
  double time_headway = 1.5;  // T_h [s]
  double max_accel = 1.5;
  double comfort_decel = 2.0;
  double emergency_decel = 8.0;
};

struct LeadInfo {
  double gap = 0.0;    // bumper to bumper [m]
  double speed = 0.0;  // along the follower's path, >= 0
};

/// IDM acceleration. Free-road form without a lead; gap <= 0 returns
/// -emergency_decel.
double idm_accel(double v, const std::optional<LeadInfo>& lead, double v0, const IdmParams& params);

/// Piecewise-linear speed over time along a path, starting at station s0.
struct ScriptedMotion {
  int path = 0;
  double s0 = 0.0;
  std::vector<double> times;   // increasing, times.front() == 0
  std::vector<double> speeds;  // same length, >= 0

  double speed_at(double t) const;
  /// s0 plus the exact integral of speed_at over [0, t].
  double station_at(double t) const;
};

enum class BehaviorKind { kScripted, kIdmFollow, kModeSwitch };

const char* behavior_name(BehaviorKind kind);
BehaviorKind behavior_from_name(const std::string& name);

struct ScriptMode {
  std::string name;
  double probability = 0.0;
  ScriptedMotion motion;
};

struct ActorBehavior {
  BehaviorKind kind = BehaviorKind::kScripted;
  ScriptedMotion motion;         // kScripted
  int path = 0;                  // kIdmFollow
  double s0 = 0.0;               // kIdmFollow
  double initial_speed = 0.0;    // kIdmFollow
  double desired_speed = 0.0;    // kIdmFollow, 0 uses the path speed limit
  std::vector<ScriptMode> modes; // kModeSwitch
};

struct ActorSpec {
  int id = 0;
  ActorClass cls = ActorClass::kVehicle;
  double length = 4.8;
  double width = 2.0;
  ActorBehavior behavior;
};

struct ScenarioScript {
  std::string name;
  std::string family;
  std::vector<LaneCenterline> lanes;  // map lanes seen by the forecaster
  int route_lane = 0;
  std::vector<LaneCenterline> paths;  // driven paths of scripted and IDM actors
  double sdv_station = 0.0;           // on the route lane
  double sdv_speed = 0.0;
  double sdv_length = 5.0;
  double sdv_width = 2.0;
  std::vector<ActorSpec> actors;
  double duration = 18.0;
  double sim_dt = 0.1;
  double divergence_threshold = 0.5;
  double snapshot_time = 0.0;  // scene time used for training samples
  std::uint64_t seed = 0;

  /// Throws Error(kMalformedConfig) on bad indices, probabilities or times.
  void validate() const;
};

/// Mode index per actor (-1 for actors without modes), drawn once from the
/// script seed.
std::vector<int> resolve_modes(const ScenarioScript& script);

/// Actor states of a running scenario.
class World {
 public:
  /// `sdv_reactive` drives the SDV with IDM along the route instead of by
  /// an external controller.
  World(const ScenarioScript& script, std::vector<int> modes, bool sdv_reactive);

  double time() const { return time_; }
  int step_index() const { return step_; }
  const ActorState& sdv() const { return sdv_; }
  double sdv_station() const { return sdv_s_; }
  const std::vector<ActorState>& actors() const { return actors_; }
  const std::vector<char>& reactive() const { return reactive_; }
  const std::vector<int>& modes() const { return modes_; }
  const LaneSet& lanes() const { return lanes_; }

  /// Scene with 1 s of actor history.
  Scene scene() const;

  /// Moves every background actor by one step (reacting to the SDV's
  /// current state), then places the SDV at `sdv_next` when given.
  void step(const std::optional<ActorState>& sdv_next, double sdv_next_station);

 private:
  std::optional<LeadInfo> lead_for(std::size_t index, const LaneCenterline& path, double s, double length) const;

  const ScenarioScript* script_;
  LaneSet lanes_;
  std::vector<int> modes_;
  bool sdv_reactive_ = false;
  double time_ = 0.0;
  int step_ = 0;
  ActorState sdv_;
  double sdv_s_ = 0.0;
  std::vector<ActorState> actors_;
  std::vector<int> path_;
  std::vector<double> station_;
  std::vector<char> reactive_;
  std::vector<const ScriptedMotion*> motion_;
  std::vector<double> desired_;
  std::vector<std::vector<Pose2>> history_;  // last kHistorySteps poses per actor
};

/// Supplies the futures the planner should hedge against.
using FutureProvider = std::function<FutureSet(const Scene& scene, int step)>;

enum class ForecastSource { kDiverse, kPrior };

struct ModelBundle {
  const ForecastModel* decoder = nullptr;
  const DiverseSampler* sampler = nullptr;
  const Scorer* scorer = nullptr;  // null gives uniform probabilities
};

/// Futures from the trained models. kPrior draws k prior samples per step
/// from a stream seeded by `seed` and the step.
FutureProvider model_provider(const ModelBundle& models, ForecastSource source, int k, std::uint64_t seed);

/// Every actor keeps its current speed and heading.
FutureProvider constant_velocity_provider(int k = 1);

struct RolloutConfig {
  PlannerKind planner = PlannerKind::kContingency;
  SamplerConfig sampler = SamplerConfig::desk();
  CostWeights weights;
  CostConfig cost;
};

struct StepRecord {
  int step = 0;
  double time = 0.0;  // after the step
  ActorState sdv;
  double sdv_station = 0.0;
  double accel = 0.0;
  double jerk = 0.0;
  double lat_accel = 0.0;
  int action_index = -1;
  double objective = 0.0;
  std::vector<ActorState> actors;
};

struct CollisionEvent {
  int step = 0;
  int actor_id = 0;
};

struct RolloutLog {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string planner;
  std::vector<int> modes;
  double initial_station = 0.0;
  std::vector<StepRecord> steps;
  std::vector<CollisionEvent> collisions;
  double progress = 0.0;
  bool terminated_early = false;
  std::string termination;

  int num_collision_onsets() const;
};

/// Replans every step and executes the first 100 ms of the chosen action.
RolloutLog run_rollout(const ScenarioScript& script, const RolloutConfig& config, const FutureProvider& provider);

/// Re-executes the recorded action indices without forecasting.
RolloutLog replay(const ScenarioScript& script, const RolloutConfig& config, const RolloutLog& log);

/// Everyone, the SDV included, driven by scripts or IDM.
struct TrafficLog {
  std::vector<double> times;
  std::vector<ActorState> sdv;
  std::vector<std::vector<ActorState>> actors;
  std::vector<Scene> scenes;  // filled when requested
  int actor_collisions = 0;   // pairs overlapping, SDV included, counted per step
};

TrafficLog run_traffic(const ScenarioScript& script, const std::vector<int>& modes, bool keep_scenes = false);

// ---------------------------------------------------------------------------
// Scenario families

enum class Family { kLaneFollow, kYieldOrGo, kCutIn, kUnprotectedLeft };

const char* family_name(Family family);
Family family_from_name(const std::string& name);

struct FamilyOptions {
  // Probability of each scripted mode, in the family's mode order; empty
  // uses the family default.
  std::vector<double> mode_probabilities;
};

/// Default mode probabilities: yield_or_go (yield 0.7, go 0.3), cut_in
/// (stay 0.6, cut in 0.4), unprotected_left (straight 0.7, turn 0.3).
std::vector<double> default_mode_probabilities(Family family);

/// One randomized script of the family; the seed also fixes the modes.
ScenarioScript make_scenario(Family family, std::uint64_t seed, const FamilyOptions& options = {});

struct Dataset {
  std::string family;
  std::uint64_t seed = 0;
  std::vector<ForecastSample> samples;
};

/// Scene at script.snapshot_time with the realized future of every actor,
/// all traffic (the SDV included) driven by scripts or IDM.
ForecastSample sample_scenario(const ScenarioScript& script, const std::vector<int>& modes);

/// Scenes with 1 s history and the realized 5 s future of every actor.
Dataset generate_dataset(Family family, int count, std::uint64_t seed, const FamilyOptions& options = {});

}  // namespace lookout
