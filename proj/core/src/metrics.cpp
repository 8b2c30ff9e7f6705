#include "lookout/metrics.hpp"

#include "lookout/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <cmath>
#include <limits>

namespace lookout {

namespace {

void check_shapes(const std::vector<Eigen::MatrixXd>& samples, const Eigen::MatrixXd& like) {
  for (const Eigen::MatrixXd& s : samples) {
    if (s.rows() != like.rows() || s.cols() != like.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "samples must share one shape");
    }
  }
}

double pair_sum(const std::vector<Eigen::MatrixXd>& xs) {
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (i != j) sum += mean_displacement(xs[i], xs[j]);
    }
  }
  return sum;
}

double pair_normalizer(std::size_t s, AsdNormalization norm) {
  return norm == AsdNormalization::kPrinted ? static_cast<double>(s) : static_cast<double>(s * (s - 1));
}

std::vector<Eigen::MatrixXd> select_rows(const std::vector<Eigen::MatrixXd>& xs, const std::vector<int>& rows) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(xs.size());
  for (const Eigen::MatrixXd& x : xs) out.push_back(x(rows, Eigen::indexing::all));
  return out;
}

void accumulate(OpenLoopRow& into, const OpenLoopRow& row) {
  into.min_sade += row.min_sade;
  into.mean_sade += row.mean_sade;
  into.min_sasd += row.min_sasd;
  into.mean_sasd += row.mean_sasd;
  into.mean_plan_asd += row.mean_plan_asd;
  ++into.count;
}

void finish(OpenLoopRow& row) {
  if (row.count == 0) return;
  const double n = row.count;
  row.min_sade /= n;
  row.mean_sade /= n;
  row.min_sasd /= n;
  row.mean_sasd /= n;
  row.mean_plan_asd /= n;
}

}  // namespace

double min_sade(const std::vector<Eigen::MatrixXd>& samples, const Eigen::MatrixXd& truth) {
  if (samples.empty()) throw Error(ErrorCode::kShapeMismatch, "minSADE needs at least one sample");
  check_shapes(samples, truth);
  double best = std::numeric_limits<double>::infinity();
  for (const Eigen::MatrixXd& s : samples) best = std::min(best, mean_displacement(s, truth));
  return best;
}

double mean_sade(const std::vector<Eigen::MatrixXd>& samples, const Eigen::MatrixXd& truth) {
  if (samples.empty()) throw Error(ErrorCode::kShapeMismatch, "meanSADE needs at least one sample");
  check_shapes(samples, truth);
  double sum = 0.0;
  for (const Eigen::MatrixXd& s : samples) sum += mean_displacement(s, truth);
  return sum / static_cast<double>(samples.size());
}

double min_sasd(const std::vector<Eigen::MatrixXd>& samples, AsdNormalization norm) {
  if (samples.size() < 2) return 0.0;
  check_shapes(samples, samples.front());
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (j != i) best = std::min(best, mean_displacement(samples[i], samples[j]));
    }
    sum += best;
  }
  return norm == AsdNormalization::kPrinted ? sum : sum / static_cast<double>(samples.size());
}

double mean_sasd(const std::vector<Eigen::MatrixXd>& samples, AsdNormalization norm) {
  if (samples.size() < 2) return 0.0;
  check_shapes(samples, samples.front());
  return pair_sum(samples) / pair_normalizer(samples.size(), norm);
}

double mean_plan_asd(const std::vector<Eigen::MatrixXd>& plans, AsdNormalization norm) {
  if (plans.size() < 2) return 0.0;
  check_shapes(plans, plans.front());
  return pair_sum(plans) / pair_normalizer(plans.size(), norm);
}

OpenLoopRow scene_metrics(const OpenLoopScene& scene, AsdNormalization norm) {
  if (!scene.plans.empty() && scene.plans.size() != scene.samples.size()) {
    throw Error(ErrorCode::kShapeMismatch, "need one plan per sample");
  }
  OpenLoopRow row;
  row.min_sade = min_sade(scene.samples, scene.truth);
  row.mean_sade = mean_sade(scene.samples, scene.truth);
  row.min_sasd = min_sasd(scene.samples, norm);
  row.mean_sasd = mean_sasd(scene.samples, norm);
  row.mean_plan_asd = mean_plan_asd(scene.plans, norm);
  row.count = 1;
  return row;
}

OpenLoopReport open_loop_metrics(const std::vector<OpenLoopScene>& scenes, AsdNormalization norm) {
  OpenLoopReport report;
  for (const OpenLoopScene& scene : scenes) {
    const OpenLoopRow row = scene_metrics(scene, norm);
    report.scenes.push_back(row);
    accumulate(report.aggregate, row);
    const auto n = static_cast<std::size_t>(scene.truth.rows());
    if (!scene.classes.empty() && scene.classes.size() != n) {
      throw Error(ErrorCode::kShapeMismatch, "need one class per actor");
    }
    std::map<ActorClass, std::vector<int>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      rows[scene.classes.empty() ? ActorClass::kVehicle : scene.classes[i]].push_back(static_cast<int>(i));
    }
    for (const auto& [cls, idx] : rows) {
      OpenLoopScene sub;
      sub.samples = select_rows(scene.samples, idx);
      sub.truth = scene.truth(idx, Eigen::indexing::all);
      OpenLoopRow r = scene_metrics(sub, norm);
      r.mean_plan_asd = row.mean_plan_asd;
      accumulate(report.per_class[cls], r);
    }
  }
  finish(report.aggregate);
  for (auto& [cls, row] : report.per_class) finish(row);
  return report;
}

ClosedLoopReport closed_loop_metrics(const std::vector<RolloutLog>& logs) {
  if (logs.empty()) throw Error(ErrorCode::kInvalidArgument, "closed-loop metrics need at least one log");
  ClosedLoopReport r;
  r.rollouts = static_cast<int>(logs.size());
  int with_collision = 0;
  double progress = 0.0;
  double jerk = 0.0, lat = 0.0, accel = 0.0, decel = 0.0;
  std::size_t steps = 0, n_accel = 0, n_decel = 0;
  for (const RolloutLog& log : logs) {
    const int onsets = log.num_collision_onsets();
    r.collisions += onsets;
    if (onsets > 0) ++with_collision;
    progress += log.progress;
    for (const StepRecord& s : log.steps) {
      jerk += std::abs(s.jerk);
      lat += std::abs(s.lat_accel);
      if (s.accel > 0.0) {
        accel += s.accel;
        ++n_accel;
      } else if (s.accel < 0.0) {
        decel += -s.accel;
        ++n_decel;
      }
      ++steps;
    }
  }
  r.collision_rate = 100.0 * with_collision / static_cast<double>(logs.size());
  r.progress = progress / static_cast<double>(logs.size());
  r.progress_per_collision = r.collisions > 0 ? progress / r.collisions : std::numeric_limits<double>::infinity();
  if (steps > 0) {
    r.jerk = jerk / static_cast<double>(steps);
    r.lat_accel = lat / static_cast<double>(steps);
  }
  if (n_accel > 0) r.accel = accel / static_cast<double>(n_accel);
  if (n_decel > 0) r.decel = decel / static_cast<double>(n_decel);
  return r;
}

std::uint64_t campaign_scenario_seed(const CampaignConfig& config, int index) {
  return derive_seed(config.seed, "campaign", static_cast<std::uint64_t>(index));
}

std::vector<RolloutLog> run_campaign(const CampaignConfig& config,
                                     const std::function<FutureProvider(int)>& make_provider,
                                     const std::function<void(int, const RolloutLog&)>& progress) {
  if (config.rollouts < 0) throw Error(ErrorCode::kInvalidArgument, "rollout count must be nonnegative");
  std::vector<RolloutLog> logs(static_cast<std::size_t>(config.rollouts));
  std::atomic<int> next{0};
  std::mutex mutex;
  std::exception_ptr failure;
  auto work = [&]() {
    for (int i = next++; i < config.rollouts; i = next++) {
      try {
        const ScenarioScript script = make_scenario(config.family, campaign_scenario_seed(config, i), config.options);
        FutureProvider provider;
        {
          std::lock_guard<std::mutex> lock(mutex);
          if (failure) return;
          provider = make_provider(i);
        }
        RolloutLog log = run_rollout(script, config.rollout, provider);
        std::lock_guard<std::mutex> lock(mutex);
        logs[static_cast<std::size_t>(i)] = std::move(log);
        if (progress) progress(i, logs[static_cast<std::size_t>(i)]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int threads = std::clamp(config.threads, 1, std::max(1, config.rollouts));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return logs;
}

std::vector<AblationVariant> ablation_variants() {
  return {
      {"full", "diverse sampler with E_p, learned scores, contingency planner"},
      {"M1", "prior samples, uniform probabilities, contingency planner"},
      {"M2", "diverse sampler without E_p, learned scores, contingency planner"},
      {"M3", "diverse sampler with E_p, uniform probabilities, contingency planner"},
      {"M4", "diverse sampler with E_p, learned scores, expected-cost planner"},
  };
}

std::vector<AblationRow> run_ablation(const AblationModels& models, const CampaignConfig& config,
                                      const std::vector<std::string>& names,
                                      const std::function<void(const std::string&, int)>& progress) {
  const std::vector<AblationVariant> all = ablation_variants();
  std::vector<AblationVariant> chosen;
  if (names.empty()) {
    chosen = all;
  } else {
    for (const std::string& n : names) {
      const auto it = std::find_if(all.begin(), all.end(), [&n](const AblationVariant& v) { return v.name == n; });
      if (it == all.end()) throw Error(ErrorCode::kInvalidArgument, "unknown ablation variant '" + n + "'");
      chosen.push_back(*it);
    }
  }
  auto need = [](const void* p, const char* what) {
    if (!p) throw Error(ErrorCode::kMissingCheckpoint, std::string("missing checkpoint: ") + what);
  };
  const int k = models.sampler ? models.sampler->config().k : DiverseSamplerConfig{}.k;
  std::vector<AblationRow> rows;
  for (const AblationVariant& v : chosen) {
    need(models.decoder, "decoder");
    ModelBundle bundle{models.decoder, models.sampler, models.scorer};
    ForecastSource source = ForecastSource::kDiverse;
    CampaignConfig c = config;
    if (v.name == "M1") {
      bundle = {models.decoder, nullptr, nullptr};
      source = ForecastSource::kPrior;
    } else if (v.name == "M2") {
      need(models.sampler_no_planning, "sampler without E_p");
      need(models.scorer_no_planning, "scorer for the sampler without E_p");
      bundle = {models.decoder, models.sampler_no_planning, models.scorer_no_planning};
    } else {
      need(models.sampler, "sampler");
      if (v.name == "M3") {
        bundle.scorer = nullptr;
      } else {
        need(models.scorer, "scorer");
      }
      if (v.name == "M4") c.rollout.planner = PlannerKind::kExpected;
    }
    const std::vector<RolloutLog> logs = run_campaign(
        c,
        [&](int i) {
          return model_provider(bundle, source, k, derive_seed(config.seed, "campaign.prior", static_cast<std::uint64_t>(i)));
        },
        [&](int i, const RolloutLog&) {
          if (progress) progress(v.name, i);
        });
    rows.push_back({v.name, v.description, closed_loop_metrics(logs)});
  }
  return rows;
}

}  // namespace lookout
