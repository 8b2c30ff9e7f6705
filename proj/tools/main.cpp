// lookout: data generation, training, evaluation, simulation and plotting.

#include "lookout/error.hpp"
#include "lookout/io.hpp"
#include "lookout/metrics.hpp"
#include "lookout/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace lookout;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

const char* kExitCodes =
    "Exit codes:\n"
    "  0   success\n"
    "  1   internal error\n"
    "  2   invalid argument or unknown flag\n"
    "  3   malformed config or input file\n"
    "  4   missing file\n"
    "  5   shape mismatch\n"
    "  6   projection out of range\n"
    "  7   empty candidate set\n"
    "  8   alignment failure\n"
    "  9   non-finite loss\n"
    "  10  decoder mutated during sampler training\n"
    "  11  checkpoint or file version mismatch\n"
    "  12  missing checkpoint\n"
    "  13  I/O failure\n"
    "Errors are printed to stderr as one line:\n"
    "  lookout: error code=<n> kind=<name> message=\"<text>\"\n"
    "The default output directory is $LOOKOUT_OUT_DIR, else ./out.\n";

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 0;
  bool quiet = false;
};

struct Context {
  RunConfig run;
  fs::path out;
  bool quiet = false;
  int threads = 1;

  std::string path(const std::string& rel) const { return (out / rel).string(); }
  std::string checkpoint(const std::string& name) const { return path("checkpoints/" + name + ".json"); }
  std::uint64_t seed(const char* label) const { return derive_seed(run.seed, label); }

  void log(const std::string& line) const {
    if (!quiet) std::fprintf(stderr, "%s\n", line.c_str());
  }
};

Context make_context(const Globals& g) {
  Context c;
  if (!g.config.empty()) c.run = load_run_config(g.config);
  if (g.seed) {
    c.run.seed = *g.seed;
    c.run.campaign.seed = *g.seed;
  }
  c.out = g.out_dir;
  c.quiet = g.quiet;
  c.threads = g.threads > 0 ? g.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return c;
}

PlanningSetup planning_setup(const RunConfig& run) {
  PlanningSetup s;
  s.sampler = run.campaign.rollout.sampler;
  s.weights = run.campaign.rollout.weights;
  s.cost = run.campaign.rollout.cost;
  s.planner = run.campaign.rollout.planner;
  return s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::function<void(int, double)> reporter(const Context& c, const std::string& stage, int every) {
  return [&c, stage, every](int it, double loss) {
    if (every > 0 && it % every == 0) c.log(stage + " it " + std::to_string(it) + " loss " + fmt(loss));
  };
}

/// "3", "0-9" or "1,4,7-9".
std::vector<int> parse_seed_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto dash = part.find('-');
    try {
      std::size_t used = 0;
      if (dash == std::string::npos) {
        out.push_back(std::stoi(part, &used));
        if (used != part.size()) throw std::invalid_argument(part);
      } else {
        const int lo = std::stoi(part.substr(0, dash));
        const int hi = std::stoi(part.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument(part);
        for (int i = lo; i <= hi; ++i) out.push_back(i);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidArgument, "bad seed list '" + text + "'");
    }
  }
  for (int s : out) {
    if (s < 0) throw Error(ErrorCode::kInvalidArgument, "seeds must be nonnegative");
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "empty seed list");
  return out;
}

std::string curve_csv(const std::vector<std::string>& columns, const std::vector<int>& iteration,
                      const std::vector<const std::vector<double>*>& values) {
  std::ostringstream os;
  os << "# lookout.training_curve v" << kCsvVersion << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << "\n";
  char buf[64];
  for (std::size_t r = 0; r < iteration.size(); ++r) {
    os << iteration[r];
    for (const auto* v : values) {
      std::snprintf(buf, sizeof(buf), ",%.17g", (*v)[r]);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string family;
  int train_count = -1;
  int test_count = -1;
};

void gen_data(const Context& c, const GenDataArgs& a) {
  DataSettings d = c.run.data;
  if (!a.family.empty()) d.family = family_from_name(a.family);
  if (a.train_count >= 0) d.train_count = a.train_count;
  if (a.test_count >= 0) d.test_count = a.test_count;
  const Dataset train = generate_dataset(d.family, d.train_count, c.seed("data.train"), d.options);
  const Dataset test = generate_dataset(d.family, d.test_count, c.seed("data.test"), d.options);
  save_dataset(c.path("data/train.json"), train);
  save_dataset(c.path("data/test.json"), test);
  write_text(c.path("run_config.json"), run_config_to_json(c.run));
  c.log("wrote " + std::to_string(train.samples.size()) + " train and " + std::to_string(test.samples.size()) +
        " test scenes of " + family_name(d.family));
}

struct TrainArgs {
  int iterations = -1;
  std::string data;
  std::string name;
};

void train_decoder(const Context& c, const TrainArgs& a) {
  const Dataset data = load_dataset(a.data.empty() ? c.path("data/train.json") : a.data);
  ForecastTrainConfig tc = c.run.forecast_train;
  if (a.iterations >= 0) tc.iterations = a.iterations;
  ForecastModel model = ForecastModel::create(c.run.forecast, c.seed("decoder.init"));
  const TrainCurve curve = train_forecast(model, data.samples, tc, c.seed("decoder.train"),
                                          reporter(c, "decoder", tc.log_every));
  const std::string name = a.name.empty() ? "decoder" : a.name;
  save_checkpoint(c.checkpoint(name), model);
  write_text(c.path("curves/" + name + ".csv"),
             curve_csv({"iteration", "loss", "reconstruction", "kl"}, curve.iteration,
                       {&curve.loss, &curve.reconstruction, &curve.kl}));
  c.log("saved " + c.checkpoint(name));
}

struct SamplerArgs : TrainArgs {
  std::optional<double> e_p_weight;
  std::string baseline;
  int k = -1;
  std::string decoder = "decoder";
};

void train_sampler_cmd(const Context& c, const SamplerArgs& a) {
  const Dataset data = load_dataset(a.data.empty() ? c.path("data/train.json") : a.data);
  const ForecastModel decoder = load_forecast_model(c.checkpoint(a.decoder));
  DiverseSamplerConfig config = c.run.sampler;
  config.latent_dim = decoder.config().latent_dim;
  if (a.k > 0) config.k = a.k;
  SamplerTrainConfig tc = c.run.sampler_train;
  if (a.iterations >= 0) tc.iterations = a.iterations;
  if (a.e_p_weight) tc.objective.w_planning = *a.e_p_weight;
  if (!a.baseline.empty()) tc.objective.baseline = a.baseline == "on";
  DiverseSampler sampler = DiverseSampler::create(config, c.seed("sampler.init"));
  const SamplerCurve curve = train_sampler(sampler, decoder, data.samples, planning_setup(c.run), tc,
                                           c.seed("sampler.train"), reporter(c, "sampler", tc.log_every));
  const std::string name = a.name.empty() ? "sampler" : a.name;
  save_checkpoint(c.checkpoint(name), sampler);
  write_text(c.path("curves/" + name + ".csv"),
             curve_csv({"iteration", "loss", "e_r", "e_p", "e_d", "kl"}, curve.iteration,
                       {&curve.loss, &curve.e_r, &curve.e_p, &curve.e_d, &curve.kl}));
  c.log("saved " + c.checkpoint(name));
}

struct ScorerArgs : TrainArgs {
  std::optional<double> alpha;
  std::string decoder = "decoder";
  std::string sampler = "sampler";
};

void train_scorer_cmd(const Context& c, const ScorerArgs& a) {
  const Dataset data = load_dataset(a.data.empty() ? c.path("data/train.json") : a.data);
  const ForecastModel decoder = load_forecast_model(c.checkpoint(a.decoder));
  const DiverseSampler sampler = load_sampler(c.checkpoint(a.sampler));
  ScorerConfig config = c.run.scorer;
  config.k = sampler.config().k;
  if (a.alpha) config.alpha = *a.alpha;
  ScorerTrainConfig tc = c.run.scorer_train;
  if (a.iterations >= 0) tc.iterations = a.iterations;
  Scorer scorer = Scorer::create(config, c.seed("scorer.init"));
  const ScorerCurve curve = train_scorer(scorer, sampler, decoder, data.samples, tc, c.seed("scorer.train"),
                                         reporter(c, "scorer", tc.log_every));
  const std::string name = a.name.empty() ? "scorer" : a.name;
  save_checkpoint(c.checkpoint(name), scorer);
  write_text(c.path("curves/" + name + ".csv"), curve_csv({"iteration", "loss"}, curve.iteration, {&curve.loss}));
  c.log("saved " + c.checkpoint(name));
}

struct EvalArgs {
  std::string data;
  int scenes = -1;
  std::string source = "diverse";
  std::string decoder = "decoder";
  std::string sampler = "sampler";
  int k = -1;
  bool normalized_asd = false;
  std::string name = "open_loop";
};

void eval_open_loop(const Context& c, const EvalArgs& a) {
  const Dataset data = load_dataset(a.data.empty() ? c.path("data/test.json") : a.data);
  const ForecastModel decoder = load_forecast_model(c.checkpoint(a.decoder));
  std::optional<DiverseSampler> sampler;
  int k = a.k;
  if (a.source == "diverse") {
    sampler = load_sampler(c.checkpoint(a.sampler));
    if (k > 0 && k != sampler->config().k) {
      throw Error(ErrorCode::kInvalidArgument, "--k must match the sampler's " + std::to_string(sampler->config().k));
    }
    k = sampler->config().k;
  } else if (k <= 0) {
    k = c.run.sampler.k;
  }
  const PlanningSetup setup = planning_setup(c.run);
  const std::size_t n = a.scenes < 0 ? data.samples.size()
                                     : std::min(data.samples.size(), static_cast<std::size_t>(a.scenes));
  std::vector<OpenLoopScene> scenes;
  for (std::size_t i = 0; i < n; ++i) {
    const ForecastSample& s = data.samples[i];
    FutureSet futures;
    if (sampler) {
      futures = infer_diverse(*sampler, decoder, s.scene);
    } else {
      Rng rng = make_rng(c.run.seed, "eval.prior", i);
      futures = forecast_prior(decoder, s.scene, k, rng);
    }
    OpenLoopScene scene;
    for (const ScenePrediction& p : futures.futures) scene.samples.push_back(p.xy);
    scene.truth = s.future;
    for (const ActorState& actor : s.scene.actors) scene.classes.push_back(actor.cls);
    scene.plans = plans_for(s.scene, futures, setup);
    scenes.push_back(std::move(scene));
    if ((i + 1) % 25 == 0) c.log("eval " + std::to_string(i + 1) + "/" + std::to_string(n));
  }
  const AsdNormalization norm = a.normalized_asd ? AsdNormalization::kPairwise : c.run.asd;
  const OpenLoopReport report = open_loop_metrics(scenes, norm);
  write_text(c.path("reports/" + a.name + ".csv"), open_loop_csv(report));
  write_text(c.path("reports/" + a.name + "_by_class.csv"), open_loop_class_csv(report));
  const OpenLoopRow& r = report.aggregate;
  c.log("minSADE " + fmt(r.min_sade) + " meanSADE " + fmt(r.mean_sade) + " minSASD " + fmt(r.min_sasd) +
        " meanSASD " + fmt(r.mean_sasd) + " meanPlanASD " + fmt(r.mean_plan_asd));
}

struct SimArgs {
  std::string scenario;
  std::string planner;
  std::string seeds = "0-9";
  std::string source = "diverse";
  std::string decoder = "decoder";
  std::string sampler = "sampler";
  std::string scorer = "scorer";
  std::string name;
  bool breakdown = false;
};

void simulate(const Context& c, const SimArgs& a) {
  RolloutConfig rc = c.run.campaign.rollout;
  if (!a.planner.empty()) rc.planner = planner_from_name(a.planner);
  const std::vector<int> seeds = parse_seed_list(a.seeds);

  std::optional<ScenarioScript> script_file;
  Family family = c.run.campaign.family;
  if (!a.scenario.empty()) {
    if (a.scenario.size() > 5 && a.scenario.substr(a.scenario.size() - 5) == ".json") {
      script_file = scenario_from_json(read_text(a.scenario));
    } else {
      family = family_from_name(a.scenario);
    }
  }
  CampaignConfig cc = c.run.campaign;
  cc.family = family;

  std::optional<ForecastModel> decoder;
  std::optional<DiverseSampler> sampler;
  std::optional<Scorer> scorer;
  ForecastSource source = ForecastSource::kDiverse;
  int k = c.run.sampler.k;
  if (a.source == "diverse" || a.source == "prior") {
    decoder = load_forecast_model(c.checkpoint(a.decoder));
    if (a.source == "diverse") {
      sampler = load_sampler(c.checkpoint(a.sampler));
      k = sampler->config().k;
    } else {
      source = ForecastSource::kPrior;
    }
    if (a.scorer != "none" && a.source == "diverse") scorer = load_scorer(c.checkpoint(a.scorer));
  }
  const ModelBundle bundle{decoder ? &*decoder : nullptr, sampler ? &*sampler : nullptr, scorer ? &*scorer : nullptr};
  auto provider_for = [&](int i) {
    if (a.source == "cv") return constant_velocity_provider();
    return model_provider(bundle, source, k, derive_seed(cc.seed, "campaign.prior", static_cast<std::uint64_t>(i)));
  };

  const std::string tag = a.name.empty() ? std::string(planner_name(rc.planner)) : a.name;
  std::vector<RolloutLog> logs(seeds.size());
  std::vector<ScenarioScript> scripts;
  for (int s : seeds) {
    if (script_file) {
      ScenarioScript sc = *script_file;
      if (seeds.size() > 1) sc.seed = derive_seed(script_file->seed, "simulate", static_cast<std::uint64_t>(s));
      scripts.push_back(std::move(sc));
    } else {
      scripts.push_back(make_scenario(family, campaign_scenario_seed(cc, s), cc.options));
    }
  }
  // Same parallel scheme as run_campaign, over an explicit seed list.
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr failure;
  auto work = [&]() {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        FutureProvider provider;
        {
          std::lock_guard<std::mutex> lock(mutex);
          provider = provider_for(seeds[i]);
        }
        RolloutLog log = run_rollout(scripts[i], rc, provider);
        std::lock_guard<std::mutex> lock(mutex);
        c.log("rollout " + std::to_string(seeds[i]) + " progress " + fmt(log.progress) + " m, collisions " +
              std::to_string(log.num_collision_onsets()));
        logs[i] = std::move(log);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int threads = std::min<int>(c.threads, static_cast<int>(seeds.size()));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::string stem = "sim/" + tag + "/" + std::to_string(seeds[i]);
    write_text(c.path(stem + "_scenario.json"), scenario_to_json(scripts[i]));
    write_text(c.path(stem + "_log.json"), rollout_log_to_json(logs[i]));
    if (a.breakdown) {
      const World world(scripts[i], resolve_modes(scripts[i]), false);
      const Scene scene = world.scene();
      const FutureSet futures = provider_for(seeds[i])(scene, 0);
      const PlanningProblem problem = build_problem(scene, futures, rc.sampler, rc.weights, rc.cost);
      write_text(c.path(stem + "_actions.csv"), action_breakdown_csv(problem.table, futures.probabilities));
      write_text(c.path(stem + "_costs.csv"), cost_breakdown_csv(scene, problem, rc.weights, rc.cost));
    }
  }
  const ClosedLoopReport report = closed_loop_metrics(logs);
  const std::vector<AblationRow> rows{{tag, std::string(planner_name(rc.planner)) + " planner, " + a.source + " futures", report}};
  write_text(c.path("sim/" + tag + "/summary.csv"), ablation_csv(rows));
  if (!c.quiet) std::fputs(ablation_table(rows).c_str(), stdout);
}

struct AblateArgs {
  std::vector<std::string> variants;
  int rollouts = -1;
  std::string family;
  std::string sampler = "sampler";
  std::string scorer = "scorer";
  std::string sampler_no_planning = "sampler_no_ep";
  std::string scorer_no_planning = "scorer_no_ep";
  std::string name = "ablation";
};

void ablate(const Context& c, const AblateArgs& a) {
  CampaignConfig cc = c.run.campaign;
  if (a.rollouts >= 0) cc.rollouts = a.rollouts;
  if (!a.family.empty()) cc.family = family_from_name(a.family);
  cc.threads = c.threads;

  std::vector<std::string> names = a.variants;
  if (names.empty()) {
    for (const AblationVariant& v : ablation_variants()) names.push_back(v.name);
  }
  bool need_main = false, need_scorer = false, need_no_planning = false;
  for (const std::string& n : names) {
    if (n == "M2") {
      need_no_planning = true;
    } else if (n != "M1") {
      need_main = true;
      need_scorer = need_scorer || n != "M3";
    }
  }
  auto require = [&](const std::string& name) {
    const std::string p = c.checkpoint(name);
    if (!fs::exists(p)) throw Error(ErrorCode::kMissingCheckpoint, "missing checkpoint: " + p);
    return p;
  };
  const ForecastModel decoder = load_forecast_model(require("decoder"));
  std::optional<DiverseSampler> sampler, sampler_np;
  std::optional<Scorer> scorer, scorer_np;
  if (need_main) sampler = load_sampler(require(a.sampler));
  if (need_scorer) scorer = load_scorer(require(a.scorer));
  if (need_no_planning) {
    sampler_np = load_sampler(require(a.sampler_no_planning));
    scorer_np = load_scorer(require(a.scorer_no_planning));
  }
  AblationModels models;
  models.decoder = &decoder;
  models.sampler = sampler ? &*sampler : nullptr;
  models.scorer = scorer ? &*scorer : nullptr;
  models.sampler_no_planning = sampler_np ? &*sampler_np : nullptr;
  models.scorer_no_planning = scorer_np ? &*scorer_np : nullptr;

  const std::vector<AblationRow> rows = run_ablation(models, cc, names, [&](const std::string& v, int i) {
    if ((i + 1) % 10 == 0) c.log(v + " rollout " + std::to_string(i + 1) + "/" + std::to_string(cc.rollouts));
  });
  write_text(c.path("reports/" + a.name + ".csv"), ablation_csv(rows));
  const std::string table = ablation_table(rows);
  write_text(c.path("reports/" + a.name + ".txt"), table);
  if (!c.quiet) std::fputs(table.c_str(), stdout);
}

struct PlotArgs {
  std::string ablation;
  std::vector<std::string> open_loop;  // VARIANT=path
};

void plot(const Context& c, const PlotArgs& a) {
  const std::vector<AblationRow> rows = parse_ablation_csv(read_text(a.ablation.empty() ? c.path("reports/ablation.csv") : a.ablation));
  std::vector<PlotPoint> progress_cr;
  for (const AblationRow& r : rows) progress_cr.push_back({r.report.collision_rate, r.report.progress, r.name});
  write_text(c.path("plots/progress_vs_cr.svg"),
             svg_scatter("Progress against collision rate", "collision rate [%]", "progress [m]", progress_cr));
  if (a.open_loop.empty()) return;
  std::vector<PlotPoint> div_cr, div_progress;
  for (const std::string& spec : a.open_loop) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "--open-loop expects VARIANT=path");
    const std::string variant = spec.substr(0, eq);
    const auto it = std::find_if(rows.begin(), rows.end(), [&](const AblationRow& r) { return r.name == variant; });
    if (it == rows.end()) throw Error(ErrorCode::kInvalidArgument, "no ablation row named '" + variant + "'");
    const OpenLoopReport ol = parse_open_loop_csv(read_text(spec.substr(eq + 1)));
    div_cr.push_back({ol.aggregate.mean_plan_asd, it->report.collision_rate, variant});
    div_progress.push_back({ol.aggregate.mean_plan_asd, it->report.progress, variant});
  }
  write_text(c.path("plots/cr_vs_plan_diversity.svg"),
             svg_scatter("Collision rate against planning diversity", "meanPlanASD [m]", "collision rate [%]", div_cr));
  write_text(c.path("plots/progress_vs_plan_diversity.svg"),
             svg_scatter("Progress against planning diversity", "meanPlanASD [m]", "progress [m]", div_progress));
}

void print_error(int code, const std::string& kind, std::string message) {
  for (char& ch : message) {
    if (ch == '\n' || ch == '\r') ch = ' ';
    if (ch == '"') ch = '\'';
  }
  std::fprintf(stderr, "lookout: error code=%d kind=%s message=\"%s\"\n", code, kind.c_str(), message.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diverse multi-future forecasting and contingency planning"};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  const char* env_out = std::getenv("LOOKOUT_OUT_DIR");
  g.out_dir = env_out && *env_out ? env_out : "out";
  app.add_option("--config", g.config, "Run config (JSON)");
  app.add_option("--seed", g.seed, "Root seed; every subsystem seed derives from it");
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Rollout threads, 0 for all cores")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "No progress output");

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate train and test scenes");
  gen->add_option("--family", gd.family, "lane_follow, yield_or_go, cut_in or unprotected_left");
  gen->add_option("--train-count", gd.train_count);
  gen->add_option("--test-count", gd.test_count);

  TrainArgs td;
  auto* tdec = app.add_subcommand("train-decoder", "Train the latent-variable forecaster");
  tdec->add_option("--iterations", td.iterations);
  tdec->add_option("--data", td.data, "Training set (default <out>/data/train.json)");
  tdec->add_option("--name", td.name, "Checkpoint name (default decoder)");

  SamplerArgs ts;
  auto* tsam = app.add_subcommand("train-sampler", "Train the diverse sampler against a frozen decoder");
  tsam->add_option("--e-p-weight", ts.e_p_weight, "Planning diversity weight (0 disables E_p)");
  tsam->add_option("--baseline", ts.baseline, "REINFORCE mean-reward baseline")->check(CLI::IsMember({"on", "off"}));
  tsam->add_option("--k", ts.k, "Number of futures");
  tsam->add_option("--iterations", ts.iterations);
  tsam->add_option("--data", ts.data);
  tsam->add_option("--decoder", ts.decoder)->capture_default_str();
  tsam->add_option("--name", ts.name, "Checkpoint name (default sampler)");

  ScorerArgs tsc;
  auto* tsco = app.add_subcommand("train-scorer", "Train the scenario scorer");
  tsco->add_option("--alpha", tsc.alpha, "Target distribution temperature");
  tsco->add_option("--iterations", tsc.iterations);
  tsco->add_option("--data", tsc.data);
  tsco->add_option("--decoder", tsc.decoder)->capture_default_str();
  tsco->add_option("--sampler", tsc.sampler)->capture_default_str();
  tsco->add_option("--name", tsc.name, "Checkpoint name (default scorer)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval-open-loop", "Open-loop forecast and plan-diversity metrics");
  eval->add_option("--data", ev.data, "Test set (default <out>/data/test.json)");
  eval->add_option("--scenes", ev.scenes, "Use the first N scenes");
  eval->add_option("--source", ev.source)->check(CLI::IsMember({"diverse", "prior"}))->capture_default_str();
  eval->add_option("--decoder", ev.decoder)->capture_default_str();
  eval->add_option("--sampler", ev.sampler)->capture_default_str();
  eval->add_option("--k", ev.k, "Prior samples per scene");
  eval->add_flag("--normalized-asd", ev.normalized_asd, "Divide pairwise sums by S(S-1)");
  eval->add_option("--name", ev.name, "Report name under <out>/reports")->capture_default_str();

  SimArgs sm;
  auto* sim = app.add_subcommand("simulate", "Closed-loop rollouts");
  sim->add_option("--scenario", sm.scenario, "Family name or scenario JSON file");
  sim->add_option("--planner", sm.planner)->check(CLI::IsMember({"contingency", "expected"}));
  sim->add_option("--seeds", sm.seeds, "Campaign indices, e.g. 0-9 or 1,4,7")->capture_default_str();
  sim->add_option("--source", sm.source)->check(CLI::IsMember({"diverse", "prior", "cv"}))->capture_default_str();
  sim->add_option("--decoder", sm.decoder)->capture_default_str();
  sim->add_option("--sampler", sm.sampler)->capture_default_str();
  sim->add_option("--scorer", sm.scorer, "Scorer checkpoint or none")->capture_default_str();
  sim->add_option("--name", sm.name, "Output subdirectory (default planner name)");
  sim->add_flag("--breakdown", sm.breakdown, "Write per-action and per-candidate costs of the first step");

  AblateArgs ab;
  auto* abl = app.add_subcommand("ablate", "Closed-loop ablation table");
  abl->add_option("--variants", ab.variants, "Subset of full, M1, M2, M3, M4");
  abl->add_option("--rollouts", ab.rollouts);
  abl->add_option("--family", ab.family);
  abl->add_option("--sampler", ab.sampler)->capture_default_str();
  abl->add_option("--scorer", ab.scorer)->capture_default_str();
  abl->add_option("--sampler-no-ep", ab.sampler_no_planning)->capture_default_str();
  abl->add_option("--scorer-no-ep", ab.scorer_no_planning)->capture_default_str();
  abl->add_option("--name", ab.name, "Report name under <out>/reports")->capture_default_str();

  PlotArgs pl;
  auto* plt = app.add_subcommand("plot", "SVG trade-off charts from report CSVs");
  plt->add_option("--ablation", pl.ablation, "Ablation CSV (default <out>/reports/ablation.csv)");
  plt->add_option("--open-loop", pl.open_loop, "VARIANT=open-loop CSV, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error(kExitUsage, "invalid_argument", e.what());
    return kExitUsage;
  }

  try {
    const Context c = make_context(g);
    if (*gen) gen_data(c, gd);
    if (*tdec) train_decoder(c, td);
    if (*tsam) train_sampler_cmd(c, ts);
    if (*tsco) train_scorer_cmd(c, tsc);
    if (*eval) eval_open_loop(c, ev);
    if (*sim) simulate(c, sm);
    if (*abl) ablate(c, ab);
    if (*plt) plot(c, pl);
  } catch (const Error& e) {
    print_error(static_cast<int>(e.code()), error_code_name(e.code()), e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    print_error(kExitInternal, "internal", e.what());
    return kExitInternal;
  }
  return 0;
}
