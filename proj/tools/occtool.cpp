// occtool: generate synthetic scenes, fit object predictors, merge and
// evaluate panoptic occupancy grids, and sweep the merge voting radius.
// Every command writes a manifest.json with checksums of what it read and
// wrote; re-running a command with the same inputs reproduces the artifact
// checksums bit for bit.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "occ/fit.hpp"
#include "occ/manifest.hpp"
#include "occ/metrics.hpp"
#include "occ/panoptic.hpp"
#include "occ/scene.hpp"
#include "occ/scene_io.hpp"
#include "occ/svg.hpp"

namespace fs = std::filesystem;

namespace {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("OCCTOOL_LOG");
    if (!env) return 1;
    const std::string v = env;
    if (v == "0" || v == "quiet") return 0;
    if (v == "2" || v == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "occtool: %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::fprintf(stderr, "occtool[debug]: %s\n", msg.c_str());
}

// Full invocation as received by main, for the manifest; re-running this
// line reproduces the run.
std::string g_command_line;

std::string shell_quote(const std::string& arg) {
  if (!arg.empty() && arg.find_first_of(" \t'\"\\$&|;<>()*?![]{}~#") == std::string::npos)
    return arg;
  std::string quoted = "'";
  for (char c : arg) {
    if (c == '\'')
      quoted += "'\\''";
    else
      quoted += c;
  }
  return quoted + "'";
}

// Inputs that must exist before a command can run; mapped to exit code 2.
struct MissingInput : std::runtime_error {
  explicit MissingInput(const fs::path& p)
      : std::runtime_error("missing input file: " + p.string()) {}
};

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw MissingInput(p);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string scene_file_name(int index) {
  char name[32];
  std::snprintf(name, sizeof name, "scene_%03d.json", index);
  return name;
}

// ---------------------------------------------------------------- gen ----

struct GenArgs {
  std::string config_path;
  std::string out_dir;
  int n = 1;
  std::optional<std::uint64_t> seed;
};

int run_gen(const GenArgs& a) {
  Stopwatch timer;
  occ::RunManifest manifest;
  manifest.command = "gen";
  manifest.command_line = g_command_line;

  occ::SceneConfig cfg;
  if (!a.config_path.empty()) {
    require_file(a.config_path);
    cfg = occ::load_scene_config(a.config_path);
    manifest.inputs[a.config_path] = occ::sha256_file(a.config_path);
  }
  if (a.seed) cfg.seed = *a.seed;
  manifest.seed = cfg.seed;
  manifest.config = occ::scene_config_to_json(cfg);
  manifest.config["n"] = a.n;

  fs::create_directories(a.out_dir);
  const std::uint64_t base_seed = cfg.seed;
  for (int i = 0; i < a.n; ++i) {
    cfg.seed = base_seed + static_cast<std::uint64_t>(i);
    const occ::Scene scene = occ::generate_scene(cfg);
    const fs::path path = fs::path(a.out_dir) / scene_file_name(i);
    occ::save_scene(scene, path);
    manifest.outputs[path.string()] = occ::sha256_file(path.string());
    log_debug(path.string() + ": " + std::to_string(scene.objects.size()) +
              " objects, seed " + std::to_string(cfg.seed));
  }

  manifest.extra = {{"scenes", a.n}};
  manifest.duration_seconds = timer.seconds();
  occ::write_manifest(manifest, (fs::path(a.out_dir) / "manifest.json").string());
  log_info("gen: wrote " + std::to_string(a.n) + " scene(s) to " + a.out_dir);
  return 0;
}

// ---------------------------------------------------------------- fit ----

struct FitArgs {
  std::string scene_path;
  std::string config_path;
  std::string out_dir;
  std::optional<std::string> predictor;
  std::optional<std::string> anchor_mode;
  std::optional<std::string> occupancy_form;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> queries;
  std::optional<int> offsets;
  std::optional<double> lr;
  std::optional<double> lr_decay;
};

int run_fit(const FitArgs& a) {
  Stopwatch timer;
  occ::RunManifest manifest;
  manifest.command = "fit";
  manifest.command_line = g_command_line;

  require_file(a.scene_path);
  const occ::Scene scene = occ::load_scene(a.scene_path);
  manifest.inputs[a.scene_path] = occ::sha256_file(a.scene_path);

  occ::FitConfig cfg;
  if (!a.config_path.empty()) {
    require_file(a.config_path);
    cfg = occ::load_fit_config(a.config_path);
    manifest.inputs[a.config_path] = occ::sha256_file(a.config_path);
  }
  if (a.predictor)
    cfg.predictor = *a.predictor == "free" ? occ::PredictorKind::free_params
                                           : occ::PredictorKind::feature_sampling;
  if (a.anchor_mode)
    cfg.anchor_mode = *a.anchor_mode == "decoupled" ? occ::AnchorMode::decoupled
                                                    : occ::AnchorMode::coupled;
  if (a.occupancy_form)
    cfg.occupancy_form = *a.occupancy_form == "focal" ? occ::OccupancyForm::focal
                                                      : occ::OccupancyForm::log_score;
  if (a.seed) cfg.seed = *a.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.queries) cfg.q_queries = *a.queries;
  if (a.offsets) cfg.k_offsets = *a.offsets;
  if (a.lr) cfg.lr = *a.lr;
  if (a.lr_decay) cfg.lr_decay = *a.lr_decay;
  cfg.feature_dim = scene.features.dim;
  cfg.validate();
  manifest.seed = cfg.seed;
  manifest.config = occ::fit_config_to_json(cfg);

  log_info("fit: " + a.scene_path + ", " + std::to_string(cfg.epochs) + " epochs");
  const occ::FitResult fit = occ::fit_scene(scene, cfg);

  fs::create_directories(a.out_dir);
  const fs::path params_path = fs::path(a.out_dir) / "params.json";
  const fs::path loss_path = fs::path(a.out_dir) / "loss.csv";
  occ::save_fit_params(fit, params_path);
  occ::write_loss_history_csv(loss_path, fit.history);
  manifest.outputs[params_path.string()] = occ::sha256_file(params_path.string());
  manifest.outputs[loss_path.string()] = occ::sha256_file(loss_path.string());

  manifest.extra = {{"initial_l_objects", fit.history.front().l_objects},
                    {"final_l_objects", fit.history.back().l_objects},
                    {"epochs", static_cast<int>(fit.history.size())}};
  manifest.duration_seconds = timer.seconds();
  occ::write_manifest(manifest, (fs::path(a.out_dir) / "manifest.json").string());
  log_info("fit: l_objects " + std::to_string(fit.history.front().l_objects) +
           " -> " + std::to_string(fit.history.back().l_objects));
  return 0;
}

// --------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string scene_path;
  std::string params_path;
  bool oracle = false;
  std::string out_dir;
  int radius = 9;
  bool mask = false;
  double flip_rate = 0.0;
  double center_noise = 0.0;
  std::uint64_t seed = 0;
};

// Shared by eval and ablate-radius: build predictions, corrupt the baseline,
// rasterize, merge at the given radius.
struct MergedScene {
  occ::SemanticGrid baseline;
  occ::InstanceMap instances;
};

MergedScene prepare_merge_inputs(const occ::Scene& scene,
                                 const std::vector<occ::ObjectPrediction>& preds,
                                 double flip_rate, std::uint64_t seed) {
  occ::SceneConfig corrupt_cfg;
  corrupt_cfg.seed = seed;
  corrupt_cfg.corruption.label_flip_rate = flip_rate;
  return {occ::corrupt_baseline(scene, corrupt_cfg),
          occ::rasterize_instances(preds, scene.semantic.spec, scene.class_table)};
}

std::vector<occ::ObjectPrediction> oracle_for(const occ::Scene& scene) {
  int k = 1;
  for (const occ::GroundTruthObject& o : scene.objects)
    k = std::max(k, static_cast<int>(o.voxels.size()));
  return occ::oracle_predictions(scene, k);
}

int run_eval(const EvalArgs& a) {
  Stopwatch timer;
  occ::RunManifest manifest;
  manifest.command = "eval";
  manifest.command_line = g_command_line;
  manifest.seed = a.seed;

  require_file(a.scene_path);
  const occ::Scene scene = occ::load_scene(a.scene_path);
  manifest.inputs[a.scene_path] = occ::sha256_file(a.scene_path);

  std::vector<occ::ObjectPrediction> preds;
  if (!a.params_path.empty()) {
    require_file(a.params_path);
    const occ::FitResult fit = occ::load_fit_params(a.params_path);
    preds = occ::predictions_from_fit(fit, scene);
    manifest.inputs[a.params_path] = occ::sha256_file(a.params_path);
  } else {
    preds = oracle_for(scene);
  }
  preds = occ::perturb_centers(std::move(preds), a.center_noise, a.seed);

  const MergedScene merged_in =
      prepare_merge_inputs(scene, preds, a.flip_rate, a.seed);
  const occ::PanopticGrid merged = occ::merge_panoptic(
      merged_in.baseline, merged_in.instances, scene.class_table, {a.radius});
  const occ::SemanticGrid merged_sem{merged.spec, merged.labels};

  const occ::EvalReport unmasked =
      occ::evaluate_grids(merged_sem, scene.semantic, merged, scene.panoptic,
                          scene.class_table, nullptr);
  const occ::EvalReport masked =
      occ::evaluate_grids(merged_sem, scene.semantic, merged, scene.panoptic,
                          scene.class_table, &scene.visibility);
  for (const std::string& issue :
       occ::validate_panoptic(merged, scene.class_table))
    log_debug("merged grid: " + issue);

  manifest.config = {{"radius", a.radius},
                     {"mask", a.mask},
                     {"flip_rate", a.flip_rate},
                     {"center_noise", a.center_noise},
                     {"predictions", a.params_path.empty() ? "oracle" : "params"}};

  fs::create_directories(a.out_dir);
  const fs::path json_path = fs::path(a.out_dir) / "eval.json";
  const fs::path csv_path = fs::path(a.out_dir) / "eval.csv";
  {
    nlohmann::json j{{"radius", a.radius},
                     {"masked", occ::eval_report_to_json(masked)},
                     {"unmasked", occ::eval_report_to_json(unmasked)}};
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("eval: cannot open " + json_path.string());
    out << j.dump(2) << '\n';
  }
  {
    const occ::EvalReport& headline = a.mask ? masked : unmasked;
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("eval: cannot open " + csv_path.string());
    out << occ::eval_report_csv_header() << '\n'
        << occ::eval_report_csv_row(headline) << '\n';
  }
  manifest.outputs[json_path.string()] = occ::sha256_file(json_path.string());
  manifest.outputs[csv_path.string()] = occ::sha256_file(csv_path.string());

  const occ::EvalReport& headline = a.mask ? masked : unmasked;
  manifest.extra = {{"iou", headline.iou},
                    {"miou", headline.miou},
                    {"pq", headline.pq},
                    {"pq_things", headline.pq_things}};
  manifest.duration_seconds = timer.seconds();
  occ::write_manifest(manifest, (fs::path(a.out_dir) / "manifest.json").string());
  char line[128];
  std::snprintf(line, sizeof line, "eval: iou %.4f miou %.4f pq %.4f (r=%d)",
                headline.iou, headline.miou, headline.pq, a.radius);
  log_info(line);
  return 0;
}

// ------------------------------------------------------ ablate-radius ----

struct AblateArgs {
  std::vector<std::string> scenes;
  std::vector<int> radii = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  std::string out_dir;
  double center_noise = 0.0;
  double flip_rate = 0.0;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool svg = false;
};

int run_ablate(const AblateArgs& a) {
  Stopwatch timer;
  occ::RunManifest manifest;
  manifest.command = "ablate-radius";
  manifest.command_line = g_command_line;
  manifest.seed = a.seed;
  manifest.config = {{"radii", a.radii},
                     {"center_noise", a.center_noise},
                     {"flip_rate", a.flip_rate},
                     {"jobs", a.jobs},
                     {"svg", a.svg}};

  for (const std::string& path : a.scenes) require_file(path);

  // One result slot per (scene, radius); worker threads claim scenes, the
  // merge order below never depends on the schedule.
  std::vector<std::vector<occ::PQReport>> reports(
      a.scenes.size(), std::vector<occ::PQReport>(a.radii.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(a.scenes.size());

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < a.scenes.size();
         i = next.fetch_add(1)) {
      try {
        const occ::Scene scene = occ::load_scene(a.scenes[i]);
        const std::uint64_t scene_seed = a.seed + static_cast<std::uint64_t>(i);
        const std::vector<occ::ObjectPrediction> preds = occ::perturb_centers(
            oracle_for(scene), a.center_noise, scene_seed);
        const MergedScene in =
            prepare_merge_inputs(scene, preds, a.flip_rate, scene_seed);
        for (std::size_t r = 0; r < a.radii.size(); ++r) {
          const occ::PanopticGrid merged = occ::merge_panoptic(
              in.baseline, in.instances, scene.class_table, {a.radii[r]});
          reports[i][r] =
              occ::panoptic_quality(merged, scene.panoptic, scene.class_table);
        }
        log_debug(a.scenes[i] + ": swept " + std::to_string(a.radii.size()) +
                  " radii");
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(a.scenes.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  fs::create_directories(a.out_dir);
  const fs::path csv_path = fs::path(a.out_dir) / "radius_sweep.csv";
  std::vector<double> agg_pq(a.radii.size(), 0.0), agg_pq_things(a.radii.size(), 0.0);
  {
    std::ofstream out(csv_path);
    if (!out)
      throw std::runtime_error("ablate-radius: cannot open " + csv_path.string());
    out << "scene,radius,pq,rq,sq,pq_things,rq_things,sq_things,pq_stuff,"
           "rq_stuff,sq_stuff\n";
    char row[512];
    auto emit = [&](const std::string& scene, int radius, const occ::PQReport& r) {
      std::snprintf(row, sizeof row,
                    "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                    scene.c_str(), radius, r.pq, r.rq, r.sq, r.pq_things,
                    r.rq_things, r.sq_things, r.pq_stuff, r.rq_stuff, r.sq_stuff);
      out << row << '\n';
    };
    for (std::size_t i = 0; i < a.scenes.size(); ++i)
      for (std::size_t r = 0; r < a.radii.size(); ++r)
        emit(fs::path(a.scenes[i]).filename().string(), a.radii[r], reports[i][r]);
    for (std::size_t r = 0; r < a.radii.size(); ++r) {
      occ::PQReport mean;
      const double n = static_cast<double>(a.scenes.size());
      for (std::size_t i = 0; i < a.scenes.size(); ++i) {
        mean.pq += reports[i][r].pq / n;
        mean.rq += reports[i][r].rq / n;
        mean.sq += reports[i][r].sq / n;
        mean.pq_things += reports[i][r].pq_things / n;
        mean.rq_things += reports[i][r].rq_things / n;
        mean.sq_things += reports[i][r].sq_things / n;
        mean.pq_stuff += reports[i][r].pq_stuff / n;
        mean.rq_stuff += reports[i][r].rq_stuff / n;
        mean.sq_stuff += reports[i][r].sq_stuff / n;
      }
      agg_pq[r] = mean.pq;
      agg_pq_things[r] = mean.pq_things;
      emit("aggregate", a.radii[r], mean);
    }
  }
  manifest.outputs[csv_path.string()] = occ::sha256_file(csv_path.string());
  for (const std::string& path : a.scenes)
    manifest.inputs[path] = occ::sha256_file(path);

  if (a.svg) {
    const fs::path svg_path = fs::path(a.out_dir) / "radius_sweep.svg";
    std::vector<occ::ChartSeries> series(2);
    series[0].label = "pq";
    series[1].label = "pq_things";
    for (std::size_t r = 0; r < a.radii.size(); ++r) {
      series[0].points.emplace_back(a.radii[r], agg_pq[r]);
      series[1].points.emplace_back(a.radii[r], agg_pq_things[r]);
    }
    occ::write_line_chart(svg_path, "panoptic quality vs voting radius",
                          "radius (voxels)", "quality", series);
    manifest.outputs[svg_path.string()] = occ::sha256_file(svg_path.string());
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < a.radii.size(); ++r)
    if (agg_pq[r] > agg_pq[best]) best = r;
  manifest.extra = {{"best_radius", a.radii[best]},
                    {"best_pq", agg_pq[best]},
                    {"scenes", a.scenes.size()}};
  manifest.duration_seconds = timer.seconds();
  occ::write_manifest(manifest, (fs::path(a.out_dir) / "manifest.json").string());
  char line[128];
  std::snprintf(line, sizeof line, "ablate-radius: best pq %.4f at r=%d",
                agg_pq[best], a.radii[best]);
  log_info(line);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) {
    if (i > 0) g_command_line += ' ';
    g_command_line += shell_quote(argv[i]);
  }

  CLI::App app{"synthetic panoptic occupancy toolkit"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "generate synthetic scenes");
  gen->add_option("--config", gen_args.config_path, "scene config JSON");
  gen->add_option("--n", gen_args.n, "number of scenes")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_args.seed, "base seed (scene i uses seed + i)");
  gen->add_option("--out", gen_args.out_dir, "output directory")->required();

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "fit an object predictor to a scene");
  fit->add_option("--scene", fit_args.scene_path, "scene JSON")->required();
  fit->add_option("--config", fit_args.config_path, "fit config JSON");
  fit->add_option("--predictor", fit_args.predictor, "free | sampling")
      ->check(CLI::IsMember({"free", "sampling"}));
  fit->add_option("--anchor-mode", fit_args.anchor_mode, "decoupled | coupled")
      ->check(CLI::IsMember({"decoupled", "coupled"}));
  fit->add_option("--occupancy-form", fit_args.occupancy_form,
                  "focal | log_score")
      ->check(CLI::IsMember({"focal", "log_score"}));
  fit->add_option("--seed", fit_args.seed, "training seed");
  fit->add_option("--epochs", fit_args.epochs, "training epochs");
  fit->add_option("--queries", fit_args.queries, "query count Q");
  fit->add_option("--offsets", fit_args.offsets, "offsets per query K");
  fit->add_option("--lr", fit_args.lr, "initial learning rate");
  fit->add_option("--lr-decay", fit_args.lr_decay, "per-epoch lr decay");
  fit->add_option("--out", fit_args.out_dir, "output directory")->required();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "merge and score predictions");
  eval->add_option("--scene", eval_args.scene_path, "scene JSON")->required();
  CLI::Option* params_opt =
      eval->add_option("--params", eval_args.params_path, "fitted params JSON");
  eval->add_flag("--oracle", eval_args.oracle,
                 "use ground-truth predictions (default when --params absent)")
      ->excludes(params_opt);
  eval->add_option("--radius", eval_args.radius, "merge voting radius")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  eval->add_flag("--mask,!--no-mask", eval_args.mask,
                 "headline CSV row uses the visibility mask");
  eval->add_option("--flip-rate", eval_args.flip_rate,
                   "baseline label corruption rate");
  eval->add_option("--center-noise", eval_args.center_noise,
                   "stddev of injected center noise (m)");
  eval->add_option("--seed", eval_args.seed, "corruption seed");
  eval->add_option("--out", eval_args.out_dir, "output directory")->required();

  AblateArgs ablate_args;
  CLI::App* ablate =
      app.add_subcommand("ablate-radius", "sweep the merge voting radius");
  ablate->add_option("--scenes", ablate_args.scenes, "scene JSON files")
      ->required()
      ->expected(-1);
  ablate->add_option("--radii", ablate_args.radii, "radii to sweep")
      ->delimiter(',');
  ablate->add_option("--center-noise", ablate_args.center_noise,
                     "stddev of injected center noise (m)");
  ablate->add_option("--flip-rate", ablate_args.flip_rate,
                     "baseline label corruption rate");
  ablate->add_option("--seed", ablate_args.seed,
                     "base corruption seed (scene i uses seed + i)");
  ablate->add_option("--jobs", ablate_args.jobs, "worker threads")
      ->check(CLI::PositiveNumber);
  ablate->add_flag("--svg", ablate_args.svg, "also write a line chart");
  ablate->add_option("--out", ablate_args.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return run_gen(gen_args);
    if (*fit) return run_fit(fit_args);
    if (*eval) return run_eval(eval_args);
    if (*ablate) return run_ablate(ablate_args);
  } catch (const MissingInput& e) {
    std::fprintf(stderr, "occtool: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "occtool: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
