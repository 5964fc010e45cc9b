#include "occ/fit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "occ/scene_io.hpp"

namespace occ {

namespace {

// Jittered lattice spanning [-2, 2] voxels per axis; the first K lattice
// points in x-fastest order.
std::vector<Vec3> offset_lattice(int k, const Vec3& voxel_size, double jitter,
                                 std::mt19937_64& rng) {
  int side = 1;
  while (side * side * side < k) ++side;
  std::uniform_real_distribution<double> jit(-jitter, jitter);
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int lx = i % side;
    const int ly = (i / side) % side;
    const int lz = i / (side * side);
    auto coord = [&](int l) {
      return side > 1 ? -2.0 + 4.0 * l / (side - 1) : 0.0;
    };
    Vec3 p{coord(lx) * voxel_size.x, coord(ly) * voxel_size.y,
           coord(lz) * voxel_size.z};
    if (jitter > 0.0) {
      p.x += jit(rng) * voxel_size.x;
      p.y += jit(rng) * voxel_size.y;
      p.z += jit(rng) * voxel_size.z;
    }
    out.push_back(p);
  }
  return out;
}

Vec3 uniform_point_in_grid(const GridSpec& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {grid.origin.x + u(rng) * grid.voxel_size.x * grid.dims[0],
          grid.origin.y + u(rng) * grid.voxel_size.y * grid.dims[1],
          grid.origin.z + u(rng) * grid.voxel_size.z * grid.dims[2]};
}

}  // namespace

std::string FreeLayout::param_name(std::size_t index) const {
  const std::size_t q = index / block();
  std::size_t r = index % block();
  const std::string prefix = "q" + std::to_string(q) + ".";
  if (r < static_cast<std::size_t>(classes))
    return prefix + "class_logit[" + std::to_string(r) + "]";
  r -= static_cast<std::size_t>(classes);
  if (r < 3) return prefix + "center." + std::string(1, "xyz"[r]);
  r -= 3;
  if (r < 3 * static_cast<std::size_t>(offsets))
    return prefix + "offset[" + std::to_string(r / 3) + "]." +
           std::string(1, "xyz"[r % 3]);
  r -= 3 * static_cast<std::size_t>(offsets);
  return prefix + "score_logit[" + std::to_string(r) + "]";
}

std::string SamplingLayout::param_name(std::size_t index) const {
  if (index < head_base()) {
    return "q" + std::to_string(index / 3) + ".init_center." +
           std::string(1, "xyz"[index % 3]);
  }
  const std::pair<std::size_t, const char*> blocks[] = {
      {delta_w(), "delta_w"},   {delta_b(), "delta_b"},
      {class_w(), "class_w"},   {class_b(), "class_b"},
      {offset_w(), "offset_w"}, {offset_b(), "offset_b"},
      {score_w(), "score_w"},   {score_b(), "score_b"}};
  std::size_t begin = blocks[0].first;
  const char* name = blocks[0].second;
  for (const auto& [b, n] : blocks)
    if (index >= b) {
      begin = b;
      name = n;
    }
  return std::string(name) + "[" + std::to_string(index - begin) + "]";
}

void AdamW::step(std::span<double> params, std::span<const double> grads, double lr,
                 const std::function<std::string(std::size_t)>& param_name) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("AdamW::step: size mismatch");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) {
      const std::string name = param_name ? param_name(i) : std::to_string(i);
      throw std::runtime_error("AdamW::step: non-finite gradient for parameter " + name);
    }
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) +
                       cfg_.weight_decay * params[i]);
  }
}

void FitConfig::validate() const {
  if (q_queries < 1) throw std::invalid_argument("fit config: q_queries < 1");
  if (k_offsets < 1) throw std::invalid_argument("fit config: k_offsets < 1");
  if (refine_steps < 1) throw std::invalid_argument("fit config: refine_steps < 1");
  if (feature_dim < 1) throw std::invalid_argument("fit config: feature_dim < 1");
  if (!(lr > 0.0)) throw std::invalid_argument("fit config: lr <= 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0))
    throw std::invalid_argument("fit config: lr_decay outside (0, 1]");
  if (epochs < 1) throw std::invalid_argument("fit config: epochs < 1");
}

std::vector<double> init_free_params(const FreeLayout& L, const GridSpec& grid,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> params(L.param_count(), 0.0);
  for (int q = 0; q < L.queries; ++q) {
    const Vec3 c = uniform_point_in_grid(grid, rng);
    params[L.center(q, 0)] = c.x;
    params[L.center(q, 1)] = c.y;
    params[L.center(q, 2)] = c.z;
    const std::vector<Vec3> lattice =
        offset_lattice(L.offsets, grid.voxel_size, 0.05, rng);
    for (int k = 0; k < L.offsets; ++k) {
      params[L.offset(q, k, 0)] = lattice[static_cast<std::size_t>(k)].x;
      params[L.offset(q, k, 1)] = lattice[static_cast<std::size_t>(k)].y;
      params[L.offset(q, k, 2)] = lattice[static_cast<std::size_t>(k)].z;
    }
    // class logits and score logits stay 0: uniform classes, scores 0.5
  }
  return params;
}

std::vector<double> init_sampling_params(const SamplingLayout& L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> params(L.param_count(), 0.0);
  for (int q = 0; q < L.queries; ++q) {
    const Vec3 c = uniform_point_in_grid(L.grid, rng);
    params[L.init_center(q, 0)] = c.x;
    params[L.init_center(q, 1)] = c.y;
    params[L.init_center(q, 2)] = c.z;
  }
  std::normal_distribution<double> w(0.0, 0.02);
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) params[i] = w(rng);
  };
  fill(L.delta_w(), L.delta_b());
  fill(L.class_w(), L.class_b());
  fill(L.offset_w(), L.offset_b());
  fill(L.score_w(), L.score_b());
  // offset bias starts on the lattice so initial shapes are sane
  const std::vector<Vec3> lattice =
      offset_lattice(L.offsets, L.grid.voxel_size, 0.0, rng);
  for (int k = 0; k < L.offsets; ++k) {
    params[L.offset_b() + static_cast<std::size_t>(3 * k)] = lattice[static_cast<std::size_t>(k)].x;
    params[L.offset_b() + static_cast<std::size_t>(3 * k + 1)] = lattice[static_cast<std::size_t>(k)].y;
    params[L.offset_b() + static_cast<std::size_t>(3 * k + 2)] = lattice[static_cast<std::size_t>(k)].z;
  }
  return params;
}

FitResult fit_scene(const Scene& scene, const FitConfig& cfg) {
  cfg.validate();
  const std::vector<GroundTruthObject> gts = filter_trainable(scene.objects);
  if (static_cast<int>(gts.size()) > cfg.q_queries)
    throw std::invalid_argument("fit_scene: more trainable objects than queries");
  for (const GroundTruthObject& gt : gts)
    if (static_cast<int>(gt.voxels.size()) > cfg.k_offsets)
      throw std::invalid_argument("fit_scene: object larger than k_offsets");

  FitResult result;
  result.predictor = cfg.predictor;
  const int classes = scene.class_table.size();
  std::function<std::string(std::size_t)> name_fn;
  if (cfg.predictor == PredictorKind::free_params) {
    result.free_layout = {cfg.q_queries, cfg.k_offsets, classes};
    result.params =
        init_free_params(result.free_layout, scene.semantic.spec, cfg.seed);
    name_fn = [L = result.free_layout](std::size_t i) { return L.param_name(i); };
  } else {
    if (cfg.feature_dim != scene.features.dim)
      throw std::invalid_argument("fit_scene: feature_dim mismatch with scene");
    result.sampling_layout = {cfg.q_queries,   cfg.k_offsets, classes,
                              cfg.feature_dim, cfg.refine_steps, scene.semantic.spec};
    result.params = init_sampling_params(result.sampling_layout, cfg.seed);
    name_fn = [L = result.sampling_layout](std::size_t i) { return L.param_name(i); };
  }

  AdamW optimizer(result.params.size());
  double lr = cfg.lr;
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  std::vector<double> grads(result.params.size());
  result.history.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    tape.reset();
    leaves.clear();
    leaves.reserve(result.params.size());
    for (double p : result.params) leaves.push_back(tape.variable(p));

    std::vector<ObjectPredictionT<ad::Var>> preds =
        cfg.predictor == PredictorKind::free_params
            ? predict_free<ad::Var>(leaves, result.free_layout)
            : predict_sampling<ad::Var>(leaves, result.sampling_layout,
                                        scene.features);
    const ObjectsLossResult loss = objects_loss(preds, gts, cfg.weights,
                                                cfg.anchor_mode,
                                                cfg.occupancy_form, cfg.focal);
    if (!std::isfinite(loss.breakdown.l_objects))
      throw std::runtime_error("fit_scene: non-finite loss at epoch " +
                               std::to_string(epoch));
    result.history.push_back(loss.breakdown);

    const std::vector<double> adjoints = tape.gradients(loss.total);
    for (std::size_t i = 0; i < leaves.size(); ++i)
      grads[i] = adjoints[static_cast<std::size_t>(leaves[i].index())];
    optimizer.step(result.params, grads, lr, name_fn);
    lr *= cfg.lr_decay;
  }
  return result;
}

std::vector<ObjectPrediction> predictions_from_fit(const FitResult& fit,
                                                   const Scene& scene) {
  const std::span<const double> params(fit.params);
  if (fit.predictor == PredictorKind::free_params)
    return predict_free<double>(params, fit.free_layout);
  return predict_sampling<double>(params, fit.sampling_layout, scene.features);
}

void write_loss_history_csv(const std::filesystem::path& path,
                            std::span<const LossBreakdown> history) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_loss_history_csv: cannot open " + path.string());
  out << "step,l_cls,l_dist_center,l_focal_occ,l_dist_offsets,l_objects\n";
  char line[256];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const LossBreakdown& b = history[i];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i,
                  b.l_cls, b.l_dist_center, b.l_focal_occ, b.l_dist_offsets,
                  b.l_objects);
    out << line;
  }
}

void save_fit_params(const FitResult& fit, const std::filesystem::path& path) {
  nlohmann::json j;
  if (fit.predictor == PredictorKind::free_params) {
    j["predictor"] = "free";
    j["queries"] = fit.free_layout.queries;
    j["offsets"] = fit.free_layout.offsets;
    j["classes"] = fit.free_layout.classes;
  } else {
    j["predictor"] = "sampling";
    j["queries"] = fit.sampling_layout.queries;
    j["offsets"] = fit.sampling_layout.offsets;
    j["classes"] = fit.sampling_layout.classes;
    j["feature_dim"] = fit.sampling_layout.feature_dim;
    j["refine_steps"] = fit.sampling_layout.refine_steps;
    j["grid"] = grid_spec_to_json(fit.sampling_layout.grid);
  }
  j["values"] = fit.params;
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("save_fit_params: cannot open " + path.string());
  out << j.dump(2) << '\n';
}

FitResult load_fit_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_fit_params: cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  FitResult fit;
  const std::string kind = j.at("predictor").get<std::string>();
  if (kind == "free") {
    fit.predictor = PredictorKind::free_params;
    fit.free_layout = {j.at("queries").get<int>(), j.at("offsets").get<int>(),
                       j.at("classes").get<int>()};
  } else if (kind == "sampling") {
    fit.predictor = PredictorKind::feature_sampling;
    fit.sampling_layout = {j.at("queries").get<int>(),
                           j.at("offsets").get<int>(),
                           j.at("classes").get<int>(),
                           j.at("feature_dim").get<int>(),
                           j.at("refine_steps").get<int>(),
                           grid_spec_from_json(j.at("grid"))};
  } else {
    throw std::invalid_argument("load_fit_params: unknown predictor " + kind);
  }
  fit.params = j.at("values").get<std::vector<double>>();
  const std::size_t expected = fit.predictor == PredictorKind::free_params
                                   ? fit.free_layout.param_count()
                                   : fit.sampling_layout.param_count();
  if (fit.params.size() != expected)
    throw std::invalid_argument("load_fit_params: wrong parameter count");
  return fit;
}

nlohmann::json fit_config_to_json(const FitConfig& cfg) {
  return {{"q_queries", cfg.q_queries},
          {"k_offsets", cfg.k_offsets},
          {"refine_steps", cfg.refine_steps},
          {"feature_dim", cfg.feature_dim},
          {"predictor",
           cfg.predictor == PredictorKind::free_params ? "free" : "sampling"},
          {"lr", cfg.lr},
          {"lr_decay", cfg.lr_decay},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed},
          {"anchor_mode",
           cfg.anchor_mode == AnchorMode::decoupled ? "decoupled" : "coupled"},
          {"occupancy_form",
           cfg.occupancy_form == OccupancyForm::focal ? "focal" : "log_score"},
          {"lambda1", cfg.weights.lambda1},
          {"lambda2", cfg.weights.lambda2},
          {"lambda3", cfg.weights.lambda3},
          {"lambda4", cfg.weights.lambda4},
          {"focal_alpha", cfg.focal.alpha},
          {"focal_gamma", cfg.focal.gamma}};
}

FitConfig fit_config_from_json(const nlohmann::json& j) {
  FitConfig cfg;
  if (j.contains("q_queries")) cfg.q_queries = j.at("q_queries").get<int>();
  if (j.contains("k_offsets")) cfg.k_offsets = j.at("k_offsets").get<int>();
  if (j.contains("refine_steps")) cfg.refine_steps = j.at("refine_steps").get<int>();
  if (j.contains("feature_dim")) cfg.feature_dim = j.at("feature_dim").get<int>();
  if (j.contains("predictor")) {
    const std::string kind = j.at("predictor").get<std::string>();
    if (kind == "free")
      cfg.predictor = PredictorKind::free_params;
    else if (kind == "sampling")
      cfg.predictor = PredictorKind::feature_sampling;
    else
      throw std::invalid_argument("fit config: unknown predictor " + kind);
  }
  if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
  if (j.contains("lr_decay")) cfg.lr_decay = j.at("lr_decay").get<double>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("anchor_mode")) {
    const std::string mode = j.at("anchor_mode").get<std::string>();
    if (mode == "decoupled")
      cfg.anchor_mode = AnchorMode::decoupled;
    else if (mode == "coupled")
      cfg.anchor_mode = AnchorMode::coupled;
    else
      throw std::invalid_argument("fit config: unknown anchor mode " + mode);
  }
  if (j.contains("occupancy_form")) {
    const std::string form = j.at("occupancy_form").get<std::string>();
    if (form == "focal")
      cfg.occupancy_form = OccupancyForm::focal;
    else if (form == "log_score")
      cfg.occupancy_form = OccupancyForm::log_score;
    else
      throw std::invalid_argument("fit config: unknown occupancy form " + form);
  }
  if (j.contains("lambda1")) cfg.weights.lambda1 = j.at("lambda1").get<double>();
  if (j.contains("lambda2")) cfg.weights.lambda2 = j.at("lambda2").get<double>();
  if (j.contains("lambda3")) cfg.weights.lambda3 = j.at("lambda3").get<double>();
  if (j.contains("lambda4")) cfg.weights.lambda4 = j.at("lambda4").get<double>();
  if (j.contains("focal_alpha")) cfg.focal.alpha = j.at("focal_alpha").get<double>();
  if (j.contains("focal_gamma")) cfg.focal.gamma = j.at("focal_gamma").get<double>();
  cfg.validate();
  return cfg;
}

FitConfig load_fit_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_fit_config: cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return fit_config_from_json(j);
}

}  // namespace occ
