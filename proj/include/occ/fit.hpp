#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "occ/losses.hpp"
#include "occ/scene.hpp"

namespace occ {

enum class PredictorKind { free_params, feature_sampling };

// Free predictor: every query owns its outputs directly as parameters
// (class logits, center, raw offsets, score logits).
struct FreeLayout {
  int queries = 0;
  int offsets = 0;
  int classes = 0;

  std::size_t block() const {
    return static_cast<std::size_t>(classes) + 3 +
           4 * static_cast<std::size_t>(offsets);
  }
  std::size_t param_count() const {
    return static_cast<std::size_t>(queries) * block();
  }
  std::size_t class_logit(int q, int c) const {
    return static_cast<std::size_t>(q) * block() + static_cast<std::size_t>(c);
  }
  std::size_t center(int q, int axis) const {
    return static_cast<std::size_t>(q) * block() + static_cast<std::size_t>(classes) +
           static_cast<std::size_t>(axis);
  }
  std::size_t offset(int q, int k, int axis) const {
    return static_cast<std::size_t>(q) * block() + static_cast<std::size_t>(classes) +
           3 + 3 * static_cast<std::size_t>(k) + static_cast<std::size_t>(axis);
  }
  std::size_t score_logit(int q, int k) const {
    return static_cast<std::size_t>(q) * block() + static_cast<std::size_t>(classes) +
           3 + 3 * static_cast<std::size_t>(offsets) + static_cast<std::size_t>(k);
  }
  std::string param_name(std::size_t index) const;
};

// Feature-sampling predictor: learnable initial centers refined by
// repeatedly sampling the feature grid trilinearly and applying shared
// linear heads. Center estimates are clamped to the grid box before
// sampling; with zero delta-head weights the centers never move.
struct SamplingLayout {
  int queries = 0;
  int offsets = 0;
  int classes = 0;
  int feature_dim = 0;
  int refine_steps = 1;
  GridSpec grid;

  std::size_t init_center(int q, int axis) const {
    return 3 * static_cast<std::size_t>(q) + static_cast<std::size_t>(axis);
  }
  std::size_t head_base() const { return 3 * static_cast<std::size_t>(queries); }
  // shared heads, each a row-major weight block followed by its bias
  std::size_t delta_w() const { return head_base(); }
  std::size_t delta_b() const { return delta_w() + 3 * static_cast<std::size_t>(feature_dim); }
  std::size_t class_w() const { return delta_b() + 3; }
  std::size_t class_b() const {
    return class_w() + static_cast<std::size_t>(classes) * static_cast<std::size_t>(feature_dim);
  }
  std::size_t offset_w() const { return class_b() + static_cast<std::size_t>(classes); }
  std::size_t offset_b() const {
    return offset_w() + 3 * static_cast<std::size_t>(offsets) * static_cast<std::size_t>(feature_dim);
  }
  std::size_t score_w() const { return offset_b() + 3 * static_cast<std::size_t>(offsets); }
  std::size_t score_b() const {
    return score_w() + static_cast<std::size_t>(offsets) * static_cast<std::size_t>(feature_dim);
  }
  std::size_t param_count() const { return score_b() + static_cast<std::size_t>(offsets); }
  std::string param_name(std::size_t index) const;
};

template <class T>
std::vector<ObjectPredictionT<T>> predict_free(std::span<const T> params,
                                               const FreeLayout& L) {
  std::vector<ObjectPredictionT<T>> preds(static_cast<std::size_t>(L.queries));
  for (int q = 0; q < L.queries; ++q) {
    ObjectPredictionT<T>& p = preds[static_cast<std::size_t>(q)];
    p.class_logits.reserve(static_cast<std::size_t>(L.classes));
    for (int c = 0; c < L.classes; ++c)
      p.class_logits.push_back(params[L.class_logit(q, c)]);
    p.center = {params[L.center(q, 0)], params[L.center(q, 1)], params[L.center(q, 2)]};
    p.offsets.reserve(static_cast<std::size_t>(L.offsets));
    p.scores.reserve(static_cast<std::size_t>(L.offsets));
    for (int k = 0; k < L.offsets; ++k) {
      p.offsets.push_back({params[L.offset(q, k, 0)], params[L.offset(q, k, 1)],
                           params[L.offset(q, k, 2)]});
      p.scores.push_back(sigmoid(params[L.score_logit(q, k)]));
    }
  }
  return preds;
}

// Trilinear sample of all feature dims at a world point; the point is
// clamped into the lattice of cell centers first.
template <class T>
std::vector<T> sample_features(const FeatureGrid& F, const Vec3T<T>& p) {
  T g[3] = {(p.x - F.spec.origin.x) / F.spec.voxel_size.x - 0.5,
            (p.y - F.spec.origin.y) / F.spec.voxel_size.y - 0.5,
            (p.z - F.spec.origin.z) / F.spec.voxel_size.z - 0.5};
  int i0[3], i1[3];
  T frac[3] = {T(0.0), T(0.0), T(0.0)};
  for (int a = 0; a < 3; ++a) {
    const int n = F.spec.dims[static_cast<std::size_t>(a)];
    g[a] = clamp_value(g[a], 0.0, static_cast<double>(n - 1));
    i0[a] = std::min(static_cast<int>(std::floor(value_of(g[a]))), n > 1 ? n - 2 : 0);
    i1[a] = std::min(i0[a] + 1, n - 1);
    frac[a] = g[a] - static_cast<double>(i0[a]);
  }
  T w[8];
  for (int c = 0; c < 8; ++c) {
    const T wx = (c & 1) ? frac[0] : T(1.0) - frac[0];
    const T wy = (c & 2) ? frac[1] : T(1.0) - frac[1];
    const T wz = (c & 4) ? frac[2] : T(1.0) - frac[2];
    w[c] = wx * wy * wz;
  }
  std::vector<T> out(static_cast<std::size_t>(F.dim), T(0.0));
  for (int c = 0; c < 8; ++c) {
    const VoxelIndex v{(c & 1) ? i1[0] : i0[0], (c & 2) ? i1[1] : i0[1],
                       (c & 4) ? i1[2] : i0[2]};
    const std::span<const double> f = F.at(v);
    for (int d = 0; d < F.dim; ++d)
      out[static_cast<std::size_t>(d)] =
          out[static_cast<std::size_t>(d)] + w[c] * f[static_cast<std::size_t>(d)];
  }
  return out;
}

template <class T>
std::vector<ObjectPredictionT<T>> predict_sampling(std::span<const T> params,
                                                   const SamplingLayout& L,
                                                   const FeatureGrid& features) {
  const int d = L.feature_dim;
  auto head = [&](std::size_t w_base, std::size_t b_base, const std::vector<T>& f,
                  int out_dim) {
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(out_dim));
    for (int j = 0; j < out_dim; ++j) {
      T acc = params[b_base + static_cast<std::size_t>(j)];
      const std::size_t row = w_base + static_cast<std::size_t>(j) * static_cast<std::size_t>(d);
      for (int i = 0; i < d; ++i)
        acc = acc + params[row + static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)];
      out.push_back(acc);
    }
    return out;
  };

  std::vector<ObjectPredictionT<T>> preds(static_cast<std::size_t>(L.queries));
  for (int q = 0; q < L.queries; ++q) {
    Vec3T<T> center{params[L.init_center(q, 0)], params[L.init_center(q, 1)],
                    params[L.init_center(q, 2)]};
    std::vector<T> f;
    for (int m = 0; m < L.refine_steps; ++m) {
      f = sample_features(features, center);
      const std::vector<T> delta = head(L.delta_w(), L.delta_b(), f, 3);
      center = center + Vec3T<T>{delta[0], delta[1], delta[2]};
    }
    ObjectPredictionT<T>& p = preds[static_cast<std::size_t>(q)];
    p.center = center;
    p.class_logits = head(L.class_w(), L.class_b(), f, L.classes);
    const std::vector<T> off = head(L.offset_w(), L.offset_b(), f, 3 * L.offsets);
    const std::vector<T> sc = head(L.score_w(), L.score_b(), f, L.offsets);
    p.offsets.reserve(static_cast<std::size_t>(L.offsets));
    p.scores.reserve(static_cast<std::size_t>(L.offsets));
    for (int k = 0; k < L.offsets; ++k) {
      p.offsets.push_back({off[static_cast<std::size_t>(3 * k)],
                           off[static_cast<std::size_t>(3 * k + 1)],
                           off[static_cast<std::size_t>(3 * k + 2)]});
      p.scores.push_back(sigmoid(sc[static_cast<std::size_t>(k)]));
    }
  }
  return preds;
}

// Decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
class AdamW {
 public:
  struct Config {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
  };

  explicit AdamW(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}
  AdamW(std::size_t n, Config cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  // Throws std::runtime_error naming the parameter on a non-finite gradient.
  void step(std::span<double> params, std::span<const double> grads, double lr,
            const std::function<std::string(std::size_t)>& param_name = {});

 private:
  Config cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long step_count_ = 0;
};

struct FitConfig {
  int q_queries = 16;
  int k_offsets = 125;
  int refine_steps = 2;   // feature-sampling predictor only
  int feature_dim = 32;   // must match the scene's feature grid
  PredictorKind predictor = PredictorKind::free_params;
  double lr = 0.1;
  double lr_decay = 0.995;  // per epoch
  int epochs = 400;
  std::uint64_t seed = 0;
  AnchorMode anchor_mode = AnchorMode::decoupled;
  OccupancyForm occupancy_form = OccupancyForm::focal;
  LossWeights weights;
  FocalParams focal;

  void validate() const;
};

struct FitResult {
  PredictorKind predictor = PredictorKind::free_params;
  FreeLayout free_layout;
  SamplingLayout sampling_layout;
  std::vector<double> params;
  std::vector<LossBreakdown> history;
};

std::vector<double> init_free_params(const FreeLayout& L, const GridSpec& grid,
                                     std::uint64_t seed);
std::vector<double> init_sampling_params(const SamplingLayout& L, std::uint64_t seed);

// Full-batch training loop on one scene: forward, reverse sweep, AdamW step,
// exponential lr decay. Deterministic for a fixed config. Aborts with
// std::runtime_error if the loss goes non-finite.
FitResult fit_scene(const Scene& scene, const FitConfig& cfg);

// Plain-value predictions of a fitted model (for rasterization and eval).
std::vector<ObjectPrediction> predictions_from_fit(const FitResult& fit,
                                                   const Scene& scene);

// Columns: step,l_cls,l_dist_center,l_focal_occ,l_dist_offsets,l_objects
void write_loss_history_csv(const std::filesystem::path& path,
                            std::span<const LossBreakdown> history);

void save_fit_params(const FitResult& fit, const std::filesystem::path& path);
FitResult load_fit_params(const std::filesystem::path& path);

// Training config files; missing keys keep their defaults.
nlohmann::json fit_config_to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const nlohmann::json& j);
FitConfig load_fit_config(const std::filesystem::path& path);

}  // namespace occ
