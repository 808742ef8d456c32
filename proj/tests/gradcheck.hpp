#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "scriptalign/nn.hpp"

namespace testing {

struct GradCheckStats {
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
};

// Reduced tower: conv -> pool -> conv -> pool -> dense -> dropout -> dense,
// widths scaled like the full tower.
inline std::vector<scriptalign::nn::LayerSpec> reduced_tower(double multiplier) {
  using scriptalign::nn::LayerSpec;
  auto f = [&](double n) { return static_cast<std::size_t>(std::ceil(n * multiplier - 1e-9)); };
  return {LayerSpec::conv(f(64), 5, 5), LayerSpec::max_pool(2, 2), LayerSpec::conv(f(128), 3, 3),
          LayerSpec::max_pool(2, 2),    LayerSpec::dense(f(4096)),  LayerSpec::dropout(0.1),
          LayerSpec::dense(f(4096))};
}

// ReLU on/off bits and pool winners; a finite difference is only meaningful
// when this pattern is the same at w-h, w and w+h.
inline std::vector<std::uint32_t> activation_pattern(const scriptalign::nn::Tape& tape) {
  std::vector<std::uint32_t> out;
  for (const auto& layer : tape.layers) {
    if (!layer.argmax.empty()) {
      out.insert(out.end(), layer.argmax.begin(), layer.argmax.end());
    } else {
      for (double v : layer.output) out.push_back(v > 0.0 ? 1u : 0u);
    }
  }
  return out;
}

// Compares backward() against central differences of f = sum_i c_i e_i for
// random coordinates of every conv and dense layer (weights and biases).
inline std::map<scriptalign::nn::LayerKind, GradCheckStats> gradient_check(
    const std::vector<scriptalign::nn::LayerSpec>& specs, const scriptalign::CanvasSpec& canvas,
    std::size_t coords_per_kind, double step, std::uint64_t seed) {
  using namespace scriptalign;
  std::mt19937_64 rng(seed);
  nn::ModelParams params = nn::init_params(specs, canvas, 1.0, seed, nn::InitScheme::FanInScaled);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& layer : params.layers) {
    for (double& b : layer.bias) b = 0.1 * normal(rng);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> px(canvas.target_height * canvas.target_width);
  for (double& v : px) v = unit(rng);
  const SubwordImage img(canvas.target_height, canvas.target_width, px);
  constexpr std::uint64_t kDropoutSeed = 77;

  const auto base = nn::forward(params, specs, img, true, kDropoutSeed);
  std::vector<double> upstream(base.embedding.size());
  for (double& c : upstream) c = normal(rng);
  const nn::ModelParams analytic = nn::backward(params, specs, base.tape, upstream);
  const auto base_pattern = activation_pattern(base.tape);

  auto objective = [&](std::vector<std::uint32_t>& pattern) {
    const auto r = nn::forward(params, specs, img, true, kDropoutSeed);
    pattern = activation_pattern(r.tape);
    double f = 0.0;
    for (std::size_t i = 0; i < upstream.size(); ++i) f += upstream[i] * r.embedding[i];
    return f;
  };

  std::map<nn::LayerKind, GradCheckStats> stats;
  for (nn::LayerKind kind : {nn::LayerKind::Conv, nn::LayerKind::Dense}) {
    struct Coord {
      std::size_t layer;
      bool bias;
      std::size_t index;
    };
    std::vector<Coord> coords;
    for (std::size_t l = 0; l < specs.size(); ++l) {
      if (specs[l].kind != kind) continue;
      for (std::size_t i = 0; i < params.layers[l].weights.size(); ++i) coords.push_back({l, false, i});
      for (std::size_t i = 0; i < params.layers[l].bias.size(); ++i) coords.push_back({l, true, i});
    }
    std::shuffle(coords.begin(), coords.end(), rng);
    GradCheckStats& s = stats[kind];
    for (const Coord& c : coords) {
      if (s.checked >= coords_per_kind) break;
      auto& vec = c.bias ? params.layers[c.layer].bias : params.layers[c.layer].weights;
      const auto& grad_vec = c.bias ? analytic.layers[c.layer].bias : analytic.layers[c.layer].weights;
      const double a = grad_vec[c.index];
      if (std::abs(a) < 1e-9) continue;  // dead unit; nothing to compare
      const double saved = vec[c.index];
      std::vector<std::uint32_t> plus_pattern;
      std::vector<std::uint32_t> minus_pattern;
      vec[c.index] = saved + step;
      const double f_plus = objective(plus_pattern);
      vec[c.index] = saved - step;
      const double f_minus = objective(minus_pattern);
      vec[c.index] = saved;
      if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
        ++s.skipped_kinks;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
      s.max_rel_error = std::max(s.max_rel_error, rel);
      ++s.checked;
    }
  }
  return stats;
}

}  // namespace testing
