#pragma once

#include <cmath>
#include <string>

#include "herdcast/core/error.hpp"
#include "herdcast/core/rng.hpp"
#include "herdcast/panel/panel.hpp"

namespace herdcast::panel {

struct FixtureConfig {
  int n_counties = 26;
  int first_year = 2021;
  int last_year = 2025;
  std::uint64_t seed = 7;
  int latent_rank = 4;
  // Uniform noise amplitude relative to each feature's spread.
  double noise = 0.02;
};

// Synthetic county-year panel: each indicator is a fixed linear mixture of
// `latent_rank` smooth per-county trends plus bounded noise, so its centred
// values have rank latent_rank when noise is zero.
inline IndicatorPanel generate_fixture(const FixtureConfig& cfg, const Schema& schema = Schema::default_icbf()) {
  const auto p = static_cast<int>(schema.size());
  if (cfg.n_counties < 2) throw ValidationError("fixture needs at least two counties");
  if (cfg.last_year < cfg.first_year) throw ValidationError("fixture year range is empty");
  if (cfg.latent_rank < 1 || cfg.latent_rank > p)
    throw ValidationError("latent rank must lie in [1, " + std::to_string(p) + "]");
  if (cfg.noise < 0.0 || cfg.noise > 0.1) throw ValidationError("fixture noise must lie in [0, 0.1]");

  Rng rng(cfg.seed);
  const int r = cfg.latent_rank;
  const int T = cfg.last_year - cfg.first_year + 1;

  Matrix mixing(p, r);
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k < r; ++k) mixing(j, k) = rng.normal();
    mixing.row(j) /= mixing.row(j).cwiseAbs().sum();
  }

  IndicatorPanel panel;
  panel.feature_names = schema.names();
  panel.orientation = schema.orientations();
  panel.values.resize(static_cast<Eigen::Index>(cfg.n_counties) * T, p);

  const double mid = 0.5 * (cfg.first_year + cfg.last_year);
  const double half = std::max(0.5 * (cfg.last_year - cfg.first_year), 1.0);
  const auto& irish = irish_counties();
  for (int c = 0; c < cfg.n_counties; ++c) {
    Eigen::VectorXd level(r), slope(r), phase(r);
    for (int k = 0; k < r; ++k) {
      level(k) = rng.uniform(-0.6, 0.6);
      slope(k) = rng.uniform(-0.15, 0.15);
      phase(k) = rng.uniform(0.0, 6.283185307179586);
    }
    const std::string name = c < static_cast<int>(irish.size()) ? irish[static_cast<std::size_t>(c)]
                                                                : "County " + std::to_string(c + 1);
    for (int t = 0; t < T; ++t) {
      const int year = cfg.first_year + t;
      const double tau = (year - mid) / half;
      Eigen::VectorXd f(r);
      for (int k = 0; k < r; ++k) f(k) = level(k) + slope(k) * tau + 0.08 * std::sin(0.9 * tau + phase(k));
      const Eigen::VectorXd mix = mixing * f;
      const auto row = static_cast<Eigen::Index>(c) * T + t;
      for (int j = 0; j < p; ++j) {
        const auto& spec = schema.features[static_cast<std::size_t>(j)];
        const double noise = cfg.noise > 0.0 ? rng.uniform(-cfg.noise, cfg.noise) : 0.0;
        panel.values(row, j) = spec.center + spec.spread * (mix(j) + noise);
      }
      panel.keys.push_back({c, name, year});
    }
  }
  return panel;
}

}  // namespace herdcast::panel
