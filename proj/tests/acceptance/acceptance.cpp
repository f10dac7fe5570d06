// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "herdcast/nn/gradcheck.hpp"
#include "herdcast/panel/fixture.hpp"
#include "herdcast/panel/scaler.hpp"
#include "herdcast/pca/pillars.hpp"
#include "herdcast/scoring/scoring.hpp"
#include "herdcast/stgnn/baselines.hpp"
#include "herdcast/vae/vae.hpp"
#include "support.hpp"

using namespace herdcast;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---- A1 -------------------------------------------------------------------

Outcome a1() {
  Outcome o;
  const auto fx = panel::generate_fixture({});
  const Matrix x = panel::minmax_fit_apply(fx).values;
  vae::VaeConfig cfg;
  cfg.seed = 1;
  const auto aug = vae::augment_conditional(vae::init_vae(cfg), x, 4, 2);
  o.require(fx.rows() == 130, "fixture has " + std::to_string(fx.rows()) + " rows");
  o.require(aug.total_rows() == 650, "total rows " + std::to_string(aug.total_rows()));
  if (o.pass) o.detail = "130 real rows, K=4, 650 total";
  return o;
}

// ---- A2 -------------------------------------------------------------------

Outcome a2() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    vae::LatentGaussian g{rng.normal_matrix(3, 1).col(0), (rng.normal_matrix(3, 1) * 0.5).col(0)};
    const double exact = vae::kl_divergence(g);
    double s = 0.0;
    for (int n = 0; n < 100000; ++n) {
      double lr = 0.0;
      for (Eigen::Index j = 0; j < 3; ++j) {
        const double sd = std::exp(0.5 * g.log_var(j));
        const double e = rng.normal();
        const double z = g.mu(j) + sd * e;
        lr += -0.5 * e * e - std::log(sd) + 0.5 * z * z;
      }
      s += lr;
    }
    worst = std::max(worst, std::abs(s / 100000.0 - exact) / exact);
  }
  const double secs = seconds_since(t0);
  o.require(worst < 0.02, "max relative error " + fmt(worst));
  o.require(secs < 10.0, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "max relative error " + fmt(worst) + " over 100 latents, " + fmt(secs) + " s";
  return o;
}

// ---- A3 -------------------------------------------------------------------

Outcome a3() {
  Outcome o;
  const auto t0 = Clock::now();
  vae::VaeConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden = {6, 4};
  cfg.latent_dim = 3;
  cfg.seed = 9;
  auto p = vae::init_vae(cfg);
  Rng rng(4);
  Matrix batch(4, 5);
  for (Eigen::Index i = 0; i < batch.size(); ++i) batch(i) = rng.uniform();
  const Matrix eps = rng.normal_matrix(4, 3);
  const auto grads = vae::vae_loss_and_gradients(batch, p, 0.7, eps).second;
  const double ev =
      nn::check_gradients(p.tensors(), grads, [&] { return vae::vae_loss(batch, p, 0.7, eps).total; }).max_relative_error;

  stgnn::StgnnConfig sc;
  sc.input_dim = 5;
  sc.hidden = 6;
  sc.spatial_dim = 5;
  sc.key_dim = 3;
  sc.value_dim = 4;
  sc.head_hidden = 3;
  sc.dropout = 0.0;
  sc.window = 3;
  sc.seed = 5;
  Rng g(5);
  const Matrix a = geo::knn_graph(support::random_centroids(4, g), 2).normalized;
  stgnn::Sequence seq;
  for (int t = 0; t < 3; ++t) seq.x.push_back(g.normal_matrix(4, 5));
  seq.target = g.normal_matrix(4, 3);
  const double es = stgnn::gradient_check(stgnn::init_stgnn(sc), {seq}, a, {0, 1, 2}, 1e-3).max_relative_error;
  const double secs = seconds_since(t0);
  o.require(ev < 1e-4, "VAE max relative error " + fmt(ev));
  o.require(es < 1e-4, "STGNN max relative error " + fmt(es));
  o.require(secs < 60.0, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "VAE " + fmt(ev) + ", STGNN " + fmt(es) + ", " + fmt(secs) + " s";
  return o;
}

// ---- A4 -------------------------------------------------------------------

Outcome a4() {
  Outcome o;
  Rng rng(44);
  double eig = 0.0, vec = 0.0, rho = 0.0, orth = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = rng.normal_matrix(9, 5);
    const Matrix cov = x.transpose() * x / 8.0;
    const auto m = pca::fit_pca(x, 5);
    const auto ref = support::jacobi_eigen(cov);
    eig = std::max(eig, (m.eigenvalues - ref.values).cwiseAbs().maxCoeff());
    for (int c = 0; c < 5; ++c) {
      const double s = m.loadings.col(c).dot(ref.vectors.col(c)) >= 0 ? 1.0 : -1.0;
      vec = std::max(vec, support::max_abs(m.loadings.col(c) - s * ref.vectors.col(c)));
    }
    rho = std::max(rho, std::abs(pca::variance_ratios(m).sum() - 1.0));
    orth = std::max(orth, support::max_abs(m.loadings.transpose() * m.loadings - Matrix::Identity(5, 5)));
  }
  o.require(eig < 1e-8, "eigenvalue error " + fmt(eig));
  o.require(vec < 1e-8, "eigenvector error " + fmt(vec));
  o.require(rho < 1e-10, "ratio sum error " + fmt(rho));
  o.require(orth < 1e-8, "orthonormality error " + fmt(orth));
  if (o.pass) o.detail = "eigenpair error " + fmt(std::max(eig, vec)) + ", sum(rho) error " + fmt(rho);
  return o;
}

// ---- A5 -------------------------------------------------------------------

Outcome a5() {
  Outcome o;
  scoring::ScoreConfig cfg;
  const auto fit = scoring::fit_score_model(panel::generate_fixture({}), cfg);
  const auto& w = fit.model.weights.w;
  double wsum = 0.0;
  for (Eigen::Index c = 0; c < w.cols(); ++c) wsum = std::max(wsum, std::abs(w.col(c).sum() - 1.0));
  o.require(wsum < 1e-12, "within-pillar weight sum error " + fmt(wsum));
  const Vector& s = fit.index.scaled;
  o.require(s.minCoeff() == 10.0 && s.maxCoeff() == 100.0, "rescale endpoints " + fmt(s.minCoeff()) + ", " + fmt(s.maxCoeff()));

  const auto ols = scoring::regress_index_on_pillars(fit.index.raw, fit.index.S);
  const auto K = fit.index.S.cols();
  double aerr = std::abs(ols.coefficients(0));
  for (Eigen::Index k = 1; k <= K; ++k) aerr = std::max(aerr, std::abs(ols.coefficients(k) - 1.0 / static_cast<double>(K)));
  o.require(aerr < 1e-10, "OLS coefficient error " + fmt(aerr));
  o.require(ols.ssr < 1e-10, "OLS residual " + fmt(ols.ssr));

  const std::vector<double> a = {1, 2, 3}, b = {1, 3, 2};
  const auto r = scoring::rank_agreement(std::span<const double>(a), std::span<const double>(b));
  o.require(r.spearman == 0.5, "Spearman " + fmt(r.spearman));
  o.require(r.kendall == 1.0 / 3.0, "Kendall " + fmt(r.kendall));
  if (o.pass) o.detail = "weights, endpoints (10, 100), OLS 1/K with SSR " + fmt(ols.ssr) + ", ranks (0.5, 1/3)";
  return o;
}

// ---- A6 -------------------------------------------------------------------

Outcome a6() {
  Outcome o;
  const int k = 3;
  Rng rng(66);
  int degree_violations = 0, asym = 0, radius = 0, max_deg = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto g = geo::knn_graph(support::random_centroids(26, rng), k);
    bool bad = false;
    for (int d : g.degrees()) {
      max_deg = std::max(max_deg, d);
      if (d < k || d > 2 * k) bad = true;
    }
    degree_violations += bad;
    asym += support::max_abs(g.normalized - g.normalized.transpose()) != 0.0;
    radius += support::spectral_radius(g.normalized) > 1.0 + 1e-9;
  }
  o.require(degree_violations == 0, std::to_string(degree_violations) + "/1000 sets have a degree outside [k, 2k] (max " +
                                        std::to_string(max_deg) + ")");
  o.require(asym == 0, std::to_string(asym) + " asymmetric");
  o.require(radius == 0, std::to_string(radius) + " with spectral radius > 1");

  geo::CentroidTable two;
  two.names = {"a", "b"};
  two.points = {{53.0, -7.0}, {52.0, -8.0}};
  const Matrix a2 = geo::knn_graph(two, 1).normalized;
  o.require((a2.array() == 0.5).all(), "two-node graph not all 0.5");

  const geo::LatLon dublin{53.3498, -6.2603}, cork{51.8985, -8.4756};
  const double d = geo::haversine(dublin, cork);
  const double ref = support::vincenty_km(dublin.lat, dublin.lon, cork.lat, cork.lon);
  o.require(std::abs(d - 219.5) <= 1.0, "Dublin-Cork " + fmt(d) + " km");
  o.require(std::abs(d - ref) <= 1.0, "geodesic oracle " + fmt(ref) + " km");
  if (o.pass) o.detail = "1000 sets, Dublin-Cork " + fmt(d) + " km (oracle " + fmt(ref) + ")";
  return o;
}

// ---- A7 -------------------------------------------------------------------

Outcome a7() {
  Outcome o;
  Rng rng(77);
  int negative = 0;
  double sum_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = 1 + static_cast<int>(rng.index(8));
    const int w = 1 + static_cast<int>(rng.index(8));
    const Matrix h = rng.normal_matrix(T, 6) * 4.0;
    const Matrix wq = rng.normal_matrix(6, 3), wk = rng.normal_matrix(6, 3), wv = rng.normal_matrix(6, 2);
    const int t = static_cast<int>(rng.index(static_cast<std::size_t>(T)));
    const auto r = stgnn::temporal_attention(h, t, wq, wk, wv, w);
    negative += r.alpha.minCoeff() < 0.0;
    sum_err = std::max(sum_err, std::abs(r.alpha.sum() - 1.0));
  }
  o.require(negative == 0, std::to_string(negative) + " negative weights");
  o.require(sum_err < 1e-9, "sum error " + fmt(sum_err));
  const Matrix wq = rng.normal_matrix(3, 2), wk = rng.normal_matrix(3, 2), wv = rng.normal_matrix(3, 2);
  const Matrix h = rng.normal_matrix(4, 3);
  const auto one = stgnn::temporal_attention(h, 2, wq, wk, wv, 1);
  o.require(one.alpha.size() == 1 && one.alpha(0) == 1.0, "single-step weight not 1");
  const auto same = stgnn::temporal_attention(h.row(1).replicate(4, 1), 3, wq, wk, wv, 4);
  o.require((same.alpha.array() - 0.25).abs().maxCoeff() < 1e-12, "identical keys not uniform");
  if (o.pass) o.detail = "1000 random cases, sum error " + fmt(sum_err);
  return o;
}

// ---- A8 -------------------------------------------------------------------

Outcome a8() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng r(5);
  Vector b(16);
  for (int j = 0; j < 16; ++j) b(j) = r.uniform(-1, 1) / 4;
  const auto f = support::linear_fixture(42, b);
  const auto res = support::train_on_fixture(f);
  const auto& m = res.metrics;
  o.require(m.train.r2 > 0.99, "train R2 " + fmt(m.train.r2));
  o.require(m.val.r2 > 0.9, "held-out R2 " + fmt(m.val.r2));
  stgnn::FfnnConfig fc;
  const auto rep = stgnn::run_baselines(f.seq, {0, 1, 2}, {3, 4}, f.scaler, fc);
  for (const auto* x : {&rep.ffnn_train, &rep.ffnn_test, &rep.gkr_train, &rep.gkr_test})
    o.require(x->count > 0 && std::isfinite(x->r2) && std::isfinite(x->mae) && std::isfinite(x->rmse),
              "baseline report undefined");
  const double secs = seconds_since(t0);
  o.require(secs < 300.0, "runtime " + fmt(secs) + " s");
  if (o.pass)
    o.detail = "train R2 " + fmt(m.train.r2) + ", held-out R2 " + fmt(m.val.r2) + ", FFNN test R2 " +
               fmt(rep.ffnn_test.r2) + ", GKR test R2 " + fmt(rep.gkr_test.r2) + ", " + fmt(secs) + " s";
  return o;
}

// ---- A9 -------------------------------------------------------------------

Outcome a9() {
  Outcome o;
  const Matrix base = Matrix::Constant(2, 3, 55.0);
  const std::vector<int> years = {2026, 2027, 2028};
  const auto zero = forecast::monte_carlo(base, years, 100, 0.0, 1);
  o.require(support::max_abs(zero.q95 - zero.q05) == 0.0, "sigma 0 band has width");
  const auto wide = forecast::monte_carlo(Matrix::Constant(1, 1, 0.0), {2026}, 100000, 1.0, 9);
  const double z = support::normal_quantile(0.95);
  const double half = 0.5 * (wide.q95(0, 0) - wide.q05(0, 0));
  o.require(std::abs(half / z - 1.0) < 0.03, "half-width " + fmt(half));
  const forecast::ForecastOptions opt;
  o.require(opt.trials == 100 && opt.sigma == 0.01, "default trials/sigma");
  const auto d1 = forecast::monte_carlo(base, years, opt.trials, opt.sigma, 3);
  const auto d2 = forecast::monte_carlo(base, years, opt.trials, opt.sigma, 3);
  o.require(support::max_abs(d1.q95 - d2.q95) == 0.0 && support::max_abs(d1.q05 - d2.q05) == 0.0, "not reproducible");
  if (o.pass) o.detail = "half-width " + fmt(half) + " vs " + fmt(z) + ", defaults S=100 sigma=0.01 reproducible";
  return o;
}

// ---- A10 ------------------------------------------------------------------

Outcome a10() {
  Outcome o;
  const auto f = support::monotone_fixture();
  const auto params = support::train_on_fixture(f).params;
  const auto in = support::forecast_inputs(f, &params);
  const auto zero = forecast::rollout(in, 2030, Matrix::Zero(26, 16), 0.05, 3);
  o.require(support::max_abs(zero.baseline - zero.scenario) == 0.0, "zero deltas differ from baseline");
  for (const char* name : {"monaghan.json", "kerry.json"}) {
    try {
      const auto s = forecast::load_scenario(support::scenario_path(name));
      const auto b = forecast::make_bundle(in, s, {}, "acceptance");
      const auto sel = forecast::select(b, s.horizon_start, s.horizon_end, {s.deltas.begin()->first});
      o.require(sel.years.size() == 5 && sel.uplift.cols() == 5, std::string(name) + " uplift series is not 5 years");
    } catch (const std::exception& e) {
      o.require(false, std::string(name) + ": " + e.what());
    }
  }
  const auto s = forecast::load_scenario(support::scenario_path("monaghan.json"));
  const auto b = forecast::make_bundle(in, s, {}, "acceptance");
  const auto mon = forecast::select(b, 2026, 2030, {"Monaghan"});
  o.require(mon.uplift.rows() == 1 && (mon.uplift.array() > 0.0).all(), "monotone uplift not positive every year");
  if (o.pass) o.detail = "identity exact, both scenarios parse, Monaghan cumulative uplift " + fmt(mon.cumulative_uplift(0));
  return o;
}

// ---- A11 ------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool run(const std::string& args) {
  const std::string cmd = std::string(HERDCAST_CLI) + " " + args + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

bool pipeline(const fs::path& dir, std::string& why) {
  fs::create_directories(dir);
  const auto p = [&](const char* n) { return (dir / n).string(); };
  const std::vector<std::string> steps = {
      "fixture --seed 7 --out " + p("raw.csv"),
      "ingest --input " + p("raw.csv") + " --out " + p("panel.csv"),
      "augment --seed 7 --input " + p("panel.csv") + " --out " + p("aug.csv") + " --epochs 60",
      "train --seed 7 --input " + p("panel.csv") + " --augmented " + p("aug.csv") + " --out " + p("artifact.json") +
          " --epochs 200",
      "forecast --seed 7 --artifact " + p("artifact.json") + " --out " + p("forecast.csv"),
      "scenario --seed 7 --artifact " + p("artifact.json") + " --file " + support::scenario_path("monaghan.json") +
          " --out " + p("scenario.csv")};
  for (const auto& s : steps)
    if (!run(s)) {
      why = "step failed: " + s.substr(0, s.find(' '));
      return false;
    }
  return true;
}

Outcome a11() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("herdcast_accept_" + std::to_string(::getpid()));
  std::string why;
  const bool ok = pipeline(root / "a", why) && pipeline(root / "b", why);
  o.require(ok, why);
  if (ok)
    for (const char* n : {"aug.csv", "artifact.json", "forecast.csv", "scenario.csv"})
      o.require(slurp(root / "a" / n) == slurp(root / "b" / n), std::string(n) + " differs between runs");
  fs::remove_all(root);
  if (o.pass) o.detail = "artifact, augmented panel, forecast and scenario CSVs byte-identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},  {"A6", a6},
      {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}, {"A11", a11}};
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << id << (o.pass ? " PASS " : " FAIL ") << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria pass\n";
  return failed == 0 ? 0 : 1;
}
