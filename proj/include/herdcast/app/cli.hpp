#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "herdcast/app/http.hpp"
#include "herdcast/app/pipeline.hpp"
#include "herdcast/panel/fixture.hpp"

namespace herdcast::app {

namespace cli_detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

inline void write_json(const std::string& path, const json& j) { open_out(path) << j.dump(1) << "\n"; }

inline std::string default_centroids() { return std::string(HERDCAST_DATA_DIR) + "/centroids_ie.csv"; }

// "Feature name=beneficial|detrimental"
inline panel::Schema schema_with(const std::vector<std::string>& overrides) {
  auto schema = panel::Schema::default_icbf();
  for (const auto& o : overrides) {
    const auto eq = o.rfind('=');
    if (eq == std::string::npos) throw ValidationError("orientation override '" + o + "' must look like NAME=beneficial");
    schema.set_orientation(o.substr(0, eq), panel::orientation_from_string(o.substr(eq + 1)));
  }
  return schema;
}

inline panel::IndicatorPanel history_panel(const ProjectArtifact& a) {
  panel::IndicatorPanel p;
  p.feature_names = a.feature_names;
  p.orientation = a.orientation;
  for (std::size_t c = 0; c < a.counties.size(); ++c)
    for (int y : a.years) p.keys.push_back({static_cast<int>(c), a.counties[c], y});
  p.values = panel::minmax_inverse(a.history, a.minmax);
  return p;
}

struct Common {
  std::uint64_t seed = 0;
  std::vector<std::string> orient;
};

inline void add_common(CLI::App* sub, Common& c, std::uint64_t default_seed = 0) {
  c.seed = default_seed;
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--orient", c.orient, "Orientation override NAME=beneficial|detrimental (repeatable)");
}

struct ForecastFlags {
  std::string artifact, out, json_out;
  std::vector<std::string> counties;
  int last_year = 0;
  double sigma_feat = -1.0;
  int trials = 0;
  double sigma = -1.0;
  bool seed_given = false;
};

inline void add_forecast_flags(CLI::App* sub, ForecastFlags& f, bool mc) {
  sub->add_option("--artifact", f.artifact, "Trained project artifact")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "Forecast CSV")->required();
  sub->add_option("--json", f.json_out, "Forecast JSON");
  sub->add_option("--county", f.counties, "Restrict output to these counties (repeatable)");
  sub->add_option("--last-year", f.last_year, "Final forecast year (default from artifact)");
  sub->add_option("--sigma-feat", f.sigma_feat, "Feature extrapolation noise std (default from artifact)");
  if (mc) {
    sub->add_option("--trials", f.trials, "Monte Carlo trials (default from artifact)");
    sub->add_option("--sigma", f.sigma, "Monte Carlo noise std (default from artifact)");
  }
}

inline forecast::ForecastOptions options_for(const ProjectArtifact& a, const ForecastFlags& f, bool seed_given,
                                             std::uint64_t seed, int horizon_end) {
  forecast::ForecastOptions o;
  o.last_year = f.last_year > 0 ? f.last_year : std::max(a.forecast.last_year, horizon_end);
  o.sigma_feat = f.sigma_feat >= 0.0 ? f.sigma_feat : a.forecast.sigma_feat;
  o.trials = f.trials > 0 ? f.trials : a.forecast.trials;
  o.sigma = f.sigma >= 0.0 ? f.sigma : a.forecast.sigma;
  o.feature_seed = seed_given ? derive_seed(seed, {3}) : a.forecast.feature_seed;
  o.mc_seed = seed_given ? derive_seed(seed, {4}) : a.forecast.mc_seed;
  return o;
}

inline void emit_bundle(const forecast::ForecastBundle& b, const ForecastFlags& f, int first, int last,
                        std::vector<std::string> counties) {
  const auto sel = forecast::select(b, first, last, counties);
  auto out = open_out(f.out);
  forecast::write_bundle_csv(out, sel);
  if (!f.json_out.empty()) write_json(f.json_out, forecast::to_json(sel));
}

inline void write_scores(std::ostream& out, const panel::IndicatorPanel& p, const scoring::SustainabilityIndex& idx) {
  std::vector<std::string> header = {"county", "year"};
  for (Eigen::Index k = 0; k < idx.S.cols(); ++k) header.push_back("pillar" + std::to_string(k + 1));
  header.insert(header.end(), {"index_raw", "index_scaled"});
  csv::write_row(out, header);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    std::vector<std::string> f = {p.keys[r].county_name, std::to_string(p.keys[r].year)};
    for (Eigen::Index k = 0; k < idx.S.cols(); ++k) f.push_back(csv::format(idx.S(i, k)));
    f.push_back(csv::format(idx.raw(i)));
    f.push_back(csv::format_fixed(scoring::round1(idx.scaled(i)), 1));
    csv::write_row(out, f);
  }
}

inline void write_loadings(std::ostream& out, const pca::PillarModel& m) {
  std::vector<std::string> header = {"feature"};
  header.insert(header.end(), m.names.begin(), m.names.end());
  csv::write_row(out, header);
  const Matrix w = m.oriented_loadings();
  for (int j = 0; j < m.p(); ++j) {
    std::vector<std::string> f = {m.feature_names[static_cast<std::size_t>(j)]};
    for (int k = 0; k < m.k(); ++k) f.push_back(csv::format(w(j, k)));
    csv::write_row(out, f);
  }
}

inline void write_scree(std::ostream& out, const pca::PillarModel& m) {
  csv::write_row(out, {"component", "eigenvalue", "variance_ratio", "cumulative"});
  const auto rho = pca::variance_ratios(m);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    cum += rho(i);
    csv::write_row(out, {std::to_string(i + 1), csv::format(m.eigenvalues(i)), csv::format(rho(i)), csv::format(cum)});
  }
}

inline json pillar_report(const pca::PillarModel& m, const Matrix& x_sc, const Matrix& raw, int bootstrap,
                          std::uint64_t seed) {
  json j = pca::to_json(m);
  const auto rho = pca::variance_ratios(m);
  j["variance_ratios"] = std::vector<double>(rho.data(), rho.data() + rho.size());
  const Matrix w = m.oriented_loadings();
  j["oriented_loadings"] = nn::matrix_to_json(w);
  if (bootstrap > 0) {
    const auto s = pca::bootstrap_stability(x_sc, m, bootstrap, seed);
    j["bootstrap"] = {{"replicates", bootstrap}, {"mean", s.mean}, {"min", s.min}};
  }
  const auto cos = pca::scaling_robustness(raw, m);
  j["scaling_robustness"] = std::vector<double>(cos.data(), cos.data() + cos.size());
  return j;
}

}  // namespace cli_detail

inline int run_cli(int argc, char** argv) {
  using namespace cli_detail;
  CLI::App app{"herdcast: county sustainability index, spatio-temporal forecasting and scenarios"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "herdcast 1.0");

  // fixture
  Common fx_c;
  panel::FixtureConfig fx;
  std::string fx_out;
  auto* fixture = app.add_subcommand("fixture", "Write a synthetic county-year panel");
  add_common(fixture, fx_c, 7);
  fixture->add_option("--out", fx_out, "Output CSV")->required();
  fixture->add_option("--counties", fx.n_counties, "Number of counties")->capture_default_str();
  fixture->add_option("--first-year", fx.first_year)->capture_default_str();
  fixture->add_option("--last-year", fx.last_year)->capture_default_str();
  fixture->add_option("--rank", fx.latent_rank, "Latent rank")->capture_default_str();
  fixture->add_option("--noise", fx.noise, "Noise amplitude relative to feature spread")->capture_default_str();

  // ingest
  Common in_c;
  std::string in_input, in_out, in_report;
  auto* ingest = app.add_subcommand("ingest", "Validate and clean a raw panel CSV");
  add_common(ingest, in_c);
  ingest->add_option("--input", in_input)->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", in_out, "Cleaned panel CSV")->required();
  ingest->add_option("--report", in_report, "Cleaning report JSON");

  // augment
  Common au_c;
  std::string au_input, au_out, au_model, au_report;
  int au_k = 4;
  vae::VaeConfig au_cfg;
  au_cfg.beta = 1.0;
  auto* augment = app.add_subcommand("augment", "Train the VAE and write a conditionally augmented panel");
  add_common(augment, au_c);
  augment->add_option("--input", au_input)->required()->check(CLI::ExistingFile);
  augment->add_option("--out", au_out, "Augmented CSV with provenance column")->required();
  augment->add_option("--model", au_model, "VAE parameters JSON");
  augment->add_option("--report", au_report, "Synthetic-data validation JSON");
  augment->add_option("--replicates", au_k, "Replicates K per real row")->capture_default_str();
  augment->add_option("--epochs", au_cfg.epochs)->capture_default_str();
  augment->add_option("--latent", au_cfg.latent_dim)->capture_default_str();
  augment->add_option("--beta", au_cfg.beta)->capture_default_str();
  augment->add_option("--lr", au_cfg.learning_rate)->capture_default_str();
  augment->add_option("--batch", au_cfg.batch_size)->capture_default_str();
  augment->add_option("--val-frac", au_cfg.validation_fraction)->capture_default_str();

  // pillars
  Common pi_c;
  std::string pi_input, pi_out, pi_loadings, pi_scree;
  int pi_k = 4, pi_boot = 0;
  double pi_pct = 75.0;
  auto* pillars = app.add_subcommand("pillars", "Fit PCA pillars");
  add_common(pillars, pi_c);
  pillars->add_option("--input", pi_input)->required()->check(CLI::ExistingFile);
  pillars->add_option("--out", pi_out, "Pillar model JSON")->required();
  pillars->add_option("--loadings", pi_loadings, "Oriented loadings CSV (feature x pillar)");
  pillars->add_option("--scree", pi_scree, "Scree CSV");
  pillars->add_option("--components", pi_k)->capture_default_str();
  pillars->add_option("--percentile", pi_pct, "Dominant-loading percentile")->capture_default_str();
  pillars->add_option("--bootstrap", pi_boot, "Bootstrap replicates")->capture_default_str();

  // score
  Common sc_c;
  std::string sc_input, sc_out, sc_report, sc_agg = "equal";
  scoring::ScoreConfig sc_cfg;
  bool sc_raw_pillars = false;
  auto* score = app.add_subcommand("score", "Compute pillar scores and the composite index");
  add_common(score, sc_c);
  score->add_option("--input", sc_input)->required()->check(CLI::ExistingFile);
  score->add_option("--out", sc_out, "Score table CSV")->required();
  score->add_option("--report", sc_report, "Robustness report JSON");
  score->add_option("--components", sc_cfg.components)->capture_default_str();
  score->add_option("--percentile", sc_cfg.percentile)->capture_default_str();
  score->add_option("--aggregation", sc_agg, "equal | eigenvalue")->capture_default_str();
  score->add_flag("--unstandardized-pillars", sc_raw_pillars, "Average pillar scores without restandardizing");
  score->add_option("--lo", sc_cfg.lo)->capture_default_str();
  score->add_option("--hi", sc_cfg.hi)->capture_default_str();

  // graph
  Common gr_c;
  std::string gr_centroids = default_centroids(), gr_input, gr_out, gr_edges;
  int gr_k = 3;
  auto* graph = app.add_subcommand("graph", "Build the kNN county graph");
  add_common(graph, gr_c);
  graph->add_option("--centroids", gr_centroids)->capture_default_str()->check(CLI::ExistingFile);
  graph->add_option("--input", gr_input, "Panel whose counties select and order the nodes")->check(CLI::ExistingFile);
  graph->add_option("--out", gr_out, "Adjacency JSON")->required();
  graph->add_option("--edges", gr_edges, "Edge list CSV");
  graph->add_option("--k", gr_k)->capture_default_str();

  // train
  Common tr_c;
  std::string tr_input, tr_centroids = default_centroids(), tr_aug, tr_out, tr_log, tr_agg = "equal";
  PipelineConfig tr_cfg;
  bool tr_raw_pillars = false;
  auto* train = app.add_subcommand("train", "Score the panel, build the graph, train the STGNN and write the artifact");
  add_common(train, tr_c);
  train->add_option("--input", tr_input)->required()->check(CLI::ExistingFile);
  train->add_option("--centroids", tr_centroids)->capture_default_str()->check(CLI::ExistingFile);
  train->add_option("--augmented", tr_aug, "Augmented CSV from `augment`")->check(CLI::ExistingFile);
  train->add_option("--out", tr_out, "Artifact JSON")->required();
  train->add_option("--log", tr_log, "Epoch log CSV");
  train->add_option("--epochs", tr_cfg.epochs)->capture_default_str();
  train->add_option("--lr", tr_cfg.learning_rate)->capture_default_str();
  train->add_option("--lambda", tr_cfg.lambda)->capture_default_str();
  train->add_option("--dropout", tr_cfg.model.dropout)->capture_default_str();
  train->add_option("--window", tr_cfg.model.window)->capture_default_str();
  train->add_option("--k", tr_cfg.k)->capture_default_str();
  train->add_option("--components", tr_cfg.score.components)->capture_default_str();
  train->add_option("--aggregation", tr_agg)->capture_default_str();
  train->add_flag("--unstandardized-pillars", tr_raw_pillars);
  train->add_option("--last-year", tr_cfg.forecast.last_year, "Default forecast horizon end")->capture_default_str();
  train->add_option("--mc-trials", tr_cfg.forecast.trials)->capture_default_str();
  train->add_option("--mc-sigma", tr_cfg.forecast.sigma)->capture_default_str();
  train->add_option("--sigma-feat", tr_cfg.forecast.sigma_feat)->capture_default_str();

  // evaluate
  Common ev_c;
  std::string ev_artifact, ev_out, ev_aug;
  EvaluateOptions ev_opt;
  auto* evaluate = app.add_subcommand("evaluate", "Report STGNN metrics, FFNN/GKR baselines and augmentation utility");
  add_common(evaluate, ev_c);
  evaluate->add_option("--artifact", ev_artifact)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev_out, "Metrics JSON")->required();
  evaluate->add_option("--augmented", ev_aug, "Augmented CSV; enables the utility comparison")->check(CLI::ExistingFile);
  evaluate->add_option("--ffnn-epochs", ev_opt.ffnn.epochs)->capture_default_str();

  // forecast / mc / scenario
  Common fc_c, mc_c, sn_c;
  ForecastFlags fc_f, mc_f, sn_f;
  auto* fcast = app.add_subcommand("forecast", "Baseline forecast with Monte Carlo band");
  add_common(fcast, fc_c);
  add_forecast_flags(fcast, fc_f, false);
  auto* mc = app.add_subcommand("mc", "Monte Carlo band around the baseline forecast");
  add_common(mc, mc_c);
  add_forecast_flags(mc, mc_f, true);
  std::string sn_file;
  bool sn_zero = false;
  auto* scen = app.add_subcommand("scenario", "Counterfactual scenario against the baseline");
  add_common(scen, sn_c);
  add_forecast_flags(scen, sn_f, true);
  scen->add_option("--file", sn_file, "ScenarioSpec JSON")->required()->check(CLI::ExistingFile);
  scen->add_flag("--zero-deltas", sn_zero, "Replace every delta with 0 (identity check)");

  // plotdata
  Common pd_c;
  std::string pd_artifact, pd_heatmap, pd_loadings, pd_scree, pd_series;
  auto* plotdata = app.add_subcommand("plotdata", "Export chart-ready CSVs from an artifact");
  add_common(plotdata, pd_c);
  plotdata->add_option("--artifact", pd_artifact)->required()->check(CLI::ExistingFile);
  plotdata->add_option("--heatmap", pd_heatmap, "County x year scaled scores CSV");
  plotdata->add_option("--loadings", pd_loadings, "Feature x pillar loadings CSV");
  plotdata->add_option("--scree", pd_scree, "Scree CSV");
  plotdata->add_option("--series", pd_series, "History + forecast series CSV");

  // serve
  Common sv_c;
  std::string sv_artifact, sv_host = "0.0.0.0";
  int sv_port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API over an artifact");
  add_common(serve, sv_c);
  serve->add_option("--artifact", sv_artifact)->envname("HERDCAST_ARTIFACT")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", sv_port)->envname("HERDCAST_PORT")->capture_default_str();
  serve->add_option("--host", sv_host)->envname("HERDCAST_HOST")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fixture) {
      fx.seed = fx_c.seed;
      const auto p = panel::generate_fixture(fx, schema_with(fx_c.orient));
      auto out = open_out(fx_out);
      panel::write_panel(out, p);
      std::cout << "wrote " << p.rows() << " rows to " << fx_out << "\n";
    } else if (*ingest) {
      const auto r = panel::load_panel(in_input, schema_with(in_c.orient));
      auto out = open_out(in_out);
      panel::write_panel(out, r.panel);
      if (!in_report.empty())
        write_json(in_report, {{"rows_read", r.report.rows_read},
                               {"rows_removed_impossible", r.report.rows_removed_impossible},
                               {"rows_imputed", r.report.rows_imputed},
                               {"values_interpolated", r.report.values_interpolated},
                               {"counties_rejected", r.report.counties_rejected},
                               {"rows_out", r.panel.rows()}});
      std::cout << "kept " << r.panel.rows() << " rows (" << r.report.rows_removed_impossible << " removed)\n";
    } else if (*augment) {
      const auto real = panel::load_panel(au_input, schema_with(au_c.orient)).panel;
      au_cfg.seed = au_c.seed;
      const auto a = run_augment(real, au_cfg, au_k);
      auto out = open_out(au_out);
      write_augmented(out, real, a);
      if (!au_model.empty()) write_json(au_model, vae::to_json(a.params));
      if (!au_report.empty()) write_json(au_report, a.validation);
      std::cout << "rows: " << a.set.real_rows << " real + " << a.set.synthetic.rows() << " synthetic = " << a.set.total_rows()
                << "\n";
    } else if (*pillars) {
      const auto p = panel::load_panel(pi_input, schema_with(pi_c.orient)).panel;
      const auto st = panel::standardize(p);
      const auto m = pca::fit_pillars(st.values, pi_k, p.feature_names, p.orientation, pi_pct);
      write_json(pi_out, pillar_report(m, st.values, p.values, pi_boot, pi_c.seed));
      if (!pi_loadings.empty()) {
        auto o = open_out(pi_loadings);
        write_loadings(o, m);
      }
      if (!pi_scree.empty()) {
        auto o = open_out(pi_scree);
        write_scree(o, m);
      }
    } else if (*score) {
      const auto p = panel::load_panel(sc_input, schema_with(sc_c.orient)).panel;
      sc_cfg.aggregation = scoring::aggregation_from_string(sc_agg);
      sc_cfg.standardize_pillars = !sc_raw_pillars;
      const auto fit = scoring::fit_score_model(p, sc_cfg);
      auto out = open_out(sc_out);
      write_scores(out, p, fit.index);
      if (!sc_report.empty()) {
        json rep;
        json variants = json::array();
        for (const auto& v : scoring::weight_variants_report(fit.x_sc, fit.model.pillars, sc_cfg.standardize_pillars, sc_cfg.lo, sc_cfg.hi))
          variants.push_back({{"variant", v.variant}, {"spearman", v.agreement.spearman}, {"kendall", v.agreement.kendall}});
        rep["weight_variants"] = variants;
        const auto stab = scoring::stability_stats(p.keys, fit.index.scaled);
        json counties = json::array(), pairs = json::array();
        for (const auto& c : stab.counties) counties.push_back({{"county", c.county}, {"mean", c.mean}, {"std", c.std}});
        for (const auto& y : stab.year_pairs) pairs.push_back({{"years", {y.year_a, y.year_b}}, {"spearman", y.spearman}});
        rep["stability"] = {{"counties", counties}, {"year_pairs", pairs}};
        const auto ols = scoring::regress_index_on_pillars(fit.index.raw, fit.index.S);
        rep["ols"] = {{"coefficients", stats::to_vector(ols.coefficients)}, {"residual_variance", ols.residual_variance}};
        const auto sens = fit.model.sensitivity();
        json sj = json::object();
        for (std::size_t j = 0; j < p.feature_names.size(); ++j) sj[p.feature_names[j]] = sens(static_cast<Eigen::Index>(j));
        rep["sensitivity"] = sj;
        const auto corr = pca::pillar_index_correlation(fit.index.S, fit.index.raw);
        rep["pillar_index_correlation"] = stats::to_vector(corr);
        rep["aggregation"] = scoring::to_string(sc_cfg.aggregation);
        write_json(sc_report, rep);
      }
    } else if (*graph) {
      auto c = geo::load_centroids(gr_centroids);
      if (!gr_input.empty()) c = c.aligned_to(panel::load_panel(gr_input, schema_with(gr_c.orient)).panel.county_names());
      const auto g = geo::knn_graph(c, gr_k);
      const auto rep = geo::connectivity_report(g);
      json j = geo::to_json(g, &c);
      j["components"] = rep.components;
      j["degrees"] = rep.degrees;
      json margins = json::array();
      for (double m : rep.margins) margins.push_back(std::isfinite(m) ? json(m) : json(nullptr));
      j["margins_km"] = margins;
      j["components_by_k"] = geo::component_curve(g.distances, std::min<int>(8, static_cast<int>(g.nodes()) - 1));
      write_json(gr_out, j);
      if (!gr_edges.empty()) {
        auto o = open_out(gr_edges);
        geo::write_edge_csv(o, g);
      }
    } else if (*train) {
      const auto p = panel::load_panel(tr_input, schema_with(tr_c.orient)).panel;
      const auto c = geo::load_centroids(tr_centroids);
      std::vector<panel::IndicatorPanel> aug;
      if (!tr_aug.empty()) aug = read_augmented(tr_aug, p);
      tr_cfg.seed = tr_c.seed;
      tr_cfg.score.aggregation = scoring::aggregation_from_string(tr_agg);
      tr_cfg.score.standardize_pillars = !tr_raw_pillars;
      auto res = train_project(p, c, aug, tr_cfg);
      save_artifact(tr_out, res.artifact);
      if (!tr_log.empty()) {
        auto o = open_out(tr_log);
        stgnn::write_epoch_log(o, res.log);
      }
      const auto& m = res.artifact.training.metrics;
      std::cout << "train R2 " << m.train.r2 << ", validation R2 " << m.val.r2 << ", test R2 " << m.test.r2
                << " (best epoch " << res.artifact.training.best_epoch << ")\n";
    } else if (*evaluate) {
      const auto a = load_artifact(ev_artifact);
      std::vector<panel::IndicatorPanel> aug;
      if (!ev_aug.empty()) {
        aug = read_augmented(ev_aug, history_panel(a));
        ev_opt.utility = true;
      }
      ev_opt.ffnn.seed = ev_c.seed;
      write_json(ev_out, evaluate_project(a, aug, ev_opt));
    } else if (*fcast || *mc) {
      const auto& f = *fcast ? fc_f : mc_f;
      auto* sub = *fcast ? fcast : mc;
      const auto& cmn = *fcast ? fc_c : mc_c;
      const auto a = load_artifact(f.artifact);
      const bool seed_given = sub->count("--seed") > 0;
      const auto opt = options_for(a, f, seed_given, cmn.seed, 0);
      auto b = forecast::make_bundle(a.forecast_inputs(), forecast::ScenarioSpec{}, opt, a.hash);
      emit_bundle(b, f, a.years.back() + 1, opt.last_year, f.counties);
    } else if (*scen) {
      const auto a = load_artifact(sn_f.artifact);
      auto spec = forecast::load_scenario(sn_file);
      if (sn_zero) spec = spec.zeroed();
      const bool seed_given = scen->count("--seed") > 0;
      const auto opt = options_for(a, sn_f, seed_given, sn_c.seed, spec.horizon_end);
      const auto b = forecast::make_bundle(a.forecast_inputs(), spec, opt, a.hash);
      const int first = std::max(spec.horizon_start, a.years.back() + 1);
      emit_bundle(b, sn_f, first, std::min(spec.horizon_end, opt.last_year), sn_f.counties);
      for (const auto& [county, deltas] : spec.deltas) {
        const auto it = std::find(b.counties.begin(), b.counties.end(), county);
        std::cout << county << " cumulative uplift " << b.cumulative_uplift(it - b.counties.begin()) << "\n";
      }
    } else if (*plotdata) {
      const auto a = load_artifact(pd_artifact);
      if (!pd_heatmap.empty()) {
        auto o = open_out(pd_heatmap);
        std::vector<std::string> h = {"county"};
        for (int y : a.years) h.push_back(std::to_string(y));
        csv::write_row(o, h);
        for (std::size_t c = 0; c < a.counties.size(); ++c) {
          std::vector<std::string> row = {a.counties[c]};
          for (Eigen::Index t = 0; t < a.scores.cols(); ++t)
            row.push_back(csv::format_fixed(scoring::round1(a.scores(static_cast<Eigen::Index>(c), t)), 1));
          csv::write_row(o, row);
        }
      }
      if (!pd_loadings.empty()) {
        auto o = open_out(pd_loadings);
        write_loadings(o, a.score.pillars);
      }
      if (!pd_scree.empty()) {
        auto o = open_out(pd_scree);
        write_scree(o, a.score.pillars);
      }
      if (!pd_series.empty()) {
        const auto b = default_forecast(a, forecast::ScenarioSpec{});
        auto o = open_out(pd_series);
        csv::write_row(o, {"county", "year", "kind", "score", "q05", "q95"});
        for (std::size_t c = 0; c < a.counties.size(); ++c) {
          const auto i = static_cast<Eigen::Index>(c);
          for (std::size_t t = 0; t < a.years.size(); ++t)
            csv::write_row(o, {a.counties[c], std::to_string(a.years[t]), "history",
                               csv::format(a.scores(i, static_cast<Eigen::Index>(t))), "", ""});
          for (std::size_t t = 0; t < b.years.size(); ++t) {
            const auto j = static_cast<Eigen::Index>(t);
            csv::write_row(o, {a.counties[c], std::to_string(b.years[t]), "forecast", csv::format(b.baseline(i, j)),
                               csv::format(b.q05(i, j)), csv::format(b.q95(i, j))});
          }
        }
      }
    } else if (*serve) {
      Service service(load_artifact(sv_artifact));
      httplib::Server server;
      mount(server, service);
      std::cout << "serving " << sv_artifact << " on " << sv_host << ":" << sv_port << "\n" << std::flush;
      if (!server.listen(sv_host, sv_port)) throw Error("cannot listen on " + sv_host + ":" + std::to_string(sv_port));
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace herdcast::app
