// salmix command line: fit | simulate | study | evaluate | compare
//
// Exit codes: 0 ok, 1 differences (compare), 2 usage, 3 data error,
// 4 fit failure, 5 non-convergence (results still written).

#include <CLI11.hpp>
#include <iostream>

#include "salmix/salmix.hpp"

namespace {

using namespace salmix;

constexpr int kExitOk = 0;
constexpr int kExitDiff = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitFit = 4;
constexpr int kExitNoConverge = 5;

struct CommonData {
  std::string path;
  std::string delimiter = ",";
  bool no_header = false;
  std::string label_column;

  Dataset load() const {
    LoadOptions opt;
    if (delimiter.size() != 1) throw ConfigError("--delimiter must be one character");
    opt.delimiter = delimiter[0];
    opt.header = !no_header;
    opt.label_column = label_column;
    return load_csv(path, opt);
  }
};

struct FitArgs {
  CommonData data;
  std::string engine = "gibbs";
  std::string g_range = "1:3";
  std::uint64_t seed = 20240401;
  bool standardize_flag = false;
  std::string out_dir = "salmix_out";
  std::string rho = "full";
  bool no_extend = false;
  int grid = 0;
  int thin = 0;
  // EM knobs
  int max_iters = 1000;
  double aitken_eps = 0.01;
  double setback_threshold = 1e-6;
  int restarts = 10;
  // Gibbs knobs
  int chains = 3;
  int min_sweeps = 400;
  int max_sweeps = 10000;
  double psrf_threshold = 1.1;
  double burn_in = 0.5;
  int retained = 500;
  double guard_eps = 1e-6;
  int max_resample = 100;
  // prior overrides (paper-unit hyperparameters; defaults are data-adapted)
  double prior_a0 = 0.0;
  double prior_a3 = 0.0;
  double prior_a4 = 0.0;
  double prior_a5_scale = 1.0;
  double prior_dirichlet = 1.0;
};

std::vector<int> parse_g_range(const std::string& s) {
  const auto colon = s.find(':');
  int lo = 0, hi = 0;
  try {
    if (colon == std::string::npos) {
      lo = hi = std::stoi(s);
    } else {
      lo = std::stoi(s.substr(0, colon));
      hi = std::stoi(s.substr(colon + 1));
    }
  } catch (const std::exception&) {
    throw ConfigError("--g-range expects G or LO:HI");
  }
  if (lo < 1 || hi < lo) throw ConfigError("--g-range requires 1 <= LO <= HI");
  std::vector<int> r;
  for (int g = lo; g <= hi; ++g) r.push_back(g);
  return r;
}

FitOptions to_fit_options(const FitArgs& a, const Mat& data, int g_for_prior) {
  FitOptions fo;
  fo.seed = a.seed;
  fo.rho = (a.rho == "paper") ? RhoConvention::Paper : RhoConvention::FullCovariance;
  fo.extend_on_boundary = !a.no_extend;
  fo.em_config.max_iters = a.max_iters;
  fo.em_config.aitken_eps = a.aitken_eps;
  fo.em_config.setback_threshold = a.setback_threshold;
  fo.em_config.restarts_on_failure = a.restarts;
  fo.gibbs_config.n_chains = a.chains;
  fo.gibbs_config.min_sweeps = a.min_sweeps;
  fo.gibbs_config.max_sweeps = a.max_sweeps;
  fo.gibbs_config.psrf_threshold = a.psrf_threshold;
  fo.gibbs_config.burn_in_fraction = a.burn_in;
  fo.gibbs_config.n_retained = a.retained;
  fo.gibbs_config.guard_eps = a.guard_eps;
  fo.gibbs_config.max_resample = a.max_resample;
  if (a.prior_a0 > 0.0 || a.prior_a3 > 0.0 || a.prior_a4 > 0.0 || a.prior_a5_scale != 1.0 ||
      a.prior_dirichlet != 1.0) {
    PriorHyper prior = PriorHyper::weakly_informative(data, g_for_prior);
    if (a.prior_a0 > 0.0) prior.a0 = a.prior_a0;
    if (a.prior_a3 > 0.0) prior.a3 = a.prior_a3;
    if (a.prior_a4 > 0.0) prior.a4 = a.prior_a4;
    prior.a5 *= a.prior_a5_scale;
    prior.dirichlet = Vec::Constant(g_for_prior, a.prior_dirichlet);
    fo.prior = prior;
  }
  return fo;
}

json echo_config(const std::string& command, const json& resolved) {
  json echo = {{"command", command}, {"resolved", resolved}};
  std::cout << echo.dump(2) << std::endl;
  return echo;
}

json fit_args_json(const FitArgs& a) {
  return {{"data", a.data.path},
          {"delimiter", a.data.delimiter},
          {"header", !a.data.no_header},
          {"label_column", a.data.label_column},
          {"engine", a.engine},
          {"g_range", a.g_range},
          {"seed", a.seed},
          {"standardize", a.standardize_flag},
          {"out", a.out_dir},
          {"rho", a.rho},
          {"extend_on_boundary", !a.no_extend},
          {"grid", a.grid},
          {"thin", a.thin},
          {"em",
           {{"max_iters", a.max_iters},
            {"aitken_eps", a.aitken_eps},
            {"setback_threshold", a.setback_threshold},
            {"restarts_on_failure", a.restarts}}},
          {"gibbs",
           {{"chains", a.chains},
            {"min_sweeps", a.min_sweeps},
            {"max_sweeps", a.max_sweeps},
            {"psrf_threshold", a.psrf_threshold},
            {"burn_in", a.burn_in},
            {"retained", a.retained},
            {"guard_eps", a.guard_eps},
            {"max_resample", a.max_resample}}},
          {"prior",
           {{"a0", a.prior_a0},
            {"a3", a.prior_a3},
            {"a4", a.prior_a4},
            {"a5_scale", a.prior_a5_scale},
            {"dirichlet", a.prior_dirichlet}}}};
}

int run_fit(const FitArgs& args) {
  const json config = echo_config("fit", fit_args_json(args));
  Dataset raw = args.data.load();
  Dataset working = raw;
  std::optional<StandardizeRecord> rec;
  if (args.standardize_flag) {
    auto [std_data, record] = standardize(raw);
    working = std::move(std_data);
    rec = std::move(record);
  }
  const auto g_range = parse_g_range(args.g_range);
  const Engine engine = (args.engine == "em") ? Engine::Em : Engine::Gibbs;
  const FitOptions fo = to_fit_options(args, working.values, g_range.back());

  SelectionResult sel = fit_over_range(working.values, engine, g_range, fo);
  if (sel.fits.empty()) {
    std::cerr << "all fits failed";
    for (const auto& [g, why] : sel.failures) std::cerr << "\n  g=" << g << ": " << why;
    std::cerr << std::endl;
    return kExitFit;
  }

  json fits = json::array();
  bool any_unconverged = false;
  for (const auto& f : sel.fits) {
    json jf = {{"engine", engine_name(f.engine)},
               {"g", f.g},
               {"loglik", f.loglik},
               {"rho", f.score.n_free_params},
               {"bic", f.score.bic},
               {"icl", f.score.icl},
               {"converged", f.converged},
               {"wall_seconds", f.wall_seconds},
               {"params", params_to_json(f.params)},
               {"map_labels", f.map_labels}};
    if (rec) jf["params_original_scale"] = params_to_json(destandardize_params(f.params, *rec));
    if (f.gibbs) {
      jf["gibbs"] = {{"psrf", f.gibbs->psrf_report.rhat},
                     {"total_sweeps", f.gibbs->total_sweeps},
                     {"summary", summary_to_json(f.gibbs->summary)},
                     {"retained", f.gibbs->retained.size()}};
      if (args.thin > 0) {
        json traces = json::array();
        for (const auto& chain : f.gibbs->chains)
          traces.push_back(thin_trace(chain.loglik_trace, args.thin));
        jf["gibbs"]["loglik_traces_thinned"] = traces;
      }
    }
    if (f.em) {
      jf["em"] = {{"iterations", f.em->loglik_trace.size()},
                  {"restarts_used", f.em->restarts_used},
                  {"setback_engaged", f.em->setback_engaged}};
    }
    any_unconverged = any_unconverged || !f.converged;
    fits.push_back(std::move(jf));
  }

  json results = {{"kind", "fit_results"},
                  {"dataset", {{"name", raw.name}, {"n", raw.n()}, {"p", raw.p()}}},
                  {"config", config},
                  {"standardized", args.standardize_flag},
                  {"best_bic_g", sel.best_bic_g},
                  {"best_icl_g", sel.best_icl_g},
                  {"fits", fits}};
  if (rec) {
    results["standardize_record"] = {
        {"mean", std::vector<double>(rec->mean.data(), rec->mean.data() + rec->mean.size())},
        {"sd", std::vector<double>(rec->sd.data(), rec->sd.data() + rec->sd.size())}};
  }
  if (!raw.labels.empty()) results["true_labels"] = raw.labels;
  json failures = json::array();
  for (const auto& [g, why] : sel.failures) failures.push_back({{"g", g}, {"reason", why}});
  results["failures"] = failures;

  const std::string results_path = args.out_dir + "/results.json";
  save_results(results_path, results);
  std::cout << "wrote " << results_path << std::endl;

  if (args.grid > 1 && working.p() == 2) {
    for (const char* which : {"bic", "icl"}) {
      const int g = (std::string(which) == "bic") ? sel.best_bic_g : sel.best_icl_g;
      const auto& f = sel.by_g(g);
      const Vec lo = working.values.colwise().minCoeff();
      const Vec hi = working.values.colwise().maxCoeff();
      const Vec pad = 0.15 * (hi - lo);
      write_density_grid(args.out_dir + "/grid_" + which + ".tsv", f.params, lo[0] - pad[0],
                         hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1], args.grid, args.grid);
    }
    std::cout << "wrote density grids" << std::endl;
  }
  return any_unconverged ? kExitNoConverge : kExitOk;
}

int run_simulate(int scenario, const std::string& params_path, int n, std::uint64_t seed,
                 const std::string& out) {
  json resolved = {{"scenario", scenario}, {"params", params_path}, {"n", n},
                   {"seed", seed},        {"out", out}};
  echo_config("simulate", resolved);
  std::optional<MixtureParams> truth;
  std::string name = "custom";
  if (!params_path.empty()) {
    truth = params_from_json(load_results(params_path).at("params"));
  } else {
    ScenarioSpec spec = builtin_scenario(scenario);
    truth = spec.truth;
    name = spec.name;
  }
  Rng rng(seed);
  auto [data, labels] = rmsal(*truth, n, rng);
  Dataset d;
  d.name = name;
  for (Eigen::Index j = 0; j < data.cols(); ++j) d.columns.push_back("x" + std::to_string(j + 1));
  d.values = std::move(data);
  for (int l : labels) d.labels.push_back(std::to_string(l + 1));
  write_csv(out, d, "component");
  std::cout << "wrote " << out << std::endl;
  return kExitOk;
}

int run_study(int scenario, const std::string& params_path, int n_datasets, int n_per_dataset,
              const std::string& engines, const std::string& g_range, std::uint64_t seed,
              int threads, int max_sweeps, const std::string& out) {
  json resolved = {{"scenario", scenario},     {"params", params_path},
                   {"n_datasets", n_datasets}, {"n_per_dataset", n_per_dataset},
                   {"engines", engines},       {"g_range", g_range},
                   {"seed", seed},             {"threads", threads},
                   {"max_sweeps", max_sweeps}, {"out", out}};
  echo_config("study", resolved);
  ScenarioSpec spec =
      params_path.empty()
          ? builtin_scenario(scenario)
          : ScenarioSpec{"custom", params_from_json(load_results(params_path).at("params")), 500,
                         100, seed};
  spec.n_datasets = n_datasets;
  spec.n_per_dataset = n_per_dataset;
  spec.seed = seed;
  StudyOptions opt;
  opt.run_em = engines == "both" || engines == "em";
  opt.run_gibbs = engines == "both" || engines == "gibbs";
  opt.g_range = parse_g_range(g_range);
  opt.n_threads = threads;
  opt.fit.gibbs_config.max_sweeps = max_sweeps;
  opt.fit.seed = seed;
  const StudyReport report = run_study(spec, opt);

  auto agg_json = [](const StudyAggregates& a) {
    return json{{"n_ok", a.n_ok},
                {"mean_ari_bic", a.mean_ari_bic},
                {"sd_ari_bic", a.sd_ari_bic},
                {"mean_ari_icl", a.mean_ari_icl},
                {"sd_ari_icl", a.sd_ari_icl},
                {"correct_g_bic", a.correct_g_bic},
                {"correct_g_icl", a.correct_g_icl},
                {"mean_wall_seconds", a.mean_wall_seconds},
                {"recovery_mean", a.recovery_mean},
                {"recovery_sd", a.recovery_sd}};
  };
  json per_dataset = json::array();
  for (const auto& r : report.per_dataset) {
    auto sel_json = [](const EngineSelection& s) {
      return json{{"ok", s.ok},
                  {"failure", s.failure},
                  {"g_bic", s.selected_g_bic},
                  {"g_icl", s.selected_g_icl},
                  {"ari_bic", s.ari_bic},
                  {"ari_icl", s.ari_icl},
                  {"wall_seconds", s.wall_seconds}};
    };
    per_dataset.push_back({{"em", sel_json(r.em)}, {"gibbs", sel_json(r.gibbs)}});
  }
  json j = {{"kind", "study_report"},
            {"scenario", report.scenario},
            {"truth", params_to_json(report.truth)},
            {"n_datasets", report.n_datasets},
            {"n_per_dataset", report.n_per_dataset},
            {"seed", report.seed},
            {"g_range", report.g_range},
            {"recovery_names", report.recovery_names},
            {"em", agg_json(report.em)},
            {"gibbs", agg_json(report.gibbs)},
            {"per_dataset", per_dataset}};
  save_results(out, j);
  std::cout << "wrote " << out << std::endl;
  return kExitOk;
}

int run_evaluate(const std::string& results_path, const CommonData& labels_args,
                 const std::string& which, const std::string& out) {
  echo_config("evaluate", {{"results", results_path},
                           {"labels", labels_args.path},
                           {"label_column", labels_args.label_column},
                           {"selector", which},
                           {"out", out}});
  const json results = load_results(results_path);
  const int g = (which == "icl") ? results.at("best_icl_g").get<int>()
                                 : results.at("best_bic_g").get<int>();
  std::vector<int> map_labels;
  for (const auto& f : results.at("fits"))
    if (f.at("g").get<int>() == g) map_labels = f.at("map_labels").get<std::vector<int>>();
  if (map_labels.empty()) throw Error("results file has no fit for the selected g");

  std::vector<std::string> truth;
  if (!labels_args.label_column.empty()) {
    Dataset d = labels_args.load();
    truth = d.labels;
  } else {
    std::ifstream in(labels_args.path);
    if (!in) throw ParseError("cannot open '" + labels_args.path + "'");
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
      if (!line.empty()) truth.push_back(line);
    }
  }
  if (truth.size() != map_labels.size())
    throw ShapeError("labels length " + std::to_string(truth.size()) +
                     " != predictions length " + std::to_string(map_labels.size()));

  const auto rep = classification_report(truth, map_labels);
  json jt = json::array();
  std::cout << "cross-tab (rows: true, cols: predicted)\n";
  for (Eigen::Index i = 0; i < rep.table.rows(); ++i) {
    json row = json::array();
    std::cout << "  " << rep.true_classes[i] << ":";
    for (Eigen::Index j = 0; j < rep.table.cols(); ++j) {
      std::cout << " " << rep.table(i, j);
      row.push_back(rep.table(i, j));
    }
    std::cout << "\n";
    jt.push_back(row);
  }
  std::cout << "ARI = " << rep.ari << "\nhit rate = " << rep.hit_rate << std::endl;
  if (!out.empty())
    save_results(out, json{{"kind", "evaluation"},
                           {"results", results_path},
                           {"g", g},
                           {"ari", rep.ari},
                           {"hit_rate", rep.hit_rate},
                           {"true_classes", rep.true_classes},
                           {"predicted_classes", rep.predicted_classes},
                           {"table", jt}});
  return kExitOk;
}

int run_compare(const std::string& a_path, const std::string& b_path, double tol) {
  echo_config("compare", {{"a", a_path}, {"b", b_path}, {"tol", tol}});
  const json a = load_results(a_path);
  const json b = load_results(b_path);
  bool same = true;
  auto check = [&](const std::string& what, double va, double vb, double tolerance) {
    const double diff = std::abs(va - vb);
    std::cout << what << ": " << va << " vs " << vb << " (|diff| = " << diff
              << (diff <= tolerance ? ")" : ") EXCEEDS tolerance") << "\n";
    same = same && diff <= tolerance;
  };
  check("best_bic_g", a.at("best_bic_g").get<int>(), b.at("best_bic_g").get<int>(), 0.0);
  check("best_icl_g", a.at("best_icl_g").get<int>(), b.at("best_icl_g").get<int>(), 0.0);

  auto fit_for = [](const json& r, int g) -> const json& {
    for (const auto& f : r.at("fits"))
      if (f.at("g").get<int>() == g) return f;
    throw Error("missing fit for g = " + std::to_string(g));
  };
  const int ga = a.at("best_bic_g").get<int>();
  if (ga == b.at("best_bic_g").get<int>()) {
    const json& fa = fit_for(a, ga);
    const json& fb = fit_for(b, ga);
    check("loglik", fa.at("loglik").get<double>(), fb.at("loglik").get<double>(),
          tol * std::max(1.0, std::abs(fa.at("loglik").get<double>())));
    check("bic", fa.at("bic").get<double>(), fb.at("bic").get<double>(),
          tol * std::max(1.0, std::abs(fa.at("bic").get<double>())));
    const auto la = fa.at("map_labels").get<std::vector<int>>();
    const auto lb = fb.at("map_labels").get<std::vector<int>>();
    if (la.size() == lb.size()) {
      const double label_ari = ari(la, lb);
      std::cout << "label agreement ARI = " << label_ari << "\n";
      same = same && label_ari > 1.0 - tol;
    } else {
      std::cout << "label lengths differ\n";
      same = false;
    }
    // per-parameter estimates of the matched fit
    const auto pa = params_from_json(fa.at("params"));
    const auto pb = params_from_json(fb.at("params"));
    const auto va = detail::flatten_params(detail::match_to_truth(pa, pb));
    const auto vb = detail::flatten_params(pb);
    double worst = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) worst = std::max(worst, std::abs(va[i] - vb[i]));
    std::cout << "max parameter difference = " << worst << "\n";
    same = same && worst <= tol * 10.0;
  }
  std::cout << (same ? "results agree within tolerance" : "results differ") << std::endl;
  return same ? kExitOk : kExitDiff;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"salmix: mixtures of shifted asymmetric Laplace distributions "
               "(conjugate Gibbs sampler and EM with the set-back safeguard)"};
  app.name("salmix");
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "fit a mixture to a CSV dataset");
  fit_cmd->add_option("data", fit_args.data.path, "input CSV file")->required();
  fit_cmd->add_option("--engine", fit_args.engine, "estimation engine")
      ->check(CLI::IsMember({"gibbs", "em"}))
      ->capture_default_str();
  fit_cmd->add_option("--g-range", fit_args.g_range, "component counts to fit, G or LO:HI")
      ->capture_default_str();
  fit_cmd->add_option("--seed", fit_args.seed, "master seed")->capture_default_str();
  fit_cmd->add_flag("--standardize", fit_args.standardize_flag,
                    "z-score the columns before fitting");
  fit_cmd->add_option("--out", fit_args.out_dir, "output directory")->capture_default_str();
  fit_cmd->add_option("--delimiter", fit_args.data.delimiter, "CSV delimiter")
      ->capture_default_str();
  fit_cmd->add_flag("--no-header", fit_args.data.no_header, "data file has no header row");
  fit_cmd->add_option("--label-column", fit_args.data.label_column,
                      "column holding true labels (excluded from fitting)");
  fit_cmd->add_option("--rho", fit_args.rho, "free-parameter count convention for BIC")
      ->check(CLI::IsMember({"full", "paper"}))
      ->capture_default_str();
  fit_cmd->add_flag("--no-extend", fit_args.no_extend,
                    "do not grow the g range when a boundary solution is selected");
  fit_cmd->add_option("--grid", fit_args.grid,
                      "emit NxN density grids for the selected fits (p = 2 only)")
      ->capture_default_str();
  fit_cmd->add_option("--thin", fit_args.thin, "store every k-th sweep of the chain traces")
      ->capture_default_str();
  fit_cmd->add_option("--max-iters", fit_args.max_iters, "EM iteration cap")
      ->capture_default_str();
  fit_cmd->add_option("--aitken-eps", fit_args.aitken_eps, "EM Aitken stopping tolerance")
      ->capture_default_str();
  fit_cmd->add_option("--setback-threshold", fit_args.setback_threshold,
                      "EM set-back distance threshold")
      ->capture_default_str();
  fit_cmd->add_option("--restarts", fit_args.restarts, "EM random-partition restarts")
      ->capture_default_str();
  fit_cmd->add_option("--chains", fit_args.chains, "Gibbs chain count")->capture_default_str();
  fit_cmd->add_option("--min-sweeps", fit_args.min_sweeps, "Gibbs minimum sweeps per chain")
      ->capture_default_str();
  fit_cmd->add_option("--max-sweeps", fit_args.max_sweeps, "Gibbs sweep budget per chain")
      ->capture_default_str();
  fit_cmd->add_option("--psrf-threshold", fit_args.psrf_threshold, "convergence threshold")
      ->capture_default_str();
  fit_cmd->add_option("--burn-in", fit_args.burn_in, "burn-in fraction")->capture_default_str();
  fit_cmd->add_option("--retained", fit_args.retained, "pooled retained posterior samples")
      ->capture_default_str();
  fit_cmd->add_option("--guard-eps", fit_args.guard_eps,
                      "Mahalanobis degeneracy guard threshold")
      ->capture_default_str();
  fit_cmd->add_option("--max-resample", fit_args.max_resample,
                      "redraw budget when the guard trips")
      ->capture_default_str();
  fit_cmd->add_option("--prior-a0", fit_args.prior_a0,
                      "prior pseudo-count a0 (0 = data-adapted default)")
      ->capture_default_str();
  fit_cmd->add_option("--prior-a3", fit_args.prior_a3, "prior a3 (0 = default)")
      ->capture_default_str();
  fit_cmd->add_option("--prior-a4", fit_args.prior_a4, "prior a4 (0 = default)")
      ->capture_default_str();
  fit_cmd->add_option("--prior-a5-scale", fit_args.prior_a5_scale,
                      "multiplier on the data-covariance Wishart scale")
      ->capture_default_str();
  fit_cmd->add_option("--prior-dirichlet", fit_args.prior_dirichlet,
                      "Dirichlet concentration for the mixing proportions")
      ->capture_default_str();

  int sim_scenario = 1;
  std::string sim_params;
  int sim_n = 500;
  std::uint64_t sim_seed = 1;
  std::string sim_out = "simulated.csv";
  auto* sim_cmd = app.add_subcommand("simulate", "draw a dataset from a mixture");
  sim_cmd->add_option("--scenario", sim_scenario, "built-in scenario 1..4")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();
  sim_cmd->add_option("--params", sim_params,
                      "JSON file with {\"params\": ...} overriding the scenario");
  sim_cmd->add_option("--n", sim_n, "rows to draw")->capture_default_str();
  sim_cmd->add_option("--seed", sim_seed, "seed")->capture_default_str();
  sim_cmd->add_option("--out", sim_out, "output CSV (with component labels)")
      ->capture_default_str();

  int study_scenario = 1;
  std::string study_params;
  int study_ndatasets = 10;
  int study_nper = 500;
  std::string study_engines = "both";
  std::string study_grange = "1:3";
  std::uint64_t study_seed = 7;
  int study_threads = 2;
  int study_max_sweeps = 2000;
  std::string study_out = "study_report.json";
  auto* study_cmd = app.add_subcommand("study", "simulation study over many datasets");
  study_cmd->add_option("--scenario", study_scenario, "built-in scenario 1..4")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();
  study_cmd->add_option("--params", study_params, "JSON file with a custom truth");
  study_cmd->add_option("--n-datasets", study_ndatasets, "datasets to simulate")
      ->capture_default_str();
  study_cmd->add_option("--n-per-dataset", study_nper, "rows per dataset")
      ->capture_default_str();
  study_cmd->add_option("--engines", study_engines, "which engines to run")
      ->check(CLI::IsMember({"both", "em", "gibbs"}))
      ->capture_default_str();
  study_cmd->add_option("--g-range", study_grange, "component counts to fit")
      ->capture_default_str();
  study_cmd->add_option("--seed", study_seed, "master seed")->capture_default_str();
  study_cmd->add_option("--threads", study_threads, "dataset-level worker threads")
      ->capture_default_str();
  study_cmd->add_option("--max-sweeps", study_max_sweeps, "Gibbs sweep budget per chain")
      ->capture_default_str();
  study_cmd->add_option("--out", study_out, "report path")->capture_default_str();

  std::string eval_results, eval_selector = "bic", eval_out;
  CommonData eval_labels;
  auto* eval_cmd = app.add_subcommand("evaluate", "score predicted labels against truth");
  eval_cmd->add_option("--results", eval_results, "results.json from fit")->required();
  eval_cmd->add_option("--labels", eval_labels.path, "CSV with a label column, or one label per line")
      ->required();
  eval_cmd->add_option("--label-column", eval_labels.label_column,
                       "label column name inside the CSV");
  eval_cmd->add_option("--selector", eval_selector, "which selected model to score")
      ->check(CLI::IsMember({"bic", "icl"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "optional JSON report path");

  std::string cmp_a, cmp_b;
  double cmp_tol = 1e-2;
  auto* cmp_cmd = app.add_subcommand("compare", "diff two fit results files");
  cmp_cmd->add_option("a", cmp_a, "first results.json")->required();
  cmp_cmd->add_option("b", cmp_b, "second results.json")->required();
  cmp_cmd->add_option("--tol", cmp_tol, "relative tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit_cmd) return run_fit(fit_args);
    if (*sim_cmd) return run_simulate(sim_scenario, sim_params, sim_n, sim_seed, sim_out);
    if (*study_cmd)
      return run_study(study_scenario, study_params, study_ndatasets, study_nper, study_engines,
                       study_grange, study_seed, study_threads, study_max_sweeps, study_out);
    if (*eval_cmd) return run_evaluate(eval_results, eval_labels, eval_selector, eval_out);
    if (*cmp_cmd) return run_compare(cmp_a, cmp_b, cmp_tol);
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kExitData;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "fit error: " << e.what() << std::endl;
    return kExitFit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFit;
  }
  return kExitUsage;
}
