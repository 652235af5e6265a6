#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "klrisk/data.hpp"
#include "klrisk/divergence.hpp"
#include "klrisk/error.hpp"
#include "klrisk/families.hpp"
#include "klrisk/hlik.hpp"
#include "klrisk/likelihood.hpp"
#include "klrisk/penalized.hpp"
#include "klrisk/selection.hpp"

namespace klrisk::cli {

namespace {

using json = nlohmann::ordered_json;

struct Settings {
  bool pretty = false;
  std::uint64_t seed = 0;
  std::string family, family_a, family_b, data, truth, model, re_model = "normal-normal";
  std::optional<double> censor, kappa, tau;
  std::optional<std::size_t> oracle;
  std::vector<double> kappa_grid, tau_grid;
  bool lcv = false;
  int knots = 12, folds = 5, k = 0, trials = 0;
  double nu = 0.0, sigma2 = 1.0;
  std::size_t n = 0, reps = 0;
};

/// Collects the report body; non-finite numbers become null plus a warning.
class Report {
 public:
  json num(double v, const std::string& field) {
    if (std::isfinite(v)) return v;
    warnings_.push_back(field + " is not finite (" + std::to_string(v) + "); reported as null");
    return nullptr;
  }
  json nums(const Vector& v, const std::string& field) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
      out.push_back(num(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
  }
  json nums(const std::vector<double>& v, const std::string& field) {
    return nums(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())), field);
  }
  void warn(std::string w) { warnings_.push_back(std::move(w)); }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<std::string> warnings_;
};

Dataset load_dataset(const std::string& path) { return parse_dataset(read_text_file(path)); }
GroupedDataset load_grouped(const std::string& path) { return parse_grouped(read_text_file(path)); }

json digest(const Dataset& d) { return {{"rows", d.size()}, {"events", d.events()}}; }
json digest(const GroupedDataset& d) {
  return {{"rows", d.total_outcomes()}, {"subjects", d.size()}};
}

json named(const Family& family, const Vector& values, Report& r, const std::string& field) {
  json out = json::object();
  const auto names = family.param_names();
  for (std::size_t k = 0; k < names.size(); ++k)
    out[names[k]] = r.num(values[static_cast<Eigen::Index>(k)], field + "." + names[k]);
  return out;
}

json fit_block(const Family& family, const Dataset& data, const FitResult& fit, Report& r) {
  json out;
  out["family"] = family.name();
  out["estimates"] = named(family, fit.theta_hat, r, "estimates");
  try {
    const InfoMatrices info = score_and_information(family, fit.theta_hat, data).info;
    Eigen::LDLT<Matrix> ldlt(info.observed);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
      throw NumericalError("observed information is not positive definite");
    const Matrix cov = ldlt.solve(Matrix::Identity(fit.theta_hat.size(), fit.theta_hat.size())) /
                       static_cast<double>(data.size());
    out["std_errors"] = named(family, cov.diagonal().cwiseSqrt(), r, "std_errors");
  } catch (const std::exception& e) {
    r.warn(std::string("standard errors unavailable: ") + e.what());
    out["std_errors"] = nullptr;
  }
  out["loglik"] = r.num(fit.loglik_at_max, "loglik");
  out["p"] = fit.p;
  out["converged"] = fit.converged;
  out["iterations"] = fit.iterations;
  out["grad_norm"] = r.num(fit.grad_norm, "grad_norm");
  if (fit.converged) {
    const ModelScores s = model_scores(fit, data.size());
    out["aic"] = r.num(s.aic, "aic");
    out["ekl"] = r.num(s.ekl, "ekl");
  } else {
    r.warn("fit did not converge: " + fit.message);
    out["aic"] = nullptr;
    out["ekl"] = nullptr;
  }
  return out;
}

json penalized_block(const PenalizedFit& pf, Report& r) {
  json out;
  out["kappa"] = r.num(pf.kappa, "kappa");
  out["curvature"] = r.num(pf.j_value, "curvature");
  out["loglik"] = r.num(pf.loglik, "loglik");
  out["penalized_loglik"] = r.num(pf.fit.loglik_at_max, "penalized_loglik");
  out["converged"] = pf.fit.converged;
  out["iterations"] = pf.fit.iterations;
  out["spline_coefficients"] = r.nums(pf.model.a, "spline_coefficients");
  out["beta"] = r.nums(pf.model.beta, "beta");
  return out;
}

json cmd_fit(const Settings& s, json& input, Report& r) {
  const Family family = Family::parse(s.family);
  const Dataset data = load_dataset(s.data);
  input = digest(data);
  return fit_block(family, data, fit_mle(family, data), r);
}

json cmd_kl(const Settings& s, json&, Report& r) {
  const Law truth = Law::parse(s.truth);
  const Law model = Law::parse(s.model);
  json out;
  out["true"] = truth.spec();
  out["model"] = model.spec();
  out["censor"] = s.censor ? json(*s.censor) : json(nullptr);
  out["kl"] = r.num(kl(model, truth, s.censor), "kl");
  if (s.oracle) {
    const MonteCarloEstimate mc = kl_oracle(model, truth, s.censor, *s.oracle, s.seed);
    out["oracle"] = {{"estimate", r.num(mc.estimate, "oracle.estimate")},
                     {"std_error", r.num(mc.std_error, "oracle.std_error")},
                     {"draws", mc.draws},
                     {"seed", s.seed}};
  }
  return out;
}

json cmd_penfit(const Settings& s, json& input, Report& r) {
  const Dataset data = load_dataset(s.data);
  input = digest(data);
  const BSplineBasis basis = default_basis(data, s.knots);
  json out;
  out["basis_dim"] = basis.dim();
  double kappa;
  if (s.lcv) {
    if (s.kappa) throw DomainError("--kappa and --lcv are mutually exclusive");
    if (s.kappa_grid.empty()) throw DomainError("--lcv needs --kappa-grid");
    const LcvResult cv = lcv_select(data, basis, s.kappa_grid, s.folds, s.seed);
    out["lcv"] = {{"kappa_grid", r.nums(cv.kappa_grid, "lcv.kappa_grid")},
                  {"scores", r.nums(cv.scores, "lcv.scores")},
                  {"kappa_star", r.num(cv.kappa_star, "lcv.kappa_star")},
                  {"folds", s.folds},
                  {"seed", s.seed}};
    kappa = cv.kappa_star;
  } else {
    if (!s.kappa) throw DomainError("penfit needs --kappa or --lcv");
    kappa = *s.kappa;
  }
  out["fit"] = penalized_block(fit_penalized(data, basis, kappa), r);
  return out;
}

json cmd_sieve(const Settings& s, json& input, Report& r) {
  const Dataset data = load_dataset(s.data);
  input = digest(data);
  const BSplineBasis basis = default_basis(data, s.knots);
  const SieveFit sf = fit_sieve(data, basis, s.nu);
  json out;
  out["nu"] = s.nu;
  out["kappa_nu"] = r.num(sf.kappa_nu, "kappa_nu");
  out["lambda"] = r.num(sf.lambda, "lambda");
  out["active"] = sf.active;
  out["bisection_steps"] = sf.bisection_steps;
  if (std::isfinite(sf.lambda)) {
    const KktResidual kkt = kkt_residual(sf.fit.model, sf.lambda, s.nu, data);
    out["kkt"] = {{"grad_residual", r.num(kkt.grad_residual, "kkt.grad_residual")},
                  {"primal_feasibility", r.num(kkt.primal_feasibility, "kkt.primal_feasibility")},
                  {"dual_feasible", kkt.dual_feasible},
                  {"complementarity", r.num(kkt.complementarity, "kkt.complementarity")}};
  } else {
    out["kkt"] = nullptr;
    r.warn("no finite multiplier for nu = 0; KKT residuals omitted");
  }
  json fit = penalized_block(sf.fit, r);
  fit.erase("kappa");
  out["fit"] = fit;
  return out;
}

json cmd_hfit(const Settings& s, json& input, Report& r) {
  const RandomEffectsModel model = RandomEffectsModel::parse(s.re_model, s.sigma2);
  const GroupedDataset data = load_grouped(s.data);
  input = digest(data);
  json out;
  out["model"] = model.name();
  if (model.kind == RandomEffectsKind::normal_normal) out["sigma2"] = s.sigma2;
  double tau;
  if (!s.tau_grid.empty()) {
    if (s.tau) throw DomainError("--tau and --tau-grid are mutually exclusive");
    const TauProfile prof = profile_tau(model, data, s.tau_grid);
    out["profile"] = {{"tau_grid", r.nums(prof.grid, "profile.tau_grid")},
                      {"values", r.nums(prof.values, "profile.values")},
                      {"mu", r.nums(prof.theta_hat, "profile.mu")},
                      {"tau_hat", r.num(prof.tau_hat, "profile.tau_hat")}};
    tau = prof.tau_hat;
  } else {
    if (!s.tau) throw DomainError("hfit needs --tau or --tau-grid");
    tau = *s.tau;
  }
  const HlikFit fit = fit_hlik(model, data, tau);
  json effects = json::object();
  for (std::size_t i = 0; i < data.size(); ++i)
    effects[data[i].id] = r.num(fit.gamma.b[static_cast<Eigen::Index>(i)], "b." + data[i].id);
  out["tau"] = tau;
  out["mu"] = r.num(fit.gamma.theta[0], "mu");
  out["h_loglik"] = r.num(fit.h_value, "h_loglik");
  out["sweeps"] = fit.sweeps;
  out["joint_grad_norm"] = r.num(fit.joint_grad_norm, "joint_grad_norm");
  out["random_effects"] = effects;
  return out;
}

json cmd_compare(const Settings& s, json& input, Report& r) {
  const Family a = Family::parse(s.family_a);
  const Family b = Family::parse(s.family_b);
  const Dataset data = load_dataset(s.data);
  input = digest(data);
  const FitResult fa = fit_mle(a, data);
  const FitResult fb = fit_mle(b, data);
  json out;
  out["a"] = fit_block(a, data, fa, r);
  out["b"] = fit_block(b, data, fb, r);
  out["risk_difference"] = r.num(risk_difference(fa, fb, data.size()), "risk_difference");
  return out;
}

json cmd_simulate(const Settings& s, json&, Report& r) {
  const Law truth = Law::parse(s.truth);
  const Family family = Family::parse(s.family);
  const EklSimulation sim = simulate_ekl(truth, family, s.n, s.reps, s.censor, s.seed);
  json out;
  out["true"] = truth.spec();
  out["family"] = family.name();
  out["n"] = s.n;
  out["reps"] = s.reps;
  out["censor"] = s.censor ? json(*s.censor) : json(nullptr);
  out["seed"] = s.seed;
  out["mean_ekl"] = r.num(sim.mean_ekl, "mean_ekl");
  out["ekl_std_error"] = r.num(sim.ekl_std_error, "ekl_std_error");
  out["misspec_component"] = r.num(sim.misspec_component, "misspec_component");
  out["statistical_component"] = r.num(sim.statistical_component, "statistical_component");
  out["mean_trace_ratio"] = r.num(sim.mean_trace_ratio, "mean_trace_ratio");
  out["failures"] = sim.failures;
  if (sim.failures > 0) r.warn(std::to_string(sim.failures) + " replicate fits failed");
  return out;
}

json cmd_map(const Settings& s, json&, Report& r) {
  json out;
  out["k"] = s.k;
  out["n"] = s.trials;
  out["flat"] = r.num(map_estimate(s.k, s.trials, Prior::flat), "flat");
  try {
    out["jeffreys"] = r.num(map_estimate(s.k, s.trials, Prior::jeffreys), "jeffreys");
  } catch (const BoundaryError& e) {
    out["jeffreys"] = nullptr;
    r.warn(std::string("jeffreys: ") + e.what());
  }
  return out;
}

void render_pretty(const json& j, std::ostream& out, int depth) {
  const std::string pad(2 * depth, ' ');
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = j.is_object() ? it.key() : "-";
    if (it->is_structured() && !it->empty()) {
      out << pad << key << ":\n";
      render_pretty(*it, out, depth + 1);
    } else {
      out << pad << key << ": " << it->dump() << "\n";
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Likelihood inference and Kullback-Leibler risk toolkit", "klrisk"};
  app.require_subcommand(1);
  app.add_flag("--pretty", s.pretty, "Human-readable rendering of the report");

  auto* fit = app.add_subcommand("fit", "Maximum likelihood fit of a parametric family");
  fit->add_option("--family", s.family, "exponential, weibull, normal or binomial(N)")->required();
  fit->add_option("--data", s.data, "CSV with header time,status")->required();

  auto* klc = app.add_subcommand("kl", "Divergence of a model law from a true law");
  klc->add_option("--true", s.truth, "Truth, name:p1[,p2]")->required();
  klc->add_option("--model", s.model, "Model, name:p1[,p2]")->required();
  klc->add_option("--censor", s.censor, "Fixed right-censoring time");
  auto* oracle = klc->add_option("--oracle", s.oracle, "Monte Carlo check with N draws");
  klc->add_option("--seed", s.seed, "Random seed")->needs(oracle);

  auto* pen = app.add_subcommand("penfit", "Penalized spline hazard fit");
  pen->add_option("--data", s.data, "CSV with header time,status")->required();
  pen->add_option("--knots", s.knots, "Number of basis functions")->capture_default_str();
  pen->add_option("--kappa", s.kappa, "Penalty weight");
  pen->add_flag("--lcv", s.lcv, "Choose kappa by likelihood cross-validation");
  pen->add_option("--kappa-grid", s.kappa_grid, "Candidate kappas for --lcv")->delimiter(',');
  pen->add_option("--folds", s.folds, "Cross-validation folds")->capture_default_str();
  pen->add_option("--seed", s.seed, "Fold assignment seed");

  auto* sieve = app.add_subcommand("sieve", "Likelihood maximized under a curvature bound");
  sieve->add_option("--data", s.data, "CSV with header time,status")->required();
  sieve->add_option("--nu", s.nu, "Curvature bound")->required();
  sieve->add_option("--knots", s.knots, "Number of basis functions")->capture_default_str();

  auto* hfit = app.add_subcommand("hfit", "Hierarchical likelihood fit of a random-intercept model");
  hfit->add_option("--data", s.data, "CSV with header subject,y")->required();
  hfit->add_option("--model", s.re_model, "normal-normal or poisson-lognormal")->required();
  hfit->add_option("--tau", s.tau, "Random-effect standard deviation");
  hfit->add_option("--tau-grid", s.tau_grid, "Profile tau over these values")->delimiter(',');
  hfit->add_option("--sigma2", s.sigma2, "Residual variance (normal-normal)")->capture_default_str();

  auto* cmp = app.add_subcommand("compare", "AIC of two families and their risk difference");
  cmp->add_option("--data", s.data, "CSV with header time,status")->required();
  cmp->add_option("--family-a", s.family_a, "First family")->required();
  cmp->add_option("--family-b", s.family_b, "Second family")->required();

  auto* sim = app.add_subcommand("simulate-ekl", "Monte Carlo expected divergence of the MLE");
  sim->add_option("--true", s.truth, "Truth, name:p1[,p2]")->required();
  sim->add_option("--family", s.family, "Family fitted to each sample")->required();
  sim->add_option("--n", s.n, "Sample size")->required();
  sim->add_option("--reps", s.reps, "Monte Carlo replicates")->required();
  sim->add_option("--censor", s.censor, "Fixed right-censoring time");
  sim->add_option("--seed", s.seed, "Random seed");

  auto* map = app.add_subcommand("map-demo", "Binomial posterior modes under two priors");
  map->add_option("--k", s.k, "Successes")->required();
  map->add_option("--n", s.trials, "Trials")->required();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 1;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  Report report;
  json input = nullptr;
  json results;
  try {
    if (name == "fit") results = cmd_fit(s, input, report);
    else if (name == "kl") results = cmd_kl(s, input, report);
    else if (name == "penfit") results = cmd_penfit(s, input, report);
    else if (name == "sieve") results = cmd_sieve(s, input, report);
    else if (name == "hfit") results = cmd_hfit(s, input, report);
    else if (name == "compare") results = cmd_compare(s, input, report);
    else if (name == "simulate-ekl") results = cmd_simulate(s, input, report);
    else results = cmd_map(s, input, report);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\nRun `klrisk " << name << " --help` for usage.\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  }

  json doc;
  doc["command"] = name;
  doc["arguments"] = args;
  doc["input"] = input;
  doc["results"] = results;
  doc["warnings"] = report.warnings();
  if (s.pretty)
    render_pretty(doc, out, 0);
  else
    out << doc.dump() << "\n";
  return 0;
}

}  // namespace klrisk::cli
