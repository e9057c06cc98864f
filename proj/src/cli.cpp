#include "bdt/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "bdt/analytics.hpp"
#include "bdt/error.hpp"
#include "bdt/forest.hpp"
#include "bdt/io.hpp"
#include "bdt/qp.hpp"

namespace bdt::cli {

namespace {

enum class Format { Csv, Json };

struct Options {
  std::string spec_path;
  std::vector<double> u;
  std::uint64_t n = 100000;
  std::optional<std::uint64_t> seed;
  double h = 0.01;
  std::string out_path;
  std::string format = "csv";
  std::string formula;
  std::string event = "all";
  std::string estimator = "tilted";
  std::optional<double> H;
  double H_stderr = 0.0;
  std::uint64_t pickands_n = 20000;
  std::optional<double> t;
  std::optional<std::int64_t> branch;
  std::int64_t N = 1;
  std::optional<double> lambda;
  std::optional<double> L;
  bool drift = false;
  std::size_t steps = 1024;
  std::vector<double> xs;
  double y = 1.0;
  unsigned threads = 0;
};

std::string join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
  return line + "\n";
}

std::string num(double v) { return format_double(v); }

Format format_of(const Options& o) {
  if (o.format == "csv") return Format::Csv;
  if (o.format == "json") return Format::Json;
  throw Error(ErrorCode::BadArguments, "format must be csv or json");
}

void require_levels(const Options& o) {
  if (o.u.empty()) throw Error(ErrorCode::BadArguments, "--u is required");
  for (std::size_t i = 1; i < o.u.size(); ++i) {
    if (!(o.u[i] > o.u[i - 1])) throw Error(ErrorCode::BadArguments, "--u must be strictly increasing");
  }
}

std::uint64_t require_seed(const Options& o) {
  if (!o.seed) throw Error(ErrorCode::BadArguments, "randomized commands need an explicit --seed");
  return *o.seed;
}

TreeSpec load_tree(const Options& o) {
  if (o.spec_path.empty()) throw Error(ErrorCode::BadArguments, "--spec is required");
  const json j = read_json_file(o.spec_path);
  return TreeSpec::validate(j.get<RawTreeSpec>());
}

McConfig mc_config(const Options& o) {
  if (o.n < 1) throw Error(ErrorCode::BadArguments, "--n must be >= 1");
  McConfig c;
  c.n = o.n;
  c.seed = require_seed(o);
  c.grid.h = o.h;
  c.threads = o.threads;
  return c;
}

Estimator estimator_of(const Options& o) {
  if (o.estimator == "crude") return Estimator::Crude;
  if (o.estimator == "tilted") return Estimator::Tilted;
  throw Error(ErrorCode::BadArguments, "estimator must be crude or tilted");
}

// The constant for the all-branch formula of a tree: given by --H, exact for
// one branch, otherwise estimated.
PickandsEstimate constant_for(const TreeSpec& spec, const Options& o) {
  const double lambda = 1.0 / eigenstructure(spec.horizon(), spec).top();
  if (o.H) {
    PickandsEstimate h;
    h.N = spec.branch_count();
    h.lambda = lambda;
    h.value = *o.H;
    h.std_error = o.H_stderr;
    h.infinite_horizon = true;
    return h;
  }
  if (spec.branch_count() == 1) return PickandsEstimate::exact_one_dimensional(lambda);
  PickandsConfig pc;
  pc.n = o.pickands_n;
  pc.seed = require_seed(o);
  pc.threads = o.threads;
  return estimate_H(spec.branch_count(), lambda, pc);
}

class Output {
 public:
  explicit Output(const Options& o, std::ostream& fallback) : format_(format_of(o)) {
    if (!o.out_path.empty()) {
      file_.open(o.out_path, std::ios::binary);
      if (!file_) throw Error(ErrorCode::BadArguments, "cannot write " + o.out_path);
    }
    stream_ = o.out_path.empty() ? &fallback : &file_;
  }
  Format format() const { return format_; }
  std::ostream& stream() { return *stream_; }
  void json_out(const json& j) { *stream_ << j.dump(2) << "\n"; }

 private:
  Format format_;
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

void cmd_spectrum(const Options& o, std::ostream& os) {
  const TreeSpec spec = load_tree(o);
  const Eigenstructure eig = eigenstructure(o.t.value_or(spec.horizon()), spec);
  Output out(o, os);
  if (out.format() == Format::Json) return out.json_out(eig);
  out.stream() << join({"v", "mu", "mult"});
  for (std::size_t v = 0; v < eig.pairs.size(); ++v) {
    out.stream() << join({std::to_string(v), num(eig.pairs[v].mu),
                          std::to_string(eig.pairs[v].multiplicity)});
  }
}

AsymptoticsResult exact_as_result(double u, const TreeSpec& spec) {
  if (spec.eta() != 0) throw Error(ErrorCode::BadArguments, "bm_crossing_exact needs a tree without branching");
  return AsymptoticsResult{Formula::BmCrossingExact, u,
                           log_bm_crossing_exact(u - spec.x(), spec.c(), spec.horizon()),
                           spec.raw(), {}};
}

void cmd_asym(const Options& o, std::ostream& os) {
  if (o.formula.empty()) throw Error(ErrorCode::BadArguments, "--formula is required");
  const json j = read_json_file(o.spec_path.empty() ? throw Error(ErrorCode::BadArguments, "--spec is required")
                                                    : o.spec_path);
  std::vector<AsymptoticsResult> rows;

  if (o.formula == "ruintime") {
    const TreeSpec spec = TreeSpec::validate(j.get<RawTreeSpec>());
    Output out(o, os);
    json arr = json::array();
    if (out.format() == Format::Csv) out.stream() << join({"x", "y", "value"});
    for (const double x : o.xs) {
      const double v = ruintime_limit(x, o.y, spec);
      if (out.format() == Format::Csv) out.stream() << join({num(x), num(o.y), num(v)});
      arr.push_back(json{{"x", x}, {"y", o.y}, {"value", v}});
    }
    if (out.format() == Format::Json) out.json_out(arr);
    return;
  }

  require_levels(o);
  const Formula f = formula_from_string(o.formula);
  if (f == Formula::Forest) {
    const ForestSpec forest = forest_from_json(j);
    std::vector<PickandsEstimate> H(forest.trees.size());
    for (const std::size_t i : maximal_set(forest)) H[i] = constant_for(forest.trees[i], o);
    for (const double u : o.u) rows.push_back(forest_asym(u, forest, H));
  } else if (f == Formula::RandomOffspring) {
    const RandomTreeSpec random = j.get<RandomTreeSpec>();
    const PickandsEstimate H = constant_for(random.essinf_tree(), o);
    for (const double u : o.u) rows.push_back(random_offspring_asym(u, random, H));
  } else {
    const TreeSpec spec = TreeSpec::validate(j.get<RawTreeSpec>());
    std::optional<PickandsEstimate> H;
    if (f == Formula::AllBranch) H = constant_for(spec, o);
    for (const double u : o.u) {
      switch (f) {
        case Formula::BmCrossingExact: rows.push_back(exact_as_result(u, spec)); break;
        case Formula::BmCrossingAsym: {
          auto r = bm_crossing_asym(u - spec.x(), spec.c(), spec.horizon());
          r.u = u;
          rows.push_back(r);
          break;
        }
        case Formula::SingleBranch: rows.push_back(single_branch_asym(u, spec)); break;
        case Formula::Diameter: rows.push_back(diameter_asym(u, spec)); break;
        case Formula::EndpointOrthant: rows.push_back(endpoint_orthant_asym(u, spec)); break;
        case Formula::AllBranch: rows.push_back(all_branch_asym(u, spec, *H)); break;
        case Formula::ClassicalBbm: rows.push_back(classical_bbm_asym(u, spec.c(), spec.horizon())); break;
        case Formula::ClassicalBbmStatement:
          rows.push_back(classical_bbm_statement(u, spec.c(), spec.horizon()));
          break;
        default: break;
      }
    }
  }

  Output out(o, os);
  if (out.format() == Format::Json) return out.json_out(rows);
  out.stream() << join({"formula", "u", "value", "log_value"});
  for (const auto& r : rows) {
    out.stream() << join({std::string(to_string(r.formula)), num(r.u), num(r.value()), num(r.log_value)});
  }
}

void cmd_mc(const Options& o, std::ostream& os) {
  const TreeSpec spec = load_tree(o);
  require_levels(o);
  const McConfig config = mc_config(o);
  EventSpec event;
  event.kind = event_kind_from_string(o.event);
  event.branch = o.branch;
  const Estimator est = estimator_of(o);

  std::vector<std::pair<double, McEstimate>> rows;
  for (const double u : o.u) {
    event.u = u;
    rows.emplace_back(u, est == Estimator::Crude ? estimate(spec, event, config)
                                                 : estimate_tilted(spec, event, config));
  }
  Output out(o, os);
  if (out.format() == Format::Json) {
    json arr = json::array();
    for (const auto& [u, e] : rows) {
      json item = e;
      item["u"] = u;
      item["event"] = o.event;
      arr.push_back(item);
    }
    return out.json_out(arr);
  }
  out.stream() << join({"u", "p", "stderr", "n", "estimator", "seed"});
  for (const auto& [u, e] : rows) {
    out.stream() << join({num(u), num(e.p), num(e.std_error), std::to_string(e.n),
                          std::string(to_string(e.estimator)), std::to_string(e.seed)});
  }
}

void cmd_pickands(const Options& o, std::ostream& os) {
  PickandsConfig pc;
  pc.n = o.n;
  pc.seed = require_seed(o);
  pc.steps = o.steps;
  pc.threads = o.threads;
  std::int64_t N = o.N;
  std::optional<double> lambda = o.lambda;
  if (!o.spec_path.empty()) {
    const TreeSpec spec = load_tree(o);
    N = spec.branch_count();
    if (!lambda) lambda = 1.0 / eigenstructure(spec.horizon(), spec).top();
  }
  const double lam = lambda.value_or(1.0);
  PickandsEstimate e;
  if (o.L) {
    e = o.drift ? estimate_H_drift(N, lam, *o.L, pc) : estimate_H_L(N, lam, *o.L, pc);
  } else {
    e = estimate_H(N, lam, pc);
  }
  Output out(o, os);
  if (out.format() == Format::Json) return out.json_out(e);
  out.stream() << join({"N", "lambda", "L", "value", "stderr", "n"});
  out.stream() << join({std::to_string(e.N), num(e.lambda), num(e.L), num(e.value),
                        num(e.std_error), std::to_string(e.n)});
}

void cmd_qp(const Options& o, std::ostream& os) {
  const TreeSpec spec = load_tree(o);
  const Eigen::MatrixXd sigma = sigma_matrix(o.t.value_or(spec.horizon()), spec);
  const Eigen::VectorXd a = Eigen::VectorXd::Ones(sigma.rows());
  const auto sol = solve(sigma, a);
  const QPCheck check = verify(sigma, a, sol);
  std::vector<Eigen::Index> active;
  for (const auto i : sol.I) active.push_back(i + 1);

  Output out(o, os);
  if (out.format() == Format::Json) {
    return out.json_out(json{{"value", sol.value},
                             {"I", active},
                             {"a_tilde", std::vector<double>(sol.a_tilde.begin(), sol.a_tilde.end())},
                             {"lambda", std::vector<double>(sol.lambda.begin(), sol.lambda.end())},
                             {"verified", check.all()}});
  }
  std::string set;
  for (std::size_t k = 0; k < active.size(); ++k) set += (k ? ";" : "") + std::to_string(active[k]);
  out.stream() << join({"value", "I", "verified"});
  out.stream() << join({num(sol.value), set, check.all() ? "true" : "false"});
}

void cmd_forest(const Options& o, std::ostream& os) {
  if (o.spec_path.empty()) throw Error(ErrorCode::BadArguments, "--spec is required");
  const ForestSpec forest = forest_from_json(read_json_file(o.spec_path));
  require_levels(o);
  const auto A = maximal_set(forest);
  std::vector<PickandsEstimate> H(forest.trees.size());
  for (const std::size_t i : A) H[i] = constant_for(forest.trees[i], o);
  const bool simulate = o.seed.has_value();
  std::vector<std::pair<AsymptoticsResult, std::optional<McEstimate>>> rows;
  for (const double u : o.u) {
    std::optional<McEstimate> mc;
    if (simulate) mc = simulate_forest_event(forest, u, mc_config(o), estimator_of(o));
    rows.emplace_back(forest_asym(u, forest, H), mc);
  }

  std::string set;
  for (std::size_t k = 0; k < A.size(); ++k) set += (k ? ";" : "") + std::to_string(A[k] + 1);
  Output out(o, os);
  if (out.format() == Format::Json) {
    json keys = json::array();
    for (const auto& tree : forest.trees) {
      const OrderKey key = order_key(tree);
      keys.push_back(json{{"spread", key.spread}, {"level", key.level}, {"branches", -key.neg_branches}});
    }
    json arr = json::array();
    for (const auto& [asym, mc] : rows) {
      json item = asym;
      if (mc) item["mc"] = *mc;
      arr.push_back(item);
    }
    std::vector<std::size_t> one_based;
    for (const auto i : A) one_based.push_back(i + 1);
    return out.json_out(json{{"keys", keys}, {"maximal_set", one_based}, {"asym", arr}});
  }
  std::vector<std::string> header{"u", "asym_value", "maximal_set"};
  if (simulate) header.insert(header.end(), {"mc_estimate", "mc_stderr", "ratio"});
  out.stream() << join(header);
  for (const auto& [asym, mc] : rows) {
    std::vector<std::string> cells{num(asym.u), num(asym.value()), set};
    if (mc) cells.insert(cells.end(), {num(mc->p), num(mc->std_error), num(mc->p / asym.value())});
    out.stream() << join(cells);
  }
}

void cmd_ratio(const Options& o, std::ostream& os) {
  const TreeSpec spec = load_tree(o);
  require_levels(o);
  RatioConfig rc;
  rc.event = event_kind_from_string(o.event);
  rc.estimator = estimator_of(o);
  rc.mc = mc_config(o);
  if (rc.event == EventKind::AllBranch) rc.H = constant_for(spec, o);
  const auto rows = ratio_table(spec, o.u, rc);
  Output out(o, os);
  if (out.format() == Format::Csv) return write_ratio_csv(out.stream(), rows);
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back(json{{"u", r.u}, {"mc_estimate", r.mc_estimate}, {"mc_stderr", r.mc_stderr},
                       {"asym_value", r.asym_value}, {"ratio", r.ratio}, {"ratio_stderr", r.ratio_stderr}});
  }
  out.json_out(arr);
}

}  // namespace

std::vector<RatioRow> ratio_table(const TreeSpec& spec, const std::vector<double>& u_grid,
                                  const RatioConfig& config) {
  std::vector<RatioRow> rows;
  for (const double u : u_grid) {
    EventSpec event{config.event, u, std::nullopt};
    double asym = 0.0;
    switch (config.event) {
      case EventKind::AllBranch: {
        const PickandsEstimate H = config.H ? *config.H
                                            : PickandsEstimate::exact_one_dimensional(
                                                  1.0 / eigenstructure(spec.horizon(), spec).top());
        asym = all_branch_asym(u, spec, H).value();
        break;
      }
      case EventKind::SingleBranch: asym = single_branch_asym(u, spec).value(); break;
      case EventKind::Diameter: asym = diameter_asym(u, spec).value(); break;
      case EventKind::EndpointOrthant: asym = endpoint_orthant_asym(u, spec).value(); break;
      case EventKind::ForestAny:
        throw Error(ErrorCode::UnsupportedEvent, "use the forest command for forests");
    }
    const bool crude = config.estimator == Estimator::Crude || config.event == EventKind::Diameter;
    const McEstimate e = crude ? estimate(spec, event, config.mc) : estimate_tilted(spec, event, config.mc);
    rows.push_back(RatioRow{u, e.p, e.std_error, asym, e.p / asym, e.std_error / asym});
  }
  return rows;
}

void write_ratio_csv(std::ostream& out, const std::vector<RatioRow>& rows) {
  out << join({"u", "mc_estimate", "mc_stderr", "asym_value", "ratio", "ratio_stderr"});
  for (const auto& r : rows) {
    out << join({num(r.u), num(r.mc_estimate), num(r.mc_stderr), num(r.asym_value), num(r.ratio),
                 num(r.ratio_stderr)});
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Brownian decision trees: spectra, asymptotics and rare-event simulation"};
  app.require_subcommand(1);
  // -h is taken by the grid step
  app.set_help_flag("--help", "print help");
  Options o;

  const auto common = [&o](CLI::App* sub) {
    sub->add_option("--spec", o.spec_path, "JSON tree or forest spec");
    sub->add_option("--u", o.u, "levels, comma separated")->delimiter(',');
    sub->add_option("--n", o.n, "samples");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--h", o.h, "largest grid step");
    sub->add_option("--out", o.out_path, "output file (default stdout)");
    sub->add_option("--format", o.format, "csv or json");
    sub->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  };
  const auto constant = [&o](CLI::App* sub) {
    sub->add_option("--H", o.H, "Pickands constant (estimated when absent)");
    sub->add_option("--H-stderr", o.H_stderr, "standard error of --H");
    sub->add_option("--pickands-n", o.pickands_n, "samples for estimating the constant");
  };

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of Sigma(t)");
  common(spectrum);
  spectrum->add_option("--t", o.t, "time (default T)");

  auto* asym = app.add_subcommand("asym", "evaluate an asymptotic formula over levels");
  common(asym);
  constant(asym);
  asym->add_option("--formula", o.formula, "formula id");
  asym->add_option("--x", o.xs, "ruintime: x values")->delimiter(',');
  asym->add_option("--y", o.y, "ruintime: y");

  auto* mc = app.add_subcommand("mc", "Monte Carlo event probabilities");
  common(mc);
  mc->add_option("--event", o.event, "single, diameter, all or endpoint");
  mc->add_option("--estimator", o.estimator, "crude or tilted");
  mc->add_option("--branch", o.branch, "designated branch for the single event");

  auto* pickands = app.add_subcommand("pickands", "estimate the Pickands-type constant");
  common(pickands);
  pickands->add_option("--N", o.N, "dimension (taken from --spec when given)");
  pickands->add_option("--lambda", o.lambda, "scale (default 1/mu_0(T) of --spec, else 1)");
  pickands->add_option("--L", o.L, "fixed horizon instead of the limit");
  pickands->add_flag("--drift", o.drift, "with --L: drifted representation");
  pickands->add_option("--steps", o.steps, "grid steps per path");

  auto* qp = app.add_subcommand("qp", "solve the quadratic programme for Sigma(T) and a = 1");
  common(qp);
  qp->add_option("--t", o.t, "time (default T)");

  auto* forest = app.add_subcommand("forest", "order, maximal set and forest asymptotics");
  common(forest);
  constant(forest);
  forest->add_option("--estimator", o.estimator, "crude or tilted");

  auto* ratio = app.add_subcommand("ratio", "MC / asymptotic convergence table");
  common(ratio);
  constant(ratio);
  ratio->add_option("--event", o.event, "single, diameter, all or endpoint");
  ratio->add_option("--estimator", o.estimator, "crude or tilted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*spectrum) cmd_spectrum(o, out);
    else if (*asym) cmd_asym(o, out);
    else if (*mc) cmd_mc(o, out);
    else if (*pickands) cmd_pickands(o, out);
    else if (*qp) cmd_qp(o, out);
    else if (*forest) cmd_forest(o, out);
    else if (*ratio) cmd_ratio(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace bdt::cli
