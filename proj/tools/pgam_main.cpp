// Command-line front end: fit, predict, slopes, contrasts, compare, check,
// simulate, fit-wood. Tables go to stdout, diagnostics to stderr. Exit codes:
// 0 ok, 2 input error, 3 request error, 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "pgam/pgam.hpp"

namespace {

using namespace pgam;
using nlohmann::json;

struct GridAxis {
  std::string name;
  double lo = 0.0, hi = 0.0;
  int count = 0;
};

// "day=0:78:100" or "day=20" (single point), comma separated.
std::vector<GridAxis> parse_grid(const std::string& text) {
  std::vector<GridAxis> axes;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) {
      throw Error("cli", "grid", "expected name=lo:hi:n or name=value in '" + part + "'");
    }
    GridAxis ax;
    ax.name = part.substr(0, eq);
    const std::string rhs = part.substr(eq + 1);
    const auto c1 = rhs.find(':');
    try {
      if (c1 == std::string::npos) {
        ax.lo = ax.hi = std::stod(rhs);
        ax.count = 1;
      } else {
        const auto c2 = rhs.find(':', c1 + 1);
        if (c2 == std::string::npos) {
          throw Error("cli", "grid", "expected lo:hi:n in '" + rhs + "'");
        }
        ax.lo = std::stod(rhs.substr(0, c1));
        ax.hi = std::stod(rhs.substr(c1 + 1, c2 - c1 - 1));
        ax.count = std::stoi(rhs.substr(c2 + 1));
      }
    } catch (const Error&) {
      throw;
    } catch (...) {
      throw Error("cli", "grid", "cannot parse grid '" + part + "'");
    }
    if (ax.count < 1) {
      throw Error("cli", "grid", "grid needs at least one point per axis");
    }
    axes.push_back(ax);
  }
  if (axes.empty()) {
    throw Error("cli", "grid", "empty grid specification");
  }
  return axes;
}

// Factors needed by the retained terms, with their training levels.
std::vector<FactorInfo> retained_factors(const FittedModel& model,
                                         const std::vector<bool>& mask) {
  std::vector<FactorInfo> out;
  for (std::size_t ti = 0; ti < model.M.terms.size(); ++ti) {
    if (mask[ti]) continue;
    for (const auto& info : model.M.terms[ti].factors) {
      bool seen = false;
      for (const auto& have : out) seen = seen || have.name == info.name;
      if (!seen) out.push_back(info);
    }
  }
  return out;
}

// Cartesian product of numeric axes and retained factor levels.
Dataset expand_grid(const FittedModel& model, const std::vector<GridAxis>& axes,
                    const std::vector<bool>& mask) {
  const std::vector<FactorInfo> factors = retained_factors(model, mask);
  Eigen::Index rows = 1;
  for (const auto& ax : axes) rows *= ax.count;
  for (const auto& f : factors) rows *= static_cast<Eigen::Index>(f.levels.size());

  Dataset grid;
  Eigen::Index repeat = 1;  // how often each value repeats consecutively
  // numeric axes vary fastest in the declared order
  for (const auto& ax : axes) {
    Eigen::VectorXd v(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index idx = (r / repeat) % ax.count;
      v[r] = ax.count == 1
                 ? ax.lo
                 : ax.lo + (ax.hi - ax.lo) * static_cast<double>(idx) /
                       static_cast<double>(ax.count - 1);
    }
    Column c;
    c.kind = Column::Kind::numeric;
    c.values = std::move(v);
    grid.add_column(ax.name, std::move(c));
    repeat *= ax.count;
  }
  for (const auto& f : factors) {
    const Eigen::Index L = static_cast<Eigen::Index>(f.levels.size());
    Column c;
    c.kind = Column::Kind::factor;
    c.levels = f.levels;
    c.codes.resize(static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < rows; ++r) {
      c.codes[static_cast<std::size_t>(r)] = static_cast<int>((r / repeat) % L);
    }
    grid.add_column(f.name, std::move(c));
    repeat *= L;
  }
  return grid;
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) {
    throw Error("cli", "io", "cannot write '" + path + "'");
  }
  return file;
}

void write_prediction_csv(std::ostream& os, const Dataset& grid,
                          const Eigen::VectorXd& fit, const Eigen::VectorXd& se,
                          const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const auto& names = grid.column_order();
  for (const auto& n : names) os << n << ',';
  os << "fit,se,ci_lower,ci_upper\n";
  for (Eigen::Index r = 0; r < grid.n_rows(); ++r) {
    for (const auto& n : names) {
      const Column& c = grid.column(n);
      if (c.kind == Column::Kind::numeric) {
        os << format_double(c.values[r]);
      } else {
        os << c.levels[c.codes[r]];
      }
      os << ',';
    }
    os << format_double(fit[r]) << ',' << format_double(se[r]) << ','
       << format_double(lo[r]) << ',' << format_double(hi[r]) << '\n';
  }
}

// default exclusion for "average animal" quantities: random smooths and
// random intercepts
std::vector<std::string> default_random_exclusions(const FittedModel& model) {
  std::vector<std::string> out;
  for (const auto& t : model.M.terms) {
    if (t.spec.kind == TermKind::random_smooth ||
        t.spec.kind == TermKind::random_intercept) {
      out.push_back(t.spec.label);
    }
  }
  return out;
}

Schema make_schema(const std::string& response, const std::string& weight,
                   const std::vector<std::string>& factors,
                   const std::string& schema_path) {
  Schema schema;
  schema.response = response;
  if (!weight.empty()) schema.weight = weight;
  schema.factors = factors;
  if (!schema_path.empty()) {
    std::ifstream in(schema_path);
    if (!in) {
      throw Error("data_model", "io", "cannot open schema '" + schema_path + "'");
    }
    json j;
    try {
      j = json::parse(in);
    } catch (const std::exception& e) {
      throw Error("data_model", "schema", "malformed schema JSON: " + std::string(e.what()));
    }
    if (j.contains("response")) schema.response = j["response"].get<std::string>();
    if (j.contains("weight")) schema.weight = j["weight"].get<std::string>();
    if (j.contains("factors")) {
      for (const auto& f : j["factors"]) schema.factors.push_back(f.get<std::string>());
    }
    if (j.contains("factor_levels")) {
      for (auto it = j["factor_levels"].begin(); it != j["factor_levels"].end(); ++it) {
        schema.factor_levels[it.key()] = it.value().get<std::vector<std::string>>();
      }
    }
  }
  return schema;
}

int cmd_fit(const std::string& data_path, const std::string& formula_text,
            const std::string& family_text, const std::string& criterion_text,
            const std::string& weight, const std::vector<std::string>& factors,
            const std::string& schema_path, const std::string& out_path) {
  const Formula formula = parse_formula(formula_text);
  Schema schema = make_schema(formula.response, weight, factors, schema_path);
  const Dataset data = load_csv(data_path, schema);
  FitOptions opts;
  opts.criterion = parse_criterion(criterion_text);
  const FittedModel model = fit_gam(formula_text, data, Family::parse(family_text), opts);
  if (!out_path.empty()) save_model(model, out_path);
  std::cout << summary_text(summarize(model));
  return 0;
}

int cmd_fit_wood(const std::string& data_path, const std::string& response,
                 const std::string& time_col, const std::string& out_path) {
  Schema schema;
  schema.response = response;
  const Dataset data = load_csv(data_path, schema);
  const WoodFit fit = fit_wood_lactation(data, time_col);

  if (!out_path.empty()) {
    json j;
    j["format_version"] = kArchiveFormatVersion;
    j["kind"] = "wood";
    j["response"] = response;
    j["fingerprint"] = json{{"n_rows", data.n_rows()},
                            {"columns", data.column_order()},
                            {"hash", data.fingerprint_hash()}};
    j["alpha"] = fit.alpha;
    j["delta"] = fit.delta;
    j["kappa"] = fit.kappa;
    j["sigma2"] = fit.sigma2;
    j["df"] = fit.df;
    j["aic"] = fit.aic;
    j["rmse"] = fit.rmse;
    j["rss"] = fit.rss;
    j["n"] = fit.n;
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      throw Error("cli", "io", "cannot write '" + out_path + "'");
    }
    out << j.dump(1) << "\n";
  }

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "parametric lactation curve: alpha=%.6g delta=%.6g kappa=%.6g\n"
                "df = %d   AIC = %.3f   RMSE = %.4f   sigma2 = %.6g\n",
                fit.alpha, fit.delta, fit.kappa, fit.df, fit.aic, fit.rmse, fit.sigma2);
  std::cout << buf;
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& grid_text,
                const std::string& grid_csv, std::vector<std::string> exclude,
                bool no_default_exclude, const std::string& scale, double level,
                bool clamp, const std::string& out_path) {
  const FittedModel model = load_model(model_path);
  if (exclude.empty() && !no_default_exclude && !grid_text.empty()) {
    exclude = default_random_exclusions(model);
  }
  const std::vector<bool> mask = exclusion_mask(model.M, exclude);

  Dataset grid;
  if (!grid_csv.empty()) {
    Schema s;
    // grids have no response; reuse the loader by treating the first model
    // covariate as response is wrong, so read raw columns instead
    std::ifstream probe(grid_csv);
    if (!probe) {
      throw Error("cli", "io", "cannot open grid '" + grid_csv + "'");
    }
    std::string header;
    std::getline(probe, header);
    const auto names = split_csv_record(header);
    if (names.empty()) {
      throw Error("cli", "grid", "grid CSV needs a header");
    }
    s.response = names[0];  // placeholder; loader requires a response column
    grid = load_csv(grid_csv, s);
  } else {
    grid = expand_grid(model, parse_grid(grid_text), mask);
  }

  PredictionRequest req;
  req.newdata = grid;
  req.exclude_terms = exclude;
  req.response_scale = scale == "response";
  req.level = level;
  req.clamp = clamp;
  const PredictionResult pred = predict(model, req);

  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  write_prediction_csv(os, grid, pred.fit, pred.se, pred.ci_lower, pred.ci_upper);
  return 0;
}

int cmd_slopes(const std::string& model_path, const std::string& at_text,
               std::string wrt, std::vector<std::string> exclude,
               bool no_default_exclude, double level, const std::string& out_path) {
  const FittedModel model = load_model(model_path);
  if (exclude.empty() && !no_default_exclude) {
    exclude = default_random_exclusions(model);
  }
  const std::vector<bool> mask = exclusion_mask(model.M, exclude);
  const std::vector<GridAxis> axes = parse_grid(at_text);
  if (wrt.empty()) {
    if (axes.size() != 1) {
      throw Error("cli", "request", "--wrt is required when --at has several covariates",
                  ErrorCode::request);
    }
    wrt = axes[0].name;
  }
  const Dataset grid = expand_grid(model, axes, mask);

  Eigen::VectorXd fit(grid.n_rows()), se(grid.n_rows());
  for (Eigen::Index r = 0; r < grid.n_rows(); ++r) {
    // single-row view of the grid
    Dataset row;
    for (const auto& name : grid.column_order()) {
      const Column& c = grid.column(name);
      Column c1;
      c1.kind = c.kind;
      if (c.kind == Column::Kind::numeric) {
        c1.values = Eigen::VectorXd::Constant(1, c.values[r]);
      } else {
        c1.levels = c.levels;
        c1.codes = {c.codes[r]};
      }
      row.add_column(name, std::move(c1));
    }
    const SlopeEstimate sl = slope(model, row, wrt, exclude);
    fit[r] = sl.slope;
    se[r] = sl.se;
  }
  const double q = normal_quantile(0.5 * (1.0 + level));
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  write_prediction_csv(os, grid, fit, se, fit - q * se, fit + q * se);
  return 0;
}

int cmd_contrasts(const std::string& model_path, double day, const std::string& at_text,
                  const std::string& quantity, const std::string& factor,
                  const std::string& within, const std::string& wrt,
                  std::vector<std::string> exclude, bool no_default_exclude,
                  double level, const std::string& out_path) {
  const FittedModel model = load_model(model_path);
  if (exclude.empty() && !no_default_exclude) {
    exclude = default_random_exclusions(model);
  }

  ContrastRequest req;
  req.factor = factor;
  req.within = within;
  req.quantity = quantity == "slope" ? ContrastQuantity::slope : ContrastQuantity::mean;
  req.exclude_terms = exclude;
  req.level = level;
  if (!at_text.empty()) {
    for (const auto& ax : parse_grid(at_text)) {
      if (ax.count != 1) {
        throw Error("cli", "request", "--at must pin single values for contrasts",
                    ErrorCode::request);
      }
      req.at[ax.name] = ax.lo;
    }
  }
  if (!std::isnan(day)) req.at["day"] = day;
  if (req.at.empty()) {
    throw Error("cli", "request", "contrasts need --day or --at to fix the covariate",
                ErrorCode::request);
  }
  req.wrt = !wrt.empty() ? wrt : req.at.begin()->first;

  const std::vector<ContrastResult> rows = pairwise_contrasts(model, req);
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  os << "within,hypothesis,estimate,se,z,p_raw,p_adjusted,ci_lower,ci_upper\n";
  for (const auto& r : rows) {
    os << r.within_level << ',' << '"' << r.hypothesis << '"' << ','
       << format_double(r.estimate) << ',' << format_double(r.se) << ','
       << format_double(r.z) << ',' << format_double(r.p_raw) << ','
       << format_double(r.p_adjusted) << ',' << format_double(r.ci_lower) << ','
       << format_double(r.ci_upper) << '\n';
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& model_paths, const std::string& out_path) {
  struct Row {
    std::string label;
    double edf, aic, deviance, dev_expl;
    std::string response, hash;
  };
  std::vector<Row> rows;
  for (const auto& path : model_paths) {
    // wood archives are plain JSON with kind == "wood"
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw Error("cli", "io", "cannot open '" + path + "'");
    }
    json j;
    try {
      j = json::parse(in);
    } catch (const std::exception& e) {
      throw Error("cli", "archive", "malformed archive '" + path + "': " + e.what());
    }
    Row row;
    row.label = path;
    if (j.value("kind", "") == "wood") {
      row.edf = j.at("df").get<double>();
      row.aic = j.at("aic").get<double>();
      row.deviance = j.at("rss").get<double>();
      row.dev_expl = std::numeric_limits<double>::quiet_NaN();
      row.response = j.at("response").get<std::string>();
      row.hash = j.at("fingerprint").at("hash").get<std::string>();
    } else {
      const FittedModel m = load_model(path);
      row.edf = m.edf_total;
      row.aic = m.aic;
      row.deviance = m.deviance_value;
      row.dev_expl = m.dev_explained;
      row.response = m.data.response_name();
      row.hash = m.data.fingerprint_hash();
    }
    rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].response != rows[0].response || rows[i].hash != rows[0].hash) {
      throw Error("cli", "compare",
                  "models were fitted to different responses or data; AIC is not comparable");
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.aic < b.aic; });

  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  os << "model,edf,aic,deviance,dev_explained\n";
  for (const auto& r : rows) {
    os << r.label << ',' << format_double(r.edf) << ',' << format_double(r.aic) << ','
       << format_double(r.deviance) << ',';
    if (std::isfinite(r.dev_expl)) os << format_double(r.dev_expl);
    os << '\n';
  }
  return 0;
}

int cmd_check(const std::string& model_path, std::uint64_t seed, int perms) {
  const FittedModel model = load_model(model_path);
  const auto rows = kcheck(model, seed, perms);
  std::cout << "term,k,edf,ratio,p,flag\n";
  for (const auto& r : rows) {
    std::cout << r.label << ',' << r.k_per_level << ',' << format_double(r.edf) << ','
              << format_double(r.ratio) << ',' << format_double(r.p) << ','
              << (r.flagged ? "LOW-K" : "ok") << '\n';
  }
  return 0;
}

int cmd_simulate(const std::string& kind, long n, std::uint64_t seed,
                 const std::string& out_path) {
  const Dataset d = simulate_dataset(kind, n, seed);
  write_csv(d, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"penalized-spline additive model engine"};
  app.require_subcommand(1);

  // fit
  std::string data_path, formula_text, family_text = "gaussian";
  std::string criterion_text = "reml", weight, schema_path, out_path;
  std::vector<std::string> factors;
  auto* fit = app.add_subcommand("fit", "fit a model and write a model archive");
  fit->add_option("--data", data_path, "input CSV")->required();
  fit->add_option("--formula", formula_text, "model formula")->required();
  fit->add_option("--family", family_text, "gaussian | gamma(link=log) | tweedie(link=log[,p=..])");
  fit->add_option("--criterion", criterion_text, "reml | gcv");
  fit->add_option("--weight", weight, "observation-weight column");
  fit->add_option("--factor", factors, "declare a factor column (repeatable)");
  fit->add_option("--schema", schema_path, "JSON schema sidecar");
  fit->add_option("--out", out_path, "model archive path");

  // fit-wood
  std::string wood_response = "fat", wood_time = "week";
  auto* fw = app.add_subcommand("fit-wood", "fit the parametric lactation curve");
  fw->add_option("--data", data_path, "input CSV")->required();
  fw->add_option("--response", wood_response, "response column");
  fw->add_option("--time", wood_time, "time column");
  fw->add_option("--out", out_path, "archive path");

  // predict
  std::string model_path, grid_text, grid_csv, scale = "response";
  std::vector<std::string> exclude;
  bool no_default_exclude = false, clamp = false;
  double level = 0.95;
  auto* pr = app.add_subcommand("predict", "evaluate the fitted curves on a grid");
  pr->add_option("--model", model_path, "model archive")->required();
  pr->add_option("--grid", grid_text, "var=lo:hi:n[,var2=...] range grid");
  pr->add_option("--grid-csv", grid_csv, "grid rows from a CSV file");
  pr->add_option("--exclude", exclude, "terms to exclude (default: random terms)");
  pr->add_flag("--no-default-exclude", no_default_exclude,
               "keep random smooths/intercepts in predictions");
  pr->add_option("--scale", scale, "link | response");
  pr->add_option("--level", level, "credible level");
  pr->add_flag("--clamp", clamp, "clamp out-of-range covariates to the training span");
  pr->add_option("--out", out_path, "output CSV ('-' = stdout)");

  // slopes
  std::string at_text, wrt;
  auto* sl = app.add_subcommand("slopes", "finite-difference growth rates");
  sl->add_option("--model", model_path, "model archive")->required();
  sl->add_option("--at", at_text, "point, e.g. day=20")->required();
  sl->add_option("--wrt", wrt, "covariate to differentiate");
  sl->add_option("--exclude", exclude, "terms to exclude (default: random terms)");
  sl->add_flag("--no-default-exclude", no_default_exclude, "keep random terms");
  sl->add_option("--level", level, "credible level");
  sl->add_option("--out", out_path, "output CSV");

  // contrasts
  double day = std::numeric_limits<double>::quiet_NaN();
  std::string quantity = "mean", factor_name, within;
  auto* co = app.add_subcommand("contrasts", "pairwise treatment comparisons");
  co->add_option("--model", model_path, "model archive")->required();
  co->add_option("--day", day, "fixed value of the 'day' covariate");
  co->add_option("--at", at_text, "fixed covariates, e.g. day=78");
  co->add_option("--quantity", quantity, "mean | slope");
  co->add_option("--factor", factor_name, "compared factor")->required();
  co->add_option("--within", within, "stratifying factor");
  co->add_option("--wrt", wrt, "slope covariate");
  co->add_option("--exclude", exclude, "terms to exclude (default: random terms)");
  co->add_flag("--no-default-exclude", no_default_exclude, "keep random terms");
  co->add_option("--level", level, "credible level");
  co->add_option("--out", out_path, "output CSV");

  // compare
  std::vector<std::string> model_paths;
  auto* cm = app.add_subcommand("compare", "AIC/EDF comparison of fitted models");
  cm->add_option("--models", model_paths, "model archives")->required()->expected(-1);
  cm->add_option("--out", out_path, "output CSV");

  // check
  std::uint64_t seed = 42;
  int perms = 1000;
  auto* ck = app.add_subcommand("check", "basis-dimension diagnostics");
  ck->add_option("--model", model_path, "model archive")->required();
  ck->add_option("--seed", seed, "permutation seed");
  ck->add_option("--perms", perms, "number of permutations");

  // simulate
  std::string sim_kind = "sin";
  long sim_n = 100;
  auto* sm = app.add_subcommand("simulate", "write a seeded synthetic dataset");
  sm->add_option("--kind", sim_kind, "sin | lactation | growth");
  sm->add_option("--n", sim_n, "number of rows");
  sm->add_option("--seed", seed, "random seed");
  sm->add_option("--out", out_path, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      return cmd_fit(data_path, formula_text, family_text, criterion_text, weight,
                     factors, schema_path, out_path);
    }
    if (fw->parsed()) {
      return cmd_fit_wood(data_path, wood_response, wood_time, out_path);
    }
    if (pr->parsed()) {
      return cmd_predict(model_path, grid_text, grid_csv, exclude, no_default_exclude,
                         scale, level, clamp, out_path);
    }
    if (sl->parsed()) {
      return cmd_slopes(model_path, at_text, wrt, exclude, no_default_exclude, level,
                        out_path);
    }
    if (co->parsed()) {
      return cmd_contrasts(model_path, day, at_text, quantity, factor_name, within, wrt,
                           exclude, no_default_exclude, level, out_path);
    }
    if (cm->parsed()) {
      return cmd_compare(model_paths, out_path);
    }
    if (ck->parsed()) {
      return cmd_check(model_path, seed, perms);
    }
    if (sm->parsed()) {
      return cmd_simulate(sim_kind, sim_n, seed, out_path);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "ERROR:cli:internal: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
