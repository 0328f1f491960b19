#include "pgam/archive.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "pgam/error.hpp"

namespace pgam {

using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const std::vector<double> data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error("cli", "archive", "matrix payload size mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[at++];
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from(const json& j) {
  const std::vector<double> data = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(data.data(),
                                           static_cast<Eigen::Index>(data.size()));
}

const char* term_kind_name(TermKind k) {
  switch (k) {
    case TermKind::intercept: return "intercept";
    case TermKind::main: return "main";
    case TermKind::linear: return "linear";
    case TermKind::factor: return "factor";
    case TermKind::smooth: return "smooth";
    case TermKind::by_smooth: return "by_smooth";
    case TermKind::fs_interaction: return "fs_interaction";
    case TermKind::random_smooth: return "random_smooth";
    case TermKind::random_intercept: return "random_intercept";
  }
  return "?";
}

TermKind term_kind_from(const std::string& s) {
  if (s == "intercept") return TermKind::intercept;
  if (s == "main") return TermKind::main;
  if (s == "linear") return TermKind::linear;
  if (s == "factor") return TermKind::factor;
  if (s == "smooth") return TermKind::smooth;
  if (s == "by_smooth") return TermKind::by_smooth;
  if (s == "fs_interaction") return TermKind::fs_interaction;
  if (s == "random_smooth") return TermKind::random_smooth;
  if (s == "random_intercept") return TermKind::random_intercept;
  throw Error("cli", "archive", "unknown term kind '" + s + "'");
}

json dataset_json(const Dataset& data) {
  json j;
  j["n_rows"] = data.n_rows();
  j["response"] = data.response_name();
  if (data.weight_name()) j["weight"] = *data.weight_name();
  json cols = json::array();
  for (const auto& name : data.column_order()) {
    const Column& c = data.column(name);
    json jc;
    jc["name"] = name;
    if (c.kind == Column::Kind::numeric) {
      jc["kind"] = "numeric";
      jc["values"] = vector_json(c.values);
    } else {
      jc["kind"] = "factor";
      jc["levels"] = c.levels;
      jc["codes"] = c.codes;
    }
    cols.push_back(std::move(jc));
  }
  j["columns"] = std::move(cols);
  return j;
}

Dataset dataset_from(const json& j) {
  Dataset data;
  for (const auto& jc : j.at("columns")) {
    Column c;
    if (jc.at("kind") == "numeric") {
      c.kind = Column::Kind::numeric;
      c.values = vector_from(jc.at("values"));
    } else {
      c.kind = Column::Kind::factor;
      c.levels = jc.at("levels").get<std::vector<std::string>>();
      c.codes = jc.at("codes").get<std::vector<int>>();
    }
    data.add_column(jc.at("name").get<std::string>(), std::move(c));
  }
  data.set_response(j.at("response").get<std::string>());
  if (j.contains("weight")) data.set_weight(j.at("weight").get<std::string>());
  return data;
}

json basis_json(const Basis& b) {
  json j;
  j["kind"] = b.spec().kind == BasisKind::tprs ? "tprs" : "bspline";
  j["k"] = b.spec().k;
  j["degree"] = b.spec().degree;
  j["covariate"] = b.spec().covariate;
  j["lo"] = b.support_lo();
  j["hi"] = b.support_hi();
  if (b.spec().kind == BasisKind::bspline) {
    j["knots"] = b.knots();
  } else {
    j["centers"] = vector_json(b.tprs().centers);
    j["eigvecs"] = matrix_json(b.tprs().eigvecs);
    j["eigvals"] = vector_json(b.tprs().eigvals);
    j["null_proj"] = matrix_json(b.tprs().null_proj);
  }
  return j;
}

Basis basis_from(const json& j) {
  BasisSpec spec;
  spec.kind = j.at("kind") == "tprs" ? BasisKind::tprs : BasisKind::bspline;
  spec.k = j.at("k").get<int>();
  spec.degree = j.at("degree").get<int>();
  spec.covariate = j.at("covariate").get<std::string>();
  std::vector<double> knots;
  TprsArtifacts tprs;
  if (spec.kind == BasisKind::bspline) {
    knots = j.at("knots").get<std::vector<double>>();
  } else {
    tprs.centers = vector_from(j.at("centers"));
    tprs.eigvecs = matrix_from(j.at("eigvecs"));
    tprs.eigvals = vector_from(j.at("eigvals"));
    tprs.null_proj = matrix_from(j.at("null_proj"));
  }
  return Basis::restore(spec, std::move(knots), std::move(tprs),
                        j.at("lo").get<double>(), j.at("hi").get<double>());
}

json term_json(const TermBlock& t) {
  json j;
  j["kind"] = term_kind_name(t.spec.kind);
  j["label"] = t.spec.label;
  j["covariate"] = t.spec.covariate;
  j["factor_names"] = t.spec.factors;
  j["k"] = t.spec.k;
  j["basis_kind"] = t.spec.basis_kind;
  j["col_start"] = t.col_start;
  j["width"] = t.width;
  j["per_level_cols"] = t.per_level_cols;
  j["levels_total"] = t.levels_total;
  j["centered_warning"] = t.centered_warning;
  json facs = json::array();
  for (const auto& f : t.factors) {
    facs.push_back(json{{"name", f.name}, {"levels", f.levels}});
  }
  j["factors"] = std::move(facs);
  if (t.basis) j["basis"] = basis_json(*t.basis);
  if (t.Z.size() > 0) j["Z"] = matrix_json(t.Z);
  if (!t.Z_level.empty()) {
    json zl = json::array();
    for (const auto& z : t.Z_level) zl.push_back(matrix_json(z));
    j["Z_level"] = std::move(zl);
  }
  if (t.reparam.size() > 0) j["reparam"] = matrix_json(t.reparam);
  if (t.cross.size() > 0) j["cross"] = matrix_json(t.cross);
  return j;
}

TermBlock term_from(const json& j) {
  TermBlock t;
  t.spec.kind = term_kind_from(j.at("kind").get<std::string>());
  t.spec.label = j.at("label").get<std::string>();
  t.spec.covariate = j.at("covariate").get<std::string>();
  t.spec.factors = j.at("factor_names").get<std::vector<std::string>>();
  t.spec.k = j.at("k").get<int>();
  t.spec.basis_kind = j.at("basis_kind").get<std::string>();
  t.col_start = j.at("col_start").get<int>();
  t.width = j.at("width").get<int>();
  t.per_level_cols = j.at("per_level_cols").get<int>();
  t.levels_total = j.at("levels_total").get<int>();
  t.centered_warning = j.at("centered_warning").get<bool>();
  for (const auto& jf : j.at("factors")) {
    t.factors.push_back({jf.at("name").get<std::string>(),
                         jf.at("levels").get<std::vector<std::string>>()});
  }
  if (j.contains("basis")) t.basis = basis_from(j.at("basis"));
  if (j.contains("Z")) t.Z = matrix_from(j.at("Z"));
  if (j.contains("Z_level")) {
    for (const auto& jz : j.at("Z_level")) t.Z_level.push_back(matrix_from(jz));
  }
  if (j.contains("reparam")) t.reparam = matrix_from(j.at("reparam"));
  if (j.contains("cross")) t.cross = matrix_from(j.at("cross"));
  return t;
}

}  // namespace

void save_model(const FittedModel& model, const std::string& path) {
  json j;
  j["format_version"] = kArchiveFormatVersion;
  j["formula"] = model.formula.text;
  j["criterion"] = criterion_name(model.criterion);
  j["family"] = json{{"kind", model.family.name()},
                     {"power", model.family.power},
                     {"power_fixed", model.family.power_fixed}};
  j["fingerprint"] = json{{"n_rows", model.data.n_rows()},
                          {"columns", model.data.column_order()},
                          {"hash", model.data.fingerprint_hash()}};
  j["data"] = dataset_json(model.data);

  json terms = json::array();
  for (const auto& t : model.M.terms) terms.push_back(term_json(t));
  j["terms"] = std::move(terms);
  j["n_parametric"] = model.M.n_parametric;
  j["total_penalty_null_dim"] = model.M.total_penalty_null_dim;

  json pens = json::array();
  for (const auto& pg : model.M.penalties) {
    pens.push_back(json{{"term_index", pg.term_index},
                        {"col_start", pg.col_start},
                        {"rank", pg.rank},
                        {"label", pg.label},
                        {"logdet_plus", pg.logdet_plus}});
  }
  j["penalties"] = std::move(pens);

  json fit;
  fit["beta"] = vector_json(model.beta);
  fit["lambdas"] = vector_json(model.lambdas);
  fit["phi"] = model.phi;
  fit["Vbeta"] = matrix_json(model.Vbeta);
  fit["edf_col"] = vector_json(model.edf_col);
  fit["edf_total"] = model.edf_total;
  fit["edf_by_term"] = model.edf_by_term;
  fit["aic"] = model.aic;
  fit["deviance"] = model.deviance_value;
  fit["null_deviance"] = model.null_deviance;
  fit["dev_explained"] = model.dev_explained;
  fit["rmse"] = model.rmse;
  if (std::isfinite(model.criterion_value)) fit["criterion_value"] = model.criterion_value;
  fit["max_abs_grad"] = model.max_abs_grad;
  fit["log_lik"] = model.log_lik;
  fit["iterations"] = model.inner.iterations;
  fit["converged"] = model.inner.converged;
  j["fit"] = std::move(fit);

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cli", "io", "cannot write '" + path + "'");
  }
  out << j.dump(1) << "\n";
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cli", "io", "cannot open model archive '" + path + "'");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw Error("cli", "archive", "malformed model archive: " + std::string(e.what()));
  }
  const int version = j.value("format_version", -1);
  if (version != kArchiveFormatVersion) {
    throw Error("cli", "archive",
                "unsupported archive format version " + std::to_string(version) +
                    " (expected " + std::to_string(kArchiveFormatVersion) + ")");
  }

  FittedModel m;
  m.formula = parse_formula(j.at("formula").get<std::string>());
  m.criterion = parse_criterion(j.at("criterion").get<std::string>());
  m.family = Family::parse(j.at("family").at("kind").get<std::string>());
  m.family.power = j.at("family").at("power").get<double>();
  m.family.power_fixed = j.at("family").at("power_fixed").get<bool>();
  m.data = dataset_from(j.at("data"));

  const auto& fp = j.at("fingerprint");
  if (fp.at("hash").get<std::string>() != m.data.fingerprint_hash()) {
    throw Error("cli", "archive", "archive data fingerprint mismatch");
  }

  for (const auto& jt : j.at("terms")) m.M.terms.push_back(term_from(jt));
  m.M.n_parametric = j.at("n_parametric").get<int>();
  m.M.total_penalty_null_dim = j.at("total_penalty_null_dim").get<int>();
  for (const auto& jp : j.at("penalties")) {
    PenaltyGroup pg;
    pg.term_index = jp.at("term_index").get<int>();
    pg.col_start = jp.at("col_start").get<int>();
    pg.rank = jp.at("rank").get<int>();
    pg.label = jp.at("label").get<std::string>();
    pg.logdet_plus = jp.at("logdet_plus").get<double>();
    m.M.penalties.push_back(std::move(pg));
  }

  const auto& fit = j.at("fit");
  m.beta = vector_from(fit.at("beta"));
  m.lambdas = vector_from(fit.at("lambdas"));
  m.phi = fit.at("phi").get<double>();
  m.Vbeta = matrix_from(fit.at("Vbeta"));
  m.edf_col = vector_from(fit.at("edf_col"));
  m.edf_total = fit.at("edf_total").get<double>();
  m.edf_by_term = fit.at("edf_by_term").get<std::vector<double>>();
  m.aic = fit.at("aic").get<double>();
  m.deviance_value = fit.at("deviance").get<double>();
  m.null_deviance = fit.at("null_deviance").get<double>();
  m.dev_explained = fit.at("dev_explained").get<double>();
  m.rmse = fit.at("rmse").get<double>();
  m.criterion_value = fit.contains("criterion_value")
                          ? fit.at("criterion_value").get<double>()
                          : std::numeric_limits<double>::quiet_NaN();
  m.max_abs_grad = fit.at("max_abs_grad").get<double>();
  m.log_lik = fit.at("log_lik").get<double>();

  // reconstruct the training design and fitted values from the artifacts
  const std::vector<bool> exclude(m.M.terms.size(), false);
  m.M.X = build_rows(m.M, m.data, exclude, false);
  m.inner.beta = m.beta;
  m.inner.eta = m.M.X * m.beta;
  m.inner.mu.resize(m.inner.eta.size());
  for (Eigen::Index i = 0; i < m.inner.eta.size(); ++i) {
    m.inner.mu[i] = link_invert(m.family, m.inner.eta[i]);
  }
  m.inner.iterations = fit.at("iterations").get<int>();
  m.inner.converged = fit.at("converged").get<bool>();
  m.inner.deviance = m.deviance_value;
  return m;
}

}  // namespace pgam
