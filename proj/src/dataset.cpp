#include "pgam/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pgam/error.hpp"
#include "pgam/mathutil.hpp"

namespace pgam {

namespace {

bool parse_number(const std::string& tok, double& out) {
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::vector<std::string> split_csv_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c == '\r') {
      // tolerated before \n; the caller strips the \n
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

bool Dataset::has_column(const std::string& name) const {
  return columns_.count(name) > 0;
}

const Column& Dataset::column(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) {
    throw Error("data_model", "schema", "unknown column '" + name + "'");
  }
  return it->second;
}

const Eigen::VectorXd& Dataset::response() const {
  return column(response_name_).values;
}

Eigen::VectorXd Dataset::weights() const {
  if (!weight_name_) return Eigen::VectorXd::Ones(n_rows_);
  return column(*weight_name_).values;
}

void Dataset::add_column(const std::string& name, Column col) {
  if (n_rows_ == 0 && columns_.empty()) {
    n_rows_ = col.size();
  } else if (col.size() != n_rows_) {
    throw Error("data_model", "validation",
                "column '" + name + "' has " + std::to_string(col.size()) +
                    " rows, expected " + std::to_string(n_rows_));
  }
  if (!columns_.count(name)) order_.push_back(name);
  columns_[name] = std::move(col);
}

void Dataset::set_response(const std::string& name) {
  const Column& col = column(name);
  if (col.kind != Column::Kind::numeric) {
    throw Error("data_model", "validation", "response '" + name + "' must be numeric");
  }
  if (!col.values.allFinite()) {
    throw Error("data_model", "validation", "response '" + name + "' has non-finite values");
  }
  response_name_ = name;
}

void Dataset::set_weight(const std::string& name) {
  const Column& col = column(name);
  if (col.kind != Column::Kind::numeric) {
    throw Error("data_model", "validation", "weight '" + name + "' must be numeric");
  }
  for (Eigen::Index i = 0; i < col.values.size(); ++i) {
    const double w = col.values[i];
    if (!std::isfinite(w) || w <= 0.0) {
      throw Error("data_model", "validation",
                  "weight '" + name + "' must be strictly positive and finite (row " +
                      std::to_string(i + 1) + ")");
    }
  }
  weight_name_ = name;
}

std::string Dataset::fingerprint_hash() const {
  std::string bytes = std::to_string(n_rows_);
  for (const auto& name : order_) {
    const Column& col = columns_.at(name);
    bytes += '|';
    bytes += name;
    if (col.kind == Column::Kind::numeric) {
      for (Eigen::Index i = 0; i < col.values.size(); ++i) {
        bytes += ',';
        bytes += format_double(col.values[i]);
      }
    } else {
      for (const auto& lev : col.levels) {
        bytes += ';';
        bytes += lev;
      }
      for (int code : col.codes) {
        bytes += ',';
        bytes += std::to_string(code);
      }
    }
  }
  return to_hex(fnv1a64(bytes));
}

Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("data_model", "io", "cannot open '" + path + "'");
  }
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

  // Split into logical records, respecting quoted newlines.
  std::vector<std::string> records;
  {
    std::string cur;
    bool quoted = false;
    for (char c : content) {
      if (c == '"') quoted = !quoted;
      if (c == '\n' && !quoted) {
        records.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) records.push_back(cur);
  }
  if (records.empty()) {
    throw Error("data_model", "parse", "'" + path + "' is empty; header row required");
  }

  const std::vector<std::string> header = split_csv_record(records[0]);
  const std::size_t ncol = header.size();
  std::vector<std::vector<std::string>> cells(ncol);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].empty() && r + 1 == records.size()) break;  // trailing newline
    std::vector<std::string> fields = split_csv_record(records[r]);
    if (fields.size() != ncol) {
      throw Error("data_model", "parse",
                  "row " + std::to_string(r) + " of '" + path + "' has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(ncol));
    }
    for (std::size_t c = 0; c < ncol; ++c) cells[c].push_back(std::move(fields[c]));
  }

  auto declared_factor = [&](const std::string& name) {
    return std::find(schema.factors.begin(), schema.factors.end(), name) !=
           schema.factors.end();
  };

  Dataset data;
  for (std::size_t c = 0; c < ncol; ++c) {
    const std::string& name = header[c];
    const auto& raw = cells[c];
    bool numeric_ok = !declared_factor(name);
    std::vector<double> parsed(raw.size());
    if (numeric_ok) {
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!parse_number(raw[i], parsed[i]) || !std::isfinite(parsed[i])) {
          numeric_ok = false;
          break;
        }
      }
    }
    Column col;
    if (numeric_ok) {
      col.kind = Column::Kind::numeric;
      col.values = Eigen::Map<const Eigen::VectorXd>(parsed.data(),
                                                     static_cast<Eigen::Index>(parsed.size()));
    } else {
      col.kind = Column::Kind::factor;
      auto pinned = schema.factor_levels.find(name);
      if (pinned != schema.factor_levels.end()) col.levels = pinned->second;
      col.codes.reserve(raw.size());
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].empty()) {
          throw Error("data_model", "parse",
                      "missing value in column '" + name + "' at data row " +
                          std::to_string(i + 1));
        }
        auto it = std::find(col.levels.begin(), col.levels.end(), raw[i]);
        if (it == col.levels.end()) {
          if (pinned != schema.factor_levels.end()) {
            throw Error("data_model", "validation",
                        "value '" + raw[i] + "' in column '" + name +
                            "' is not a declared level");
          }
          col.levels.push_back(raw[i]);
          it = std::prev(col.levels.end());
        }
        col.codes.push_back(static_cast<int>(it - col.levels.begin()));
      }
    }
    data.add_column(name, std::move(col));
  }

  // Re-check columns that a strict numeric parse rejected: a declared numeric
  // column with a bad token is a parse error, not a silent factor.
  for (std::size_t c = 0; c < ncol; ++c) {
    const std::string& name = header[c];
    if (declared_factor(name)) continue;
    if (name != schema.response && name != schema.weight.value_or("")) continue;
    if (data.column(name).kind == Column::Kind::factor) {
      const auto& raw = cells[c];
      for (std::size_t i = 0; i < raw.size(); ++i) {
        double v;
        if (!parse_number(raw[i], v)) {
          throw Error("data_model", "parse",
                      "non-numeric token '" + raw[i] + "' in column '" + name +
                          "' at data row " + std::to_string(i + 1));
        }
      }
    }
  }

  if (!data.has_column(schema.response)) {
    throw Error("data_model", "schema", "response column '" + schema.response +
                                            "' not present in '" + path + "'");
  }
  data.set_response(schema.response);
  if (schema.weight) {
    if (!data.has_column(*schema.weight)) {
      throw Error("data_model", "schema",
                  "weight column '" + *schema.weight + "' not present in '" + path + "'");
    }
    data.set_weight(*schema.weight);
  }
  for (const auto& f : schema.factors) {
    if (!data.has_column(f)) {
      throw Error("data_model", "schema",
                  "factor column '" + f + "' not present in '" + path + "'");
    }
  }
  return data;
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("data_model", "io", "cannot write '" + path + "'");
  }
  const auto& names = data.column_order();
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c) out << ',';
    out << csv_quote(names[c]);
  }
  out << '\n';
  for (Eigen::Index r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (c) out << ',';
      const Column& col = data.column(names[c]);
      if (col.kind == Column::Kind::numeric) {
        out << format_double(col.values[r]);
      } else {
        out << csv_quote(col.levels[col.codes[r]]);
      }
    }
    out << '\n';
  }
}

}  // namespace pgam
