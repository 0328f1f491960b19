#ifndef PGAM_DATASET_HPP_
#define PGAM_DATASET_HPP_

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pgam {

/// One typed column: either a numeric vector or factor codes with an
/// ordered label list. Factor level order is first appearance unless a
/// schema pins it.
struct Column {
  enum class Kind { numeric, factor };

  Kind kind = Kind::numeric;
  Eigen::VectorXd values;             // numeric columns
  std::vector<int> codes;             // factor columns, index into levels
  std::vector<std::string> levels;    // factor columns only

  Eigen::Index size() const {
    return kind == Kind::numeric ? values.size()
                                 : static_cast<Eigen::Index>(codes.size());
  }
};

/// Column-kind declarations used when reading a CSV. Columns not listed as
/// factors are parsed as numeric when every token parses as a double, and as
/// factors otherwise. `factor_levels` pins an explicit level order.
struct Schema {
  std::string response;
  std::optional<std::string> weight;
  std::vector<std::string> factors;
  std::map<std::string, std::vector<std::string>> factor_levels;
};

/// Immutable after load; shared read-only across parallel fits.
class Dataset {
 public:
  Dataset() = default;

  Eigen::Index n_rows() const { return n_rows_; }
  const std::string& response_name() const { return response_name_; }
  const std::optional<std::string>& weight_name() const { return weight_name_; }

  bool has_column(const std::string& name) const;
  const Column& column(const std::string& name) const;
  const std::vector<std::string>& column_order() const { return order_; }

  const Eigen::VectorXd& response() const;
  /// All ones when no weight column was declared.
  Eigen::VectorXd weights() const;

  void add_column(const std::string& name, Column col);
  void set_response(const std::string& name);
  void set_weight(const std::string& name);

  /// Row-count/column-name/content hash used to fingerprint model archives.
  std::string fingerprint_hash() const;

 private:
  void validate() const;

  std::map<std::string, Column> columns_;
  std::vector<std::string> order_;
  Eigen::Index n_rows_ = 0;
  std::string response_name_;
  std::optional<std::string> weight_name_;

  friend Dataset load_csv(const std::string&, const Schema&);
};

Dataset load_csv(const std::string& path, const Schema& schema);
void write_csv(const Dataset& data, const std::string& path);

/// RFC-4180 field splitting of one logical record; exposed for the loader
/// and its tests.
std::vector<std::string> split_csv_record(const std::string& line);

}  // namespace pgam

#endif  // PGAM_DATASET_HPP_
