#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace topicdiv {

// Column store backing the estimators: named numeric columns plus named
// categorical columns (dense integer codes with string labels). All columns
// share one row count; NaN marks missing numeric values.
class DataTable {
 public:
  Eigen::Index rows() const { return n_rows_; }

  void add_numeric(const std::string& name, Eigen::VectorXd values);
  void add_categorical(const std::string& name, std::vector<int> codes,
                       std::vector<std::string> labels);
  // Factorizes by order of first appearance.
  void add_categorical(const std::string& name, const std::vector<std::string>& values);

  bool has_numeric(const std::string& name) const { return numeric_.count(name) > 0; }
  bool has_categorical(const std::string& name) const { return categorical_.count(name) > 0; }

  const Eigen::VectorXd& numeric(const std::string& name) const;
  Eigen::VectorXd& numeric_mut(const std::string& name);
  const std::vector<int>& codes(const std::string& name) const;
  const std::vector<std::string>& labels(const std::string& name) const;

  std::vector<std::string> numeric_names() const;
  std::vector<std::string> categorical_names() const;

  DataTable select_rows(const std::vector<Eigen::Index>& keep) const;

 private:
  struct Categorical {
    std::vector<int> codes;
    std::vector<std::string> labels;
  };

  void check_rows(Eigen::Index n, const std::string& name);

  Eigen::Index n_rows_ = -1;
  std::map<std::string, Eigen::VectorXd> numeric_;
  std::map<std::string, Categorical> categorical_;
};

}  // namespace topicdiv
