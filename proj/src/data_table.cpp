#include "topicdiv/data_table.hpp"

#include <stdexcept>
#include <unordered_map>

namespace topicdiv {

void DataTable::check_rows(Eigen::Index n, const std::string& name) {
  if (n_rows_ < 0) {
    n_rows_ = n;
    return;
  }
  if (n != n_rows_) {
    throw std::invalid_argument("DataTable: column '" + name + "' has " + std::to_string(n) +
                                " rows, table has " + std::to_string(n_rows_));
  }
}

void DataTable::add_numeric(const std::string& name, Eigen::VectorXd values) {
  if (numeric_.count(name) || categorical_.count(name)) {
    throw std::invalid_argument("DataTable: duplicate column '" + name + "'");
  }
  check_rows(values.size(), name);
  numeric_.emplace(name, std::move(values));
}

void DataTable::add_categorical(const std::string& name, std::vector<int> codes,
                                std::vector<std::string> labels) {
  if (numeric_.count(name) || categorical_.count(name)) {
    throw std::invalid_argument("DataTable: duplicate column '" + name + "'");
  }
  check_rows(static_cast<Eigen::Index>(codes.size()), name);
  for (int c : codes) {
    if (c < 0 || static_cast<std::size_t>(c) >= labels.size()) {
      throw std::invalid_argument("DataTable: categorical '" + name + "' has code " +
                                  std::to_string(c) + " outside its label set");
    }
  }
  categorical_.emplace(name, Categorical{std::move(codes), std::move(labels)});
}

void DataTable::add_categorical(const std::string& name, const std::vector<std::string>& values) {
  std::vector<int> codes;
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> index;
  codes.reserve(values.size());
  for (const std::string& v : values) {
    const auto [it, inserted] = index.emplace(v, static_cast<int>(labels.size()));
    if (inserted) labels.push_back(v);
    codes.push_back(it->second);
  }
  add_categorical(name, std::move(codes), std::move(labels));
}

const Eigen::VectorXd& DataTable::numeric(const std::string& name) const {
  const auto it = numeric_.find(name);
  if (it == numeric_.end()) {
    throw std::invalid_argument("DataTable: no numeric column '" + name + "'");
  }
  return it->second;
}

Eigen::VectorXd& DataTable::numeric_mut(const std::string& name) {
  const auto it = numeric_.find(name);
  if (it == numeric_.end()) {
    throw std::invalid_argument("DataTable: no numeric column '" + name + "'");
  }
  return it->second;
}

const std::vector<int>& DataTable::codes(const std::string& name) const {
  const auto it = categorical_.find(name);
  if (it == categorical_.end()) {
    throw std::invalid_argument("DataTable: no categorical column '" + name + "'");
  }
  return it->second.codes;
}

const std::vector<std::string>& DataTable::labels(const std::string& name) const {
  const auto it = categorical_.find(name);
  if (it == categorical_.end()) {
    throw std::invalid_argument("DataTable: no categorical column '" + name + "'");
  }
  return it->second.labels;
}

std::vector<std::string> DataTable::numeric_names() const {
  std::vector<std::string> names;
  names.reserve(numeric_.size());
  for (const auto& [name, col] : numeric_) names.push_back(name);
  return names;
}

std::vector<std::string> DataTable::categorical_names() const {
  std::vector<std::string> names;
  names.reserve(categorical_.size());
  for (const auto& [name, col] : categorical_) names.push_back(name);
  return names;
}

DataTable DataTable::select_rows(const std::vector<Eigen::Index>& keep) const {
  DataTable out;
  for (const auto& [name, col] : numeric_) {
    Eigen::VectorXd sub(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (keep[i] < 0 || keep[i] >= n_rows_) {
        throw std::out_of_range("DataTable::select_rows: index out of range");
      }
      sub[static_cast<Eigen::Index>(i)] = col[keep[i]];
    }
    out.add_numeric(name, std::move(sub));
  }
  for (const auto& [name, cat] : categorical_) {
    std::vector<int> sub;
    sub.reserve(keep.size());
    for (Eigen::Index idx : keep) sub.push_back(cat.codes[static_cast<std::size_t>(idx)]);
    out.add_categorical(name, std::move(sub), cat.labels);
  }
  return out;
}

}  // namespace topicdiv
