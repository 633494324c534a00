#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlnira/core.hpp"
#include "mlnira/csv.hpp"

namespace mlnira {

// Raw survey responses: small non-negative integers, one group label per row.
struct OrdinalDataset {
  std::vector<std::string> node_names;
  std::vector<std::string> group_ids;
  Eigen::MatrixXi responses;  // rows x nodes, each cell in [0, max_level]
  int max_level = 1;
};

// Dichotomized responses plus the group bookkeeping every estimator needs.
// Groups are ordered by first appearance in the data.
struct BinaryDataset {
  std::vector<std::string> node_names;
  std::vector<std::string> group_ids;
  Eigen::MatrixXi responses;  // cells in {0,1}
  std::vector<std::string> group_names;
  std::vector<int> group_index;  // row -> ordinal into group_names
};

// One nodewise design: group-mean-centered predictors, untouched outcome.
struct CenteredDesign {
  std::string outcome_node;
  std::vector<std::string> predictor_names;
  Eigen::MatrixXd predictors;
  Eigen::VectorXd outcome;
  std::vector<int> group_index;
  int n_groups = 1;
};

inline int find_node(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown node '" + name + "'");
  return static_cast<int>(it - names.begin());
}

namespace detail {

inline void index_groups(const std::vector<std::string>& ids,
                         std::vector<std::string>& names,
                         std::vector<int>& index) {
  names.clear();
  index.clear();
  index.reserve(ids.size());
  std::unordered_map<std::string, int> seen;
  for (const auto& id : ids) {
    auto it = seen.find(id);
    if (it == seen.end()) {
      it = seen.emplace(id, static_cast<int>(names.size())).first;
      names.push_back(id);
    }
    index.push_back(it->second);
  }
}

}  // namespace detail

inline BinaryDataset make_binary_dataset(std::vector<std::string> node_names,
                                         std::vector<std::string> group_ids,
                                         Eigen::MatrixXi responses) {
  if (static_cast<Eigen::Index>(group_ids.size()) != responses.rows()) {
    throw ContractError("group_ids length must equal row count");
  }
  if (static_cast<Eigen::Index>(node_names.size()) != responses.cols()) {
    throw ContractError("node_names length must equal column count");
  }
  if (group_ids.empty()) throw DataError("dataset has no rows");
  for (Eigen::Index i = 0; i < responses.rows(); ++i) {
    for (Eigen::Index j = 0; j < responses.cols(); ++j) {
      int v = responses(i, j);
      if (v != 0 && v != 1) {
        throw DataError("row " + std::to_string(i + 1) + ", node '" + node_names[static_cast<std::size_t>(j)] +
                        "': value " + std::to_string(v) + " is not binary");
      }
    }
  }
  BinaryDataset out;
  out.node_names = std::move(node_names);
  out.group_ids = std::move(group_ids);
  out.responses = std::move(responses);
  detail::index_groups(out.group_ids, out.group_names, out.group_index);
  return out;
}

// Recode cell' = 1 if cell >= cutoff else 0. Node names and groups carry over.
inline BinaryDataset dichotomize(const OrdinalDataset& data, int cutoff = 1) {
  if (cutoff < 1 || cutoff > data.max_level) {
    throw ConfigError("cutoff " + std::to_string(cutoff) + " outside [1, " + std::to_string(data.max_level) + "]");
  }
  Eigen::MatrixXi coded = (data.responses.array() >= cutoff).cast<int>();
  return make_binary_dataset(data.node_names, data.group_ids, std::move(coded));
}

// Builds the nodewise design for `outcome_node`: every other column becomes a
// predictor centered on its group mean; the outcome is passed through as-is.
// `pool_groups` treats all rows as one group (the single-level convention).
inline CenteredDesign group_mean_center(const BinaryDataset& data,
                                        const std::string& outcome_node,
                                        bool pool_groups = false) {
  const int outcome_col = find_node(data.node_names, outcome_node);
  const Eigen::Index n = data.responses.rows();
  const int m = static_cast<int>(data.node_names.size());

  CenteredDesign design;
  design.outcome_node = outcome_node;
  design.outcome = data.responses.col(outcome_col).cast<double>();
  if (pool_groups) {
    design.group_index.assign(static_cast<std::size_t>(n), 0);
    design.n_groups = 1;
  } else {
    design.group_index = data.group_index;
    design.n_groups = static_cast<int>(data.group_names.size());
  }

  design.predictors.resize(n, m - 1);
  int out_j = 0;
  for (int j = 0; j < m; ++j) {
    if (j == outcome_col) continue;
    design.predictor_names.push_back(data.node_names[static_cast<std::size_t>(j)]);
    design.predictors.col(out_j++) = data.responses.col(j).cast<double>();
  }

  // Subtract per-group column means.
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(design.n_groups, m - 1);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(design.n_groups);
  for (Eigen::Index i = 0; i < n; ++i) {
    int g = design.group_index[static_cast<std::size_t>(i)];
    sums.row(g) += design.predictors.row(i);
    counts[g] += 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    int g = design.group_index[static_cast<std::size_t>(i)];
    design.predictors.row(i) -= sums.row(g) / counts[g];
  }
  return design;
}

// CSV ingestion: first row is the header, one designated group column holds
// string labels, every other selected column holds integer responses.
inline OrdinalDataset load_ordinal_csv(const std::string& path,
                                       const std::string& group_column,
                                       const std::vector<std::string>& node_columns = {}) {
  CsvTable table = read_csv(path);

  auto header_pos = [&](const std::string& name) {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) {
      throw ConfigError(path + ": column '" + name + "' not found in header");
    }
    return static_cast<int>(it - table.header.begin());
  };

  const int group_col = header_pos(group_column);
  std::vector<int> node_cols;
  std::vector<std::string> node_names;
  if (node_columns.empty()) {
    for (int j = 0; j < static_cast<int>(table.header.size()); ++j) {
      if (j == group_col) continue;
      node_cols.push_back(j);
      node_names.push_back(table.header[static_cast<std::size_t>(j)]);
    }
  } else {
    for (const auto& name : node_columns) {
      int j = header_pos(name);
      if (j == group_col) throw ConfigError(path + ": '" + name + "' is the group column");
      node_cols.push_back(j);
      node_names.push_back(name);
    }
  }
  if (node_names.empty()) throw DataError(path + ": no response columns");
  if (table.rows.empty()) throw DataError(path + ": no data rows");

  OrdinalDataset data;
  data.node_names = node_names;
  data.responses.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(node_cols.size()));
  data.group_ids.reserve(table.rows.size());

  int max_level = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string at_row = path + ": row " + std::to_string(r + 2);
    if (row.size() != table.header.size()) {
      throw DataError(at_row + ": expected " + std::to_string(table.header.size()) + " fields, got " +
                      std::to_string(row.size()));
    }
    const std::string& group = row[static_cast<std::size_t>(group_col)];
    if (group.empty()) throw DataError(at_row + ", column '" + group_column + "': empty group label");
    data.group_ids.push_back(group);
    for (std::size_t c = 0; c < node_cols.size(); ++c) {
      const std::string& cell = row[static_cast<std::size_t>(node_cols[c])];
      const std::string at_cell = at_row + ", column '" + node_names[c] + "'";
      if (cell.empty()) throw DataError(at_cell + ": missing value");
      int value = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw DataError(at_cell + ": '" + cell + "' is not an integer");
      }
      if (value < 0) throw DataError(at_cell + ": negative response " + std::to_string(value));
      data.responses(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = value;
      max_level = std::max(max_level, value);
    }
  }
  data.max_level = std::max(max_level, 1);
  return data;
}

inline std::string dataset_to_csv(const BinaryDataset& data, const std::string& group_column = "group") {
  std::vector<std::string> header;
  header.push_back(group_column);
  header.insert(header.end(), data.node_names.begin(), data.node_names.end());
  std::string out = csv_row(header);
  for (Eigen::Index i = 0; i < data.responses.rows(); ++i) {
    std::vector<std::string> fields;
    fields.push_back(data.group_ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < data.responses.cols(); ++j) {
      fields.push_back(std::to_string(data.responses(i, j)));
    }
    out += csv_row(fields);
  }
  return out;
}

}  // namespace mlnira
