#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "jointfair/core.hpp"
#include "jointfair/error.hpp"

namespace jointfair {

struct GroupRecord {
  std::string group_id;
  Matrix X;  // n_k x p
  Vector y;  // entries in {0, 1}
};

// K per-group design blocks sharing one feature layout. Immutable by
// convention once built; safe to share read-only across workers.
struct GroupedDesign {
  std::vector<GroupRecord> groups;
  std::vector<std::string> feature_names;

  int num_groups() const { return static_cast<int>(groups.size()); }
  Eigen::Index num_features() const { return static_cast<Eigen::Index>(feature_names.size()); }

  Eigen::Index total_samples() const {
    Eigen::Index n = 0;
    for (const auto& g : groups) n += g.X.rows();
    return n;
  }

  int group_index(std::string_view id) const {
    for (int k = 0; k < num_groups(); ++k) {
      if (groups[static_cast<std::size_t>(k)].group_id == id) return k;
    }
    return -1;
  }

  void validate() const {
    if (groups.empty()) throw ValidationError("design has no groups");
    const Eigen::Index p = num_features();
    for (const auto& g : groups) {
      if (g.X.rows() < 1) throw ValidationError("group '" + g.group_id + "' has no samples");
      if (g.X.cols() != p) {
        throw ValidationError("group '" + g.group_id + "' has " + std::to_string(g.X.cols()) +
                              " features, expected " + std::to_string(p));
      }
      if (g.y.size() != g.X.rows()) {
        throw ValidationError("group '" + g.group_id + "' label length does not match row count");
      }
      for (Eigen::Index i = 0; i < g.y.size(); ++i) {
        if (g.y[i] != 0.0 && g.y[i] != 1.0) {
          throw ValidationError("group '" + g.group_id + "' has non-binary label at row " +
                                std::to_string(i));
        }
      }
    }
  }

  // Fairness-penalized fits need S_k0 and S_k1 nonempty in every group.
  void require_both_classes() const {
    for (const auto& g : groups) {
      const double positives = g.y.sum();
      if (positives == 0.0 || positives == static_cast<double>(g.y.size())) {
        const int missing = positives == 0.0 ? 1 : 0;
        throw ValidationError("group '" + g.group_id + "' has no samples with outcome y=" +
                              std::to_string(missing));
      }
    }
  }
};

struct StandardizationParams {
  Vector means;   // per feature, raw units
  Vector scales;  // population SDs; constant columns recorded as 1
};

namespace detail {

inline std::string format_shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok, const std::string& what, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ValidationError("cannot parse " + what + " '" + std::string(tok) + "' at line " +
                          std::to_string(line));
  }
  if (!std::isfinite(v)) {
    throw ValidationError("non-finite " + what + " at line " + std::to_string(line));
  }
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

// Reads a comma-separated file with a header row. One group per distinct
// group-column value, ordered by first appearance; features keep header order
// with the group/label columns removed.
inline GroupedDesign load_csv(const std::string& path, const std::string& group_col,
                              const std::string& label_col) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = detail::split_csv_line(line);
  int group_idx = -1;
  int label_idx = -1;
  std::vector<std::string> feature_names;
  std::vector<int> feature_cols;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string name(header[static_cast<std::size_t>(c)]);
    if (name == group_col && group_idx < 0) {
      group_idx = c;
    } else if (name == label_col && label_idx < 0) {
      label_idx = c;
    } else {
      feature_names.push_back(name);
      feature_cols.push_back(c);
    }
  }
  if (group_idx < 0) throw ValidationError("missing group column '" + group_col + "' in " + path);
  if (label_idx < 0) throw ValidationError("missing label column '" + label_col + "' in " + path);

  struct Rows {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
  };
  std::vector<std::string> group_order;
  std::unordered_map<std::string, Rows> by_group;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError("line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
    }
    const std::string gid(cells[static_cast<std::size_t>(group_idx)]);
    const double label =
        detail::parse_double(cells[static_cast<std::size_t>(label_idx)], "label", line_no);
    if (label != 0.0 && label != 1.0) {
      throw ValidationError("label '" +
                            std::string(cells[static_cast<std::size_t>(label_idx)]) +
                            "' at line " + std::to_string(line_no) + " is not 0 or 1");
    }
    auto it = by_group.find(gid);
    if (it == by_group.end()) {
      group_order.push_back(gid);
      it = by_group.emplace(gid, Rows{}).first;
    }
    std::vector<double> row(feature_cols.size());
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      row[j] = detail::parse_double(cells[static_cast<std::size_t>(feature_cols[j])],
                                    "value in column '" + feature_names[j] + "'", line_no);
    }
    it->second.x.push_back(std::move(row));
    it->second.y.push_back(label);
  }
  if (group_order.empty()) throw ValidationError("'" + path + "' has no data rows");

  GroupedDesign design;
  design.feature_names = std::move(feature_names);
  const Eigen::Index p = design.num_features();
  for (const auto& gid : group_order) {
    auto& rows = by_group[gid];
    const Eigen::Index n = static_cast<Eigen::Index>(rows.y.size());
    GroupRecord rec;
    rec.group_id = gid;
    rec.X.resize(n, p);
    rec.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) {
        rec.X(i, j) = rows.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
      rec.y[i] = rows.y[static_cast<std::size_t>(i)];
    }
    design.groups.push_back(std::move(rec));
  }
  design.validate();
  return design;
}

// Shortest-round-trip decimal printing, so load(write(d)) reproduces every
// value bit-exactly. Groups are written consecutively in design order; row
// order within a group is preserved.
inline void write_csv(const GroupedDesign& design, const std::string& path,
                      const std::string& group_col, const std::string& label_col) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << group_col << ',' << label_col;
  for (const auto& name : design.feature_names) out << ',' << name;
  out << '\n';
  for (const auto& g : design.groups) {
    for (Eigen::Index i = 0; i < g.X.rows(); ++i) {
      out << g.group_id << ',' << (g.y[i] == 1.0 ? '1' : '0');
      for (Eigen::Index j = 0; j < g.X.cols(); ++j) {
        out << ',' << detail::format_shortest(g.X(i, j));
      }
      out << '\n';
    }
  }
}

inline Matrix apply_standardization(const Matrix& X, const StandardizationParams& sp) {
  Matrix out = X;
  out.rowwise() -= sp.means.transpose();
  out.array().rowwise() /= sp.scales.transpose().array();
  return out;
}

// Pooled zero-mean unit-variance transform across all groups (population SD).
// Constant columns keep their index: scale is forced to 1 and a warning is
// emitted so coefficient positions stay aligned with feature_names.
inline std::pair<GroupedDesign, StandardizationParams> standardize(const GroupedDesign& design) {
  design.validate();
  const Eigen::Index p = design.num_features();
  const double n = static_cast<double>(design.total_samples());

  Vector means = Vector::Zero(p);
  for (const auto& g : design.groups) means += g.X.colwise().sum().transpose();
  means /= n;

  Vector sq = Vector::Zero(p);
  for (const auto& g : design.groups) {
    sq += (g.X.rowwise() - means.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  Vector scales = (sq / n).array().sqrt();

  for (Eigen::Index j = 0; j < p; ++j) {
    if (scales[j] <= 1e-12 * (1.0 + std::abs(means[j]))) {
      std::cerr << "warning: feature '" << design.feature_names[static_cast<std::size_t>(j)]
                << "' is constant; scale forced to 1\n";
      scales[j] = 1.0;
    }
  }

  StandardizationParams sp{means, scales};
  GroupedDesign out = design;
  for (auto& g : out.groups) g.X = apply_standardization(g.X, sp);
  return {std::move(out), std::move(sp)};
}

// Class-conditional feature means: row k of outcome{0,1} is the average
// predictor vector over the group's samples with that outcome. With
// augment=true a leading column of ones is prepended so the rows act on
// intercept-augmented coefficient blocks.
struct ClassMeans {
  Matrix outcome0;  // K x q
  Matrix outcome1;  // K x q
  bool augmented = false;

  int num_groups() const { return static_cast<int>(outcome0.rows()); }
  Eigen::Index block_size() const { return outcome0.cols(); }
};

inline ClassMeans class_conditional_means(const GroupedDesign& design, bool augment = false) {
  design.validate();
  const int K = design.num_groups();
  const Eigen::Index p = design.num_features();
  const Eigen::Index q = augment ? p + 1 : p;

  ClassMeans cm;
  cm.outcome0.setZero(K, q);
  cm.outcome1.setZero(K, q);
  cm.augmented = augment;

  for (int k = 0; k < K; ++k) {
    const auto& g = design.groups[static_cast<std::size_t>(k)];
    Vector sum0 = Vector::Zero(p);
    Vector sum1 = Vector::Zero(p);
    Eigen::Index c0 = 0;
    Eigen::Index c1 = 0;
    for (Eigen::Index i = 0; i < g.X.rows(); ++i) {
      if (g.y[i] == 1.0) {
        sum1 += g.X.row(i).transpose();
        ++c1;
      } else {
        sum0 += g.X.row(i).transpose();
        ++c0;
      }
    }
    if (c0 == 0) {
      throw ValidationError("group '" + g.group_id + "' has no samples with outcome y=0");
    }
    if (c1 == 0) {
      throw ValidationError("group '" + g.group_id + "' has no samples with outcome y=1");
    }
    const Eigen::Index off = augment ? 1 : 0;
    if (augment) {
      cm.outcome0(k, 0) = 1.0;
      cm.outcome1(k, 0) = 1.0;
    }
    cm.outcome0.row(k).segment(off, p) = (sum0 / static_cast<double>(c0)).transpose();
    cm.outcome1.row(k).segment(off, p) = (sum1 / static_cast<double>(c1)).transpose();
  }
  return cm;
}

}  // namespace jointfair
