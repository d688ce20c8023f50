#pragma once

#include <Eigen/Core>

namespace finn {

// Subset of input dimensions: bit i set means dimension i + 1 is included.
using Mask = unsigned;

// Axis-aligned box [lower, upper] with lower_i < upper_i.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static Box cube(int dim, double lo, double hi);

  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const { return (upper - lower).prod(); }
  // Vertex selecting upper_i where bit i of `m` is set, lower_i otherwise.
  Eigen::VectorXd vertex(Mask m) const;
  bool contains(const Eigen::VectorXd& x) const;
  void validate() const;

  bool operator==(const Box& o) const { return lower == o.lower && upper == o.upper; }
};

}  // namespace finn
