#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bayespde/tensor.hpp"

namespace bayespde {

/// Gridded field with coordinates and a presence mask (1 = observed).
struct GridDataset {
  Tensor values;                    // S x T x N
  std::vector<std::uint8_t> mask;   // one entry per value
  Vector x;
  Vector y;                         // empty for one spatial dimension
  Vector t;
  std::vector<std::string> components;

  bool is_2d() const { return y.size() > 0; }
  Eigen::Index missing_count() const;
  /// Throws DimensionError when coordinates, mask and values disagree.
  void validate() const;
  bool operator==(const GridDataset&) const = default;
};

/// Dataset with every entry present.
GridDataset make_dataset(Tensor values, Vector x, Vector y, Vector t,
                         std::vector<std::string> components);

}  // namespace bayespde
