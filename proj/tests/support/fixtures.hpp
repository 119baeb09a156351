#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "recon/matrix.hpp"
#include "recon/rng.hpp"

namespace recon::testing {

// Rows of `informative` class-shifted gaussian features followed by pure
// noise. Column j < informative is named "inf<j>", the rest "noise<j>".
inline LabeledData planted(std::uint64_t seed, std::size_t rows, std::size_t features, std::size_t informative,
                           double shift = 1.5, double positive_rate = 0.5) {
  Rng rng(seed);
  LabeledData d;
  for (std::size_t j = 0; j < features; ++j)
    d.feature_names.push_back((j < informative ? "inf" : "noise") + std::to_string(j));
  d.x = Matrix(rows, features);
  d.y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    d.y[r] = rng.bernoulli(positive_rate);
    for (std::size_t j = 0; j < features; ++j) d.x(r, j) = rng.normal() + (j < informative && d.y[r] ? shift : 0.0);
  }
  return d;
}

inline LabeledData from_rows(const std::vector<std::vector<double>>& rows, const std::vector<int>& y) {
  LabeledData d;
  const std::size_t cols = rows.empty() ? 0 : rows[0].size();
  for (std::size_t j = 0; j < cols; ++j) d.feature_names.push_back("f" + std::to_string(j));
  d.x = Matrix(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < cols; ++j) d.x(r, j) = rows[r][j];
  d.y = y;
  return d;
}

}  // namespace recon::testing
