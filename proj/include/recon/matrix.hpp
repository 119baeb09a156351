#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace recon {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }

  Matrix select_rows(std::span<const std::size_t> rows) const;
  Matrix select_cols(std::span<const std::size_t> cols) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Numeric view of a fully preprocessed table: every cell observed, binary
// labels with 1 = probing.
struct LabeledData {
  std::vector<std::string> feature_names;
  Matrix x;
  std::vector<int> y;

  std::size_t size() const { return x.rows(); }
  LabeledData select_rows(std::span<const std::size_t> rows) const;
  LabeledData select_features(std::span<const std::size_t> cols) const;
};

}  // namespace recon
