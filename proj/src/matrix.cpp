#include "recon/matrix.hpp"

namespace recon {

Matrix Matrix::select_rows(std::span<const std::size_t> rows) const {
  Matrix out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix Matrix::select_cols(std::span<const std::size_t> cols) const {
  Matrix out(rows_, cols.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t j = 0; j < cols.size(); ++j) out(r, j) = (*this)(r, cols[j]);
  return out;
}

LabeledData LabeledData::select_rows(std::span<const std::size_t> rows) const {
  LabeledData out{feature_names, x.select_rows(rows), {}};
  out.y.reserve(rows.size());
  for (auto r : rows) out.y.push_back(y[r]);
  return out;
}

LabeledData LabeledData::select_features(std::span<const std::size_t> cols) const {
  LabeledData out{{}, x.select_cols(cols), y};
  for (auto c : cols) out.feature_names.push_back(feature_names[c]);
  return out;
}

}  // namespace recon
