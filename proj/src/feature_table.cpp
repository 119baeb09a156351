#include "recon/feature_table.hpp"

#include <cmath>
#include <cstdio>

namespace recon {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kNumeric: return "numeric";
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kBinary: return "binary";
  }
  return "?";
}

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::kFlow: return "flow";
    case Origin::kTemporal: return "temporal";
    case Origin::kExternal: return "external";
  }
  return "?";
}

ColumnKind parse_column_kind(std::string_view s) {
  if (s == "numeric") return ColumnKind::kNumeric;
  if (s == "categorical") return ColumnKind::kCategorical;
  if (s == "binary") return ColumnKind::kBinary;
  throw Error(ErrorCode::kSchemaMismatch, "unknown column kind '" + std::string(s) + "'");
}

Origin parse_origin(std::string_view s) {
  if (s == "flow") return Origin::kFlow;
  if (s == "temporal") return Origin::kTemporal;
  if (s == "external") return Origin::kExternal;
  throw Error(ErrorCode::kSchemaMismatch, "unknown column origin '" + std::string(s) + "'");
}

std::string format_double(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

FeatureTable::FeatureTable(std::vector<Column> columns) : columns_(std::move(columns)) {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (columns_[i].name == columns_[j].name)
        throw Error(ErrorCode::kSchemaMismatch, "duplicate column name '" + columns_[i].name + "'");
}

std::optional<std::size_t> FeatureTable::find_column(std::string_view name) const {
  for (std::size_t c = 0; c < columns_.size(); ++c)
    if (columns_[c].name == name) return c;
  return std::nullopt;
}

std::size_t FeatureTable::column_index(std::string_view name) const {
  if (auto c = find_column(name)) return *c;
  throw Error(ErrorCode::kMissingColumn, "no column '" + std::string(name) + "'");
}

void FeatureTable::add_row(RowKey key, std::vector<Cell> cells) {
  if (cells.size() != columns_.size())
    throw Error(ErrorCode::kRaggedRow, "row has " + std::to_string(cells.size()) + " cells, table has " +
                                           std::to_string(columns_.size()) + " columns");
  if (labels_) throw Error(ErrorCode::kInvalidArgument, "cannot add rows to a labeled table");
  for (auto& cell : cells)
    if (cell.is_missing()) cell.value = 0.0;
  rows_.push_back(std::move(cells));
  index_.push_back(key);
}

const std::vector<int>& FeatureTable::labels() const {
  if (!labels_) throw Error(ErrorCode::kInvalidArgument, "table is unlabeled");
  return *labels_;
}

void FeatureTable::set_labels(std::vector<int> labels) {
  if (labels.size() != rows_.size())
    throw Error(ErrorCode::kCoverageMismatch, "labels cover " + std::to_string(labels.size()) + " of " +
                                                  std::to_string(rows_.size()) + " rows");
  for (int y : labels)
    if (y != 0 && y != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
  labels_ = std::move(labels);
}

double FeatureTable::level_index(std::size_t c, std::string_view level) {
  auto& levels = columns_[c].levels;
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == level) return static_cast<double>(i);
  levels.emplace_back(level);
  return static_cast<double>(levels.size() - 1);
}

std::string FeatureTable::format_cell(std::size_t r, std::size_t c) const {
  const Cell& cell = rows_[r][c];
  if (cell.is_missing()) return {};
  if (columns_[c].kind == ColumnKind::kCategorical) return columns_[c].levels.at(static_cast<std::size_t>(cell.value));
  return format_double(cell.value);
}

FeatureTable FeatureTable::select_rows(std::span<const std::size_t> rows) const {
  FeatureTable out(columns_);
  out.rows_.reserve(rows.size());
  for (auto r : rows) {
    out.rows_.push_back(rows_[r]);
    out.index_.push_back(index_[r]);
  }
  if (labels_) {
    std::vector<int> y;
    y.reserve(rows.size());
    for (auto r : rows) y.push_back((*labels_)[r]);
    out.labels_ = std::move(y);
  }
  return out;
}

FeatureTable FeatureTable::select_columns(std::span<const std::size_t> cols) const {
  std::vector<Column> columns;
  for (auto c : cols) columns.push_back(columns_[c]);
  FeatureTable out(std::move(columns));
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    std::vector<Cell> cells;
    cells.reserve(cols.size());
    for (auto c : cols) cells.push_back(rows_[r][c]);
    out.rows_.push_back(std::move(cells));
  }
  out.index_ = index_;
  out.labels_ = labels_;
  return out;
}

LabeledData to_labeled_data(const FeatureTable& table, std::span<const std::string> features) {
  std::vector<std::size_t> cols;
  if (features.empty()) {
    for (std::size_t c = 0; c < table.num_columns(); ++c) cols.push_back(c);
  } else {
    for (const auto& name : features) cols.push_back(table.column_index(name));
  }
  LabeledData out;
  out.x = Matrix(table.num_rows(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const Column& col = table.column(cols[j]);
    if (col.kind == ColumnKind::kCategorical)
      throw Error(ErrorCode::kSchemaMismatch, "column '" + col.name + "' is still categorical");
    out.feature_names.push_back(col.name);
  }
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const Cell& cell = table.cell(r, cols[j]);
      if (cell.is_missing())
        throw Error(ErrorCode::kSchemaMismatch, "missing cell in column '" + table.column(cols[j]).name + "'");
      out.x(r, j) = cell.value;
    }
  }
  if (table.has_labels()) out.y = table.labels();
  return out;
}

}  // namespace recon
