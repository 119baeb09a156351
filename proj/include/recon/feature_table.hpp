#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recon/flow_features.hpp"
#include "recon/matrix.hpp"

namespace recon {

enum class ColumnKind : std::uint8_t { kNumeric, kCategorical, kBinary };
enum class Origin : std::uint8_t { kFlow, kTemporal, kExternal };
enum class Missing : std::uint8_t { kNone, kPlausible, kStructural };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(Origin origin);
ColumnKind parse_column_kind(std::string_view s);
Origin parse_origin(std::string_view s);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  Origin origin = Origin::kFlow;
  // Categorical: the value domain; cell values index into it.
  std::vector<std::string> levels;
  // Binary columns produced by one-hot encoding name their source column.
  std::string group;

  bool operator==(const Column&) const = default;
};

struct Cell {
  double value = 0.0;
  Missing missing = Missing::kNone;

  static Cell observed(double v) { return {v, Missing::kNone}; }
  static Cell plausible() { return {0.0, Missing::kPlausible}; }
  static Cell structural() { return {0.0, Missing::kStructural}; }
  bool is_missing() const { return missing != Missing::kNone; }

  bool operator==(const Cell&) const = default;
};

// Row identity: flow start (microseconds) plus the 5-tuple.
struct RowKey {
  Timestamp start_ts;
  FlowKey flow;

  auto operator<=>(const RowKey&) const = default;
};

// Column-schema'd table. Missing cells always carry value 0 so no code path
// can consume a stale value.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(std::vector<Column> columns);

  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t c) const { return columns_[c]; }
  std::size_t num_columns() const { return columns_.size(); }
  std::size_t num_rows() const { return rows_.size(); }
  std::optional<std::size_t> find_column(std::string_view name) const;
  std::size_t column_index(std::string_view name) const;  // throws kMissingColumn

  const Cell& cell(std::size_t r, std::size_t c) const { return rows_[r][c]; }
  const std::vector<Cell>& row(std::size_t r) const { return rows_[r]; }
  const RowKey& key(std::size_t r) const { return index_[r]; }
  const std::vector<RowKey>& keys() const { return index_; }

  void add_row(RowKey key, std::vector<Cell> cells);

  bool has_labels() const { return labels_.has_value(); }
  const std::vector<int>& labels() const;
  void set_labels(std::vector<int> labels);
  void clear_labels() { labels_.reset(); }

  // Categorical level lookup, adding the level when absent.
  double level_index(std::size_t c, std::string_view level);
  // Rendered cell value; categoricals yield their level string.
  std::string format_cell(std::size_t r, std::size_t c) const;

  FeatureTable select_rows(std::span<const std::size_t> rows) const;
  FeatureTable select_columns(std::span<const std::size_t> cols) const;

  bool operator==(const FeatureTable&) const = default;

 private:
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
  std::vector<RowKey> index_;
  std::optional<std::vector<int>> labels_;
};

// Numeric view for learners. Requires a labeled table with no categorical
// columns and no missing cells; `features` restricts and orders columns.
LabeledData to_labeled_data(const FeatureTable& table, std::span<const std::string> features = {});

std::string format_double(double v);

}  // namespace recon
