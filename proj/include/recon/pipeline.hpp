#pragma once

#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "recon/cnn.hpp"
#include "recon/dataset.hpp"
#include "recon/ensemble.hpp"
#include "recon/flow_features.hpp"
#include "recon/temporal_features.hpp"

namespace recon {

struct Extraction {
  std::vector<FlowRecord> flows;
  std::vector<TemporalFeatureRow> temporal;
  FeatureTable flow_set, session_set, temporal_set;
  FeatureTable merged;  // flow + session + temporal, in flow order
};

Extraction extract_features(std::span<const PacketRecord> packets, const TemporalConfig& temporal = {},
                            const FlowTimeouts& timeouts = {});

struct DatasetConfig {
  DropConfig drop;
  ImputePolicy impute;
  SplitConfig split;
};

struct PreparedDataset {
  DropReport dropped;
  ConflictReport labels;
  FeatureTable train, val, test;  // encoded and imputed; fill values come from train
  std::vector<std::size_t> train_rows, val_rows, test_rows;  // into the merged table
};

// Labels -> drop -> one-hot -> split -> impute (fitted on train).
PreparedDataset prepare_dataset(const FeatureTable& merged, std::span<const LabelSet> labels,
                                const DatasetConfig& config);

// Any persisted model: a bagging ensemble, a CNN, or a bare learner.
class TrainedModel {
 public:
  explicit TrainedModel(BaggingModel m) : model_(std::move(m)) {}
  explicit TrainedModel(CnnModel m) : model_(std::move(m)) {}
  explicit TrainedModel(std::unique_ptr<Learner> m) : model_(std::move(m)) {}

  const std::vector<std::string>& schema() const;
  // Checks feature names against the training schema.
  std::vector<double> predict_proba(const LabeledData& data) const;
  const CnnModel* cnn() const { return std::get_if<CnnModel>(&model_); }

  Json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);

 private:
  std::variant<BaggingModel, CnnModel, std::unique_ptr<Learner>> model_;
};

}  // namespace recon
