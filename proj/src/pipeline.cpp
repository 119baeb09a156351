#include "recon/pipeline.hpp"

namespace recon {

Extraction extract_features(std::span<const PacketRecord> packets, const TemporalConfig& temporal,
                            const FlowTimeouts& timeouts) {
  Extraction e;
  e.flows = assemble_flows(packets, timeouts);
  e.temporal = count_signals_windowed(packets, e.flows, temporal);
  e.flow_set = build_flow_set(e.flows);
  e.session_set = build_session_set(e.flows);
  e.temporal_set = build_temporal_set(e.flows, e.temporal);
  e.merged = merge_feature_sets(e.flow_set, e.session_set, e.temporal_set);
  return e;
}

PreparedDataset prepare_dataset(const FeatureTable& merged, std::span<const LabelSet> labels,
                                const DatasetConfig& config) {
  PreparedDataset out;
  FeatureTable labeled = merged;
  CombinedLabels combined = combine_labels(labels);
  if (combined.labels.size() != merged.num_rows())
    throw Error(ErrorCode::kLengthMismatch, "label count " + std::to_string(combined.labels.size()) +
                                                " differs from row count " + std::to_string(merged.num_rows()));
  labeled.set_labels(std::move(combined.labels));
  out.labels = combined.report;

  DropResult dropped = drop_uninformative(labeled, config.drop);
  out.dropped = std::move(dropped.report);
  const FeatureTable encoded = one_hot_encode(dropped.table);

  SplitResult parts = split(encoded, config.split);
  const ImputeStats stats = fit_impute(parts.train, config.impute);
  out.train = apply_impute(parts.train, stats);
  out.val = apply_impute(parts.val, stats);
  out.test = apply_impute(parts.test, stats);
  out.train_rows = std::move(parts.train_rows);
  out.val_rows = std::move(parts.val_rows);
  out.test_rows = std::move(parts.test_rows);
  return out;
}

const std::vector<std::string>& TrainedModel::schema() const {
  if (auto* b = std::get_if<BaggingModel>(&model_)) return b->schema();
  if (auto* c = std::get_if<CnnModel>(&model_)) return c->schema;
  return std::get<std::unique_ptr<Learner>>(model_)->schema();
}

std::vector<double> TrainedModel::predict_proba(const LabeledData& data) const {
  if (data.feature_names != schema())
    throw Error(ErrorCode::kSchemaMismatch, "input feature names differ from the model's training schema");
  if (auto* b = std::get_if<BaggingModel>(&model_)) return b->predict_proba(data.x);
  if (auto* c = std::get_if<CnnModel>(&model_)) return c->predict_proba(data.x);
  return std::get<std::unique_ptr<Learner>>(model_)->predict_proba(data.x);
}

Json TrainedModel::to_json() const {
  if (auto* b = std::get_if<BaggingModel>(&model_)) return b->to_json();
  if (auto* c = std::get_if<CnnModel>(&model_)) return c->to_json();
  return std::get<std::unique_ptr<Learner>>(model_)->to_json();
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.value("type", std::string());
    if (type == "bagging") return TrainedModel(BaggingModel::from_json(j));
    if (type == "cnn") return TrainedModel(CnnModel::from_json(j));
    return TrainedModel(Learner::from_json(j));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("model JSON: ") + e.what());
  }
}

}  // namespace recon
