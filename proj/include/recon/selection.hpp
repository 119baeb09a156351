#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recon/learners.hpp"

namespace recon {

enum class SubsetStage { kFilter, kPruned, kWrapped };
std::string_view to_string(SubsetStage s);

struct FeatureSubset {
  std::vector<std::string> names;  // in source column order
  SubsetStage stage = SubsetStage::kFilter;
};

// Pearson correlation; 0 when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);
std::vector<double> column(const Matrix& x, std::size_t c);

std::vector<double> target_correlations(const LabeledData& train);
FeatureSubset target_correlation_select(const LabeledData& train, double threshold = 0.3);

// Features are min-max scaled to [0, 1] before scoring.
std::vector<double> chi_square_scores(const LabeledData& train);
// +inf when within-class variance is zero and class means differ.
std::vector<double> anova_f_scores(const LabeledData& train);
std::vector<double> tree_importance_scores(const LabeledData& train, int n_trees, std::uint64_t seed);

// Indices of the k highest scores; ties keep column order.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

struct FilterConfig {
  double target_threshold = 0.3;
  std::size_t k = 25;
  int n_trees = 100;
  std::uint64_t seed = 0;
};

struct FilterResult {
  FeatureSubset subset;
  std::vector<std::string> features;  // names the score vectors are aligned to
  std::vector<double> correlation, chi2, anova, importance;
  std::vector<std::string> by_correlation, by_chi2, by_anova, by_importance;
};

FilterResult filter_select(const LabeledData& train, const FilterConfig& config = {});

struct PrunedPair {
  std::string kept, dropped;
  double correlation;
};

struct PruneResult {
  FeatureSubset subset;
  std::vector<PrunedPair> pairs;
};

PruneResult correlation_prune(const LabeledData& train, const FeatureSubset& subset, double threshold = 0.75);

struct GaConfig {
  int generations = 50;
  int population = 50;
  int tournament = 3;
  double crossover_swap = 0.5;
  double mutation_rate = 0.0;  // 0 = 1 / subset size
  int elitism = 1;
  std::uint64_t seed = 0;
  // Fitness estimator; its seed is fixed across evaluations.
  LearnerSpec estimator = [] {
    TreeParams p;
    p.n_trees = 25;
    return LearnerSpec::forest(p);
  }();
};

struct GaResult {
  FeatureSubset subset;
  std::vector<bool> best_mask;  // over the input subset
  double best_fitness = 0.0;
  std::vector<double> history;  // best fitness of generation 0..G
  std::size_t evaluations = 0;  // distinct masks fitted
};

GaResult ga_wrapper_select(const LabeledData& train, const LabeledData& val, const FeatureSubset& subset,
                           const GaConfig& config = {});

struct SelectionReport {
  FilterResult filter;
  PruneResult prune;
  GaResult ga;

  Json to_json() const;
};

// filter -> prune -> GA, as one call.
SelectionReport select_features(const LabeledData& train, const LabeledData& val, const FilterConfig& filter,
                                double prune_threshold, const GaConfig& ga);

}  // namespace recon
