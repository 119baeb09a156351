#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "recon/common.hpp"
#include "recon/learners.hpp"
#include "recon/matrix.hpp"
#include "recon/rng.hpp"

namespace recon {

// Tabular row -> side x side image: the scaled vector repeated floor(side^2/d)
// times, then zero padding.
struct ImageEncoding {
  std::size_t d = 0;
  std::size_t side = 32;
  std::size_t repeats = 0;
  std::size_t pad = 0;
  std::vector<double> lo, hi;  // per-feature training range

  // Geometry only; scaling is the identity on [0, 1].
  static ImageEncoding geometry(std::size_t d, std::size_t side);
  static ImageEncoding fit(const Matrix& train, std::size_t side = 32);

  double scale(std::size_t feature, double v) const;  // clamped to [0, 1]
  std::vector<double> encode(std::span<const double> x) const;  // row-major, side*side
  Matrix encode_all(const Matrix& x) const;                     // one image per row
  std::vector<double> decode(std::span<const double> image) const;  // first d pixels
  Json to_json() const;
  static ImageEncoding from_json(const nlohmann::json& j);
};

enum class Activation { kRelu, kSigmoid };
enum class OptimizerKind { kAdam, kRmsprop };

struct ConvLayerSpec {
  int filters = 64;
  int kernel = 3;  // odd; same padding
  Activation activation = Activation::kRelu;
  double dropout = 0.0;
};

struct CnnSpec {
  std::size_t side = 32;
  std::vector<ConvLayerSpec> conv;
  int dense_units = 128;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  int batch_size = 128;
  int epochs = 5;
  std::uint64_t seed = 0;

  // Three 64-filter layers (sigmoid, relu, sigmoid), Adam, 5 epochs.
  static CnnSpec institutional();
  // Four layers (64, 64, 32, 64); the fourth has no dropout. RMSprop, 7 epochs.
  static CnnSpec unsw();

  void validate() const;  // throws kInvalidArgument
  Json to_json() const;
  static CnnSpec from_json(const nlohmann::json& j);
};

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

struct EpochStats {
  double train_loss = 0, train_accuracy = 0;
  double val_loss = 0, val_accuracy = 0, val_f1 = 0;
};

class CnnModel {
 public:
  CnnModel() = default;
  // Glorot-uniform weights, zero biases.
  CnnModel(CnnSpec spec, ImageEncoding encoding);

  const CnnSpec& spec() const { return spec_; }
  const ImageEncoding& encoding() const { return encoding_; }
  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  std::vector<EpochStats> history;

  // Eval-mode class probabilities (2) of one image.
  std::vector<double> probabilities(std::span<const double> image) const;
  // Pre-softmax score of `target` for one image.
  double class_score(std::span<const double> image, int target) const;

  // Mean cross-entropy over the batch. Gradients of that mean (shaped like
  // parameters()) are added to `grads` when non-null; `dropout` enables
  // train mode; `positive` receives each row's P(probing).
  double loss(const Matrix& images, std::span<const int> labels, std::vector<Tensor>* grads = nullptr,
              Rng* dropout = nullptr, std::vector<double>* positive = nullptr) const;
  std::vector<Tensor> zero_gradients() const;

  // |d score_target / d pixel|, side x side row-major.
  std::vector<double> saliency(std::span<const double> image, int target, bool guided) const;
  // Signed vanilla input gradient of the target score.
  std::vector<double> input_gradient(std::span<const double> image, int target) const;

  // Encodes tabular rows and returns P(probing).
  std::vector<double> predict_proba(const Matrix& x) const;
  std::vector<double> predict_proba_images(const Matrix& images) const;

  std::vector<std::string> schema;  // tabular feature names

  Json to_json() const;
  static CnnModel from_json(const nlohmann::json& j);

 private:
  struct Cache;
  void forward(std::span<const double> image, Cache& cache, Rng* dropout) const;
  // Back-propagates d(output)/d(logits) into parameter and input gradients.
  void backward(const Cache& cache, std::span<const double> dlogits, std::vector<Tensor>* grads,
                std::vector<double>* dinput, bool guided) const;

  CnnSpec spec_;
  ImageEncoding encoding_;
  std::vector<Tensor> params_;  // per conv layer: W, b; then dense W, b; output W, b
  std::vector<std::size_t> dims_;  // spatial size entering each conv layer, then final
};

class CnnDivergence : public Error {
 public:
  CnnDivergence(std::string message, std::vector<EpochStats> partial)
      : Error(ErrorCode::kDivergence, std::move(message)), history(std::move(partial)) {}
  std::vector<EpochStats> history;
};

// Trains on encoded images of `train`; `val` may be empty.
CnnModel train_cnn(const LabeledData& train, const LabeledData& val, const CnnSpec& spec);

// Grayscale P2 image; values are mapped linearly from [lo, hi] to 0..255.
void write_pgm(std::ostream& out, std::span<const double> pixels, std::size_t side, double lo, double hi);

}  // namespace recon
