#include "recon/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include "recon/evaluation.hpp"
#include "recon/parallel.hpp"

namespace recon {

// ---------------------------------------------------------------------------
// Encoding

ImageEncoding ImageEncoding::geometry(std::size_t d, std::size_t side) {
  if (d == 0) throw Error(ErrorCode::kInvalidArgument, "image encoding needs at least one feature");
  if (d > side * side)
    throw Error(ErrorCode::kFeatureCountTooLarge, std::to_string(d) + " features do not fit a " +
                                                      std::to_string(side) + "x" + std::to_string(side) + " image");
  ImageEncoding e;
  e.d = d;
  e.side = side;
  e.repeats = side * side / d;
  e.pad = side * side - e.repeats * d;
  e.lo.assign(d, 0.0);
  e.hi.assign(d, 1.0);
  return e;
}

ImageEncoding ImageEncoding::fit(const Matrix& train, std::size_t side) {
  ImageEncoding e = geometry(train.cols(), side);
  if (train.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "image encoding needs training rows");
  for (std::size_t c = 0; c < e.d; ++c) {
    e.lo[c] = e.hi[c] = train(0, c);
    for (std::size_t r = 1; r < train.rows(); ++r) {
      e.lo[c] = std::min(e.lo[c], train(r, c));
      e.hi[c] = std::max(e.hi[c], train(r, c));
    }
  }
  return e;
}

double ImageEncoding::scale(std::size_t f, double v) const {
  if (!(hi[f] > lo[f])) return 0.0;
  return std::clamp((v - lo[f]) / (hi[f] - lo[f]), 0.0, 1.0);
}

std::vector<double> ImageEncoding::encode(std::span<const double> x) const {
  if (x.size() != d)
    throw Error(ErrorCode::kShapeMismatch, "encoding expects " + std::to_string(d) + " features, got " +
                                               std::to_string(x.size()));
  std::vector<double> img(side * side, 0.0);
  for (std::size_t i = 0; i < repeats * d; ++i) img[i] = scale(i % d, x[i % d]);
  return img;
}

Matrix ImageEncoding::encode_all(const Matrix& x) const {
  Matrix out(x.rows(), side * side);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto img = encode(x.row(r));
    std::copy(img.begin(), img.end(), out.row(r).begin());
  }
  return out;
}

std::vector<double> ImageEncoding::decode(std::span<const double> image) const {
  if (image.size() != side * side) throw Error(ErrorCode::kShapeMismatch, "image has the wrong pixel count");
  return std::vector<double>(image.begin(), image.begin() + static_cast<std::ptrdiff_t>(d));
}

Json ImageEncoding::to_json() const {
  return {{"d", d}, {"side", side}, {"repeats", repeats}, {"pad", pad}, {"lo", lo}, {"hi", hi}};
}

ImageEncoding ImageEncoding::from_json(const nlohmann::json& j) {
  ImageEncoding e = geometry(j.at("d").get<std::size_t>(), j.at("side").get<std::size_t>());
  e.lo = j.at("lo").get<std::vector<double>>();
  e.hi = j.at("hi").get<std::vector<double>>();
  if (e.lo.size() != e.d || e.hi.size() != e.d) throw Error(ErrorCode::kShapeMismatch, "encoding range arrays");
  return e;
}

// ---------------------------------------------------------------------------
// Spec

CnnSpec CnnSpec::institutional() {
  CnnSpec s;
  s.conv = {{64, 3, Activation::kSigmoid, 0.12}, {64, 3, Activation::kRelu, 0.16}, {64, 3, Activation::kSigmoid, 0.11}};
  s.optimizer = OptimizerKind::kAdam;
  s.batch_size = 128;
  s.epochs = 5;
  return s;
}

CnnSpec CnnSpec::unsw() {
  CnnSpec s;
  s.conv = {{64, 3, Activation::kRelu, 0.54},
            {64, 3, Activation::kSigmoid, 0.43},
            {32, 3, Activation::kRelu, 0.69},
            {64, 3, Activation::kRelu, 0.0}};
  s.optimizer = OptimizerKind::kRmsprop;
  s.batch_size = 128;
  s.epochs = 7;
  return s;
}

void CnnSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidArgument, m); };
  if (conv.empty()) fail("CNN needs at least one conv layer");
  std::size_t s = side;
  for (const auto& l : conv) {
    if (l.filters < 1) fail("conv filters must be >= 1");
    if (l.kernel < 1 || l.kernel % 2 == 0) fail("conv kernel must be odd and >= 1");
    if (!(l.dropout >= 0 && l.dropout < 1)) fail("dropout must be in [0, 1)");
    if (s < 2) fail("image side " + std::to_string(side) + " is too small for " + std::to_string(conv.size()) + " pooling stages");
    s /= 2;
  }
  if (dense_units < 1) fail("dense_units must be >= 1");
  if (!(learning_rate > 0)) fail("learning_rate must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
}

Json CnnSpec::to_json() const {
  Json layers = Json::array();
  for (const auto& l : conv)
    layers.push_back({{"filters", l.filters},
                      {"kernel", l.kernel},
                      {"activation", l.activation == Activation::kRelu ? "relu" : "sigmoid"},
                      {"dropout", l.dropout}});
  return {{"side", side},
          {"conv", layers},
          {"dense_units", dense_units},
          {"optimizer", optimizer == OptimizerKind::kAdam ? "adam" : "rmsprop"},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed}};
}

CnnSpec CnnSpec::from_json(const nlohmann::json& j) {
  CnnSpec s;
  if (j.contains("preset")) {
    const auto p = j["preset"].get<std::string>();
    if (p == "institutional") s = institutional();
    else if (p == "unsw") s = unsw();
    else throw Error(ErrorCode::kInvalidArgument, "unknown CNN preset '" + p + "'");
  }
  for (const auto& [key, v] : j.items()) {
    if (key == "preset") continue;
    if (key == "side") s.side = v.get<std::size_t>();
    else if (key == "dense_units") s.dense_units = v.get<int>();
    else if (key == "learning_rate") s.learning_rate = v.get<double>();
    else if (key == "batch_size") s.batch_size = v.get<int>();
    else if (key == "epochs") s.epochs = v.get<int>();
    else if (key == "seed") s.seed = v.get<std::uint64_t>();
    else if (key == "optimizer") {
      const auto o = v.get<std::string>();
      if (o == "adam") s.optimizer = OptimizerKind::kAdam;
      else if (o == "rmsprop") s.optimizer = OptimizerKind::kRmsprop;
      else throw Error(ErrorCode::kInvalidArgument, "optimizer must be adam or rmsprop");
    } else if (key == "conv") {
      s.conv.clear();
      for (const auto& l : v) {
        ConvLayerSpec c;
        c.filters = l.value("filters", 64);
        c.kernel = l.value("kernel", 3);
        c.dropout = l.value("dropout", 0.0);
        const auto a = l.value("activation", std::string("relu"));
        if (a == "relu") c.activation = Activation::kRelu;
        else if (a == "sigmoid") c.activation = Activation::kSigmoid;
        else throw Error(ErrorCode::kInvalidArgument, "activation must be relu or sigmoid");
        s.conv.push_back(c);
      }
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown CNN key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Model

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::size_t numel(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor make_tensor(std::string name, std::vector<std::size_t> shape) {
  Tensor t{std::move(name), std::move(shape), {}};
  t.data.assign(numel(t.shape), 0.0);
  return t;
}

void glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& w : t.data) w = rng.uniform(-limit, limit);
}

}  // namespace

struct CnnModel::Cache {
  struct Layer {
    std::vector<double> in_pad, pre, act, pooled, mask, out;
    std::vector<std::size_t> argmax;
  };
  std::vector<Layer> layers;
  std::vector<double> h_pre, h, logits, probs;
};

CnnModel::CnnModel(CnnSpec spec, ImageEncoding encoding) : spec_(std::move(spec)), encoding_(std::move(encoding)) {
  spec_.validate();
  if (encoding_.side != spec_.side)
    throw Error(ErrorCode::kShapeMismatch, "encoding side differs from the CNN input side");
  Rng rng(derive_seed(spec_.seed, 0));
  std::size_t s = spec_.side, channels = 1;
  dims_.push_back(s);
  for (std::size_t l = 0; l < spec_.conv.size(); ++l) {
    const auto& c = spec_.conv[l];
    const auto f = static_cast<std::size_t>(c.filters), k = static_cast<std::size_t>(c.kernel);
    Tensor w = make_tensor("conv" + std::to_string(l) + ".w", {f, channels, k, k});
    glorot(w, channels * k * k, f * k * k, rng);
    params_.push_back(std::move(w));
    params_.push_back(make_tensor("conv" + std::to_string(l) + ".b", {f}));
    channels = f;
    s /= 2;
    dims_.push_back(s);
  }
  const std::size_t flat = channels * s * s, units = static_cast<std::size_t>(spec_.dense_units);
  Tensor dw = make_tensor("dense.w", {units, flat});
  glorot(dw, flat, units, rng);
  params_.push_back(std::move(dw));
  params_.push_back(make_tensor("dense.b", {units}));
  Tensor ow = make_tensor("out.w", {2, units});
  glorot(ow, units, 2, rng);
  params_.push_back(std::move(ow));
  params_.push_back(make_tensor("out.b", {2}));
}

std::vector<Tensor> CnnModel::zero_gradients() const {
  std::vector<Tensor> g = params_;
  for (auto& t : g) std::fill(t.data.begin(), t.data.end(), 0.0);
  return g;
}

void CnnModel::forward(std::span<const double> image, Cache& cache, Rng* dropout) const {
  if (image.size() != spec_.side * spec_.side)
    throw Error(ErrorCode::kShapeMismatch, "image has " + std::to_string(image.size()) + " pixels, expected " +
                                               std::to_string(spec_.side * spec_.side));
  cache.layers.resize(spec_.conv.size());
  std::span<const double> x = image;
  std::size_t channels = 1;
  for (std::size_t l = 0; l < spec_.conv.size(); ++l) {
    const auto& ls = spec_.conv[l];
    auto& L = cache.layers[l];
    const std::size_t s = dims_[l], k = static_cast<std::size_t>(ls.kernel), p = k / 2, sp = s + 2 * p;
    const std::size_t f_count = static_cast<std::size_t>(ls.filters);
    const auto& W = params_[2 * l].data;
    const auto& B = params_[2 * l + 1].data;

    L.in_pad.assign(channels * sp * sp, 0.0);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < s; ++y)
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>((c * s + y) * s), s,
                    L.in_pad.begin() + static_cast<std::ptrdiff_t>(c * sp * sp + (y + p) * sp + p));

    L.pre.assign(f_count * s * s, 0.0);
    for (std::size_t f = 0; f < f_count; ++f) {
      double* out = L.pre.data() + f * s * s;
      std::fill(out, out + s * s, B[f]);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double w = W[((f * channels + c) * k + ky) * k + kx];
            const double* in = L.in_pad.data() + c * sp * sp + ky * sp + kx;
            for (std::size_t y = 0; y < s; ++y) {
              double* o = out + y * s;
              const double* i = in + y * sp;
              for (std::size_t xx = 0; xx < s; ++xx) o[xx] += w * i[xx];
            }
          }
    }
    L.act.resize(L.pre.size());
    for (std::size_t i = 0; i < L.pre.size(); ++i)
      L.act[i] = ls.activation == Activation::kRelu ? std::max(0.0, L.pre[i]) : sigmoid(L.pre[i]);

    const std::size_t so = s / 2;
    L.pooled.assign(f_count * so * so, 0.0);
    L.argmax.assign(L.pooled.size(), 0);
    for (std::size_t f = 0; f < f_count; ++f)
      for (std::size_t py = 0; py < so; ++py)
        for (std::size_t px = 0; px < so; ++px) {
          std::size_t best = (f * s + 2 * py) * s + 2 * px;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t i = (f * s + 2 * py + dy) * s + 2 * px + dx;
              if (L.act[i] > L.act[best]) best = i;
            }
          const std::size_t o = (f * so + py) * so + px;
          L.pooled[o] = L.act[best];
          L.argmax[o] = best;
        }

    L.out = L.pooled;
    L.mask.clear();
    if (dropout && ls.dropout > 0) {
      const double keep = 1.0 - ls.dropout;
      L.mask.resize(L.out.size());
      for (std::size_t i = 0; i < L.out.size(); ++i) {
        L.mask[i] = dropout->uniform() < keep ? 1.0 / keep : 0.0;
        L.out[i] *= L.mask[i];
      }
    }
    x = L.out;
    channels = f_count;
  }

  const std::size_t n_conv = spec_.conv.size();
  const auto& DW = params_[2 * n_conv].data;
  const auto& DB = params_[2 * n_conv + 1].data;
  const auto& OW = params_[2 * n_conv + 2].data;
  const auto& OB = params_[2 * n_conv + 3].data;
  const std::size_t units = DB.size(), flat = x.size();
  cache.h_pre.assign(units, 0.0);
  cache.h.assign(units, 0.0);
  for (std::size_t u = 0; u < units; ++u) {
    double z = DB[u];
    const double* w = DW.data() + u * flat;
    for (std::size_t i = 0; i < flat; ++i) z += w[i] * x[i];
    cache.h_pre[u] = z;
    cache.h[u] = std::max(0.0, z);
  }
  cache.logits.assign(2, 0.0);
  for (std::size_t o = 0; o < 2; ++o) {
    double z = OB[o];
    for (std::size_t u = 0; u < units; ++u) z += OW[o * units + u] * cache.h[u];
    cache.logits[o] = z;
  }
  const double m = std::max(cache.logits[0], cache.logits[1]);
  const double e0 = std::exp(cache.logits[0] - m), e1 = std::exp(cache.logits[1] - m);
  cache.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
}

void CnnModel::backward(const Cache& cache, std::span<const double> dlogits, std::vector<Tensor>* grads,
                        std::vector<double>* dinput, bool guided) const {
  const std::size_t n_conv = spec_.conv.size();
  const auto& DW = params_[2 * n_conv].data;
  const auto& OW = params_[2 * n_conv + 2].data;
  const std::size_t units = cache.h.size();
  const std::vector<double>& flat_in = cache.layers.back().out;
  const std::size_t flat = flat_in.size();

  std::vector<double> dh(units, 0.0);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t u = 0; u < units; ++u) dh[u] += OW[o * units + u] * dlogits[o];
  if (grads) {
    auto& gOW = (*grads)[2 * n_conv + 2].data;
    auto& gOB = (*grads)[2 * n_conv + 3].data;
    for (std::size_t o = 0; o < 2; ++o) {
      gOB[o] += dlogits[o];
      for (std::size_t u = 0; u < units; ++u) gOW[o * units + u] += dlogits[o] * cache.h[u];
    }
  }
  for (std::size_t u = 0; u < units; ++u) {
    const bool pass = cache.h_pre[u] > 0 && (!guided || dh[u] > 0);
    dh[u] = pass ? dh[u] : 0.0;
  }
  std::vector<double> dx(flat, 0.0);
  for (std::size_t u = 0; u < units; ++u) {
    if (dh[u] == 0.0) continue;
    const double* w = DW.data() + u * flat;
    for (std::size_t i = 0; i < flat; ++i) dx[i] += w[i] * dh[u];
  }
  if (grads) {
    auto& gDW = (*grads)[2 * n_conv].data;
    auto& gDB = (*grads)[2 * n_conv + 1].data;
    for (std::size_t u = 0; u < units; ++u) {
      gDB[u] += dh[u];
      if (dh[u] == 0.0) continue;
      double* g = gDW.data() + u * flat;
      for (std::size_t i = 0; i < flat; ++i) g[i] += dh[u] * flat_in[i];
    }
  }

  for (std::size_t li = n_conv; li-- > 0;) {
    const auto& ls = spec_.conv[li];
    const auto& L = cache.layers[li];
    const std::size_t s = dims_[li], k = static_cast<std::size_t>(ls.kernel), p = k / 2, sp = s + 2 * p;
    const std::size_t f_count = static_cast<std::size_t>(ls.filters);
    const std::size_t channels = li == 0 ? 1 : static_cast<std::size_t>(spec_.conv[li - 1].filters);
    const auto& W = params_[2 * li].data;

    if (!L.mask.empty())
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= L.mask[i];
    std::vector<double> dpre(L.act.size(), 0.0);
    for (std::size_t i = 0; i < dx.size(); ++i) dpre[L.argmax[i]] += dx[i];
    for (std::size_t i = 0; i < dpre.size(); ++i) {
      if (ls.activation == Activation::kRelu) {
        const bool pass = L.pre[i] > 0 && (!guided || dpre[i] > 0);
        dpre[i] = pass ? dpre[i] : 0.0;
      } else {
        dpre[i] *= L.act[i] * (1.0 - L.act[i]);
      }
    }

    if (grads) {
      auto& gW = (*grads)[2 * li].data;
      auto& gB = (*grads)[2 * li + 1].data;
      for (std::size_t f = 0; f < f_count; ++f) {
        const double* d = dpre.data() + f * s * s;
        double sum = 0.0;
        for (std::size_t i = 0; i < s * s; ++i) sum += d[i];
        gB[f] += sum;
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const double* in = L.in_pad.data() + c * sp * sp + ky * sp + kx;
              double acc = 0.0;
              for (std::size_t y = 0; y < s; ++y) {
                const double* dr = d + y * s;
                const double* ir = in + y * sp;
                for (std::size_t xx = 0; xx < s; ++xx) acc += dr[xx] * ir[xx];
              }
              gW[((f * channels + c) * k + ky) * k + kx] += acc;
            }
      }
    }

    if (li == 0 && !dinput) break;
    std::vector<double> din_pad(channels * sp * sp, 0.0);
    for (std::size_t f = 0; f < f_count; ++f) {
      const double* d = dpre.data() + f * s * s;
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double w = W[((f * channels + c) * k + ky) * k + kx];
            double* out = din_pad.data() + c * sp * sp + ky * sp + kx;
            for (std::size_t y = 0; y < s; ++y) {
              double* orow = out + y * sp;
              const double* dr = d + y * s;
              for (std::size_t xx = 0; xx < s; ++xx) orow[xx] += w * dr[xx];
            }
          }
    }
    dx.assign(channels * s * s, 0.0);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < s; ++y)
        std::copy_n(din_pad.begin() + static_cast<std::ptrdiff_t>(c * sp * sp + (y + p) * sp + p), s,
                    dx.begin() + static_cast<std::ptrdiff_t>((c * s + y) * s));
  }
  if (dinput) *dinput = std::move(dx);
}

std::vector<double> CnnModel::probabilities(std::span<const double> image) const {
  Cache c;
  forward(image, c, nullptr);
  return c.probs;
}

double CnnModel::class_score(std::span<const double> image, int target) const {
  Cache c;
  forward(image, c, nullptr);
  return c.logits.at(static_cast<std::size_t>(target));
}

double CnnModel::loss(const Matrix& images, std::span<const int> labels, std::vector<Tensor>* grads, Rng* dropout,
                      std::vector<double>* positive) const {
  const std::size_t n = images.rows();
  if (labels.size() != n) throw Error(ErrorCode::kLengthMismatch, "CNN loss: labels do not match images");
  if (n == 0) return 0.0;
  if (positive) positive->assign(n, 0.0);
  // Per-sample dropout streams are drawn in sample order.
  std::vector<std::uint64_t> seeds(n, 0);
  if (dropout)
    for (auto& s : seeds) s = dropout->next();

  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::vector<Tensor>> slots(grads ? std::min(workers, n) : 0);
  for (auto& s : slots) s = zero_gradients();
  std::vector<double> sample_loss(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t start = 0; start < n; start += std::max<std::size_t>(1, slots.size())) {
    const std::size_t chunk = std::min(std::max<std::size_t>(1, slots.size()), n - start);
    parallel_for(chunk, [&](std::size_t j) {
      const std::size_t i = start + j;
      Cache cache;
      if (dropout) {
        Rng rng(seeds[i]);
        forward(images.row(i), cache, &rng);
      } else {
        forward(images.row(i), cache, nullptr);
      }
      const int y = labels[i];
      const double m = std::max(cache.logits[0], cache.logits[1]);
      const double lse = m + std::log(std::exp(cache.logits[0] - m) + std::exp(cache.logits[1] - m));
      sample_loss[i] = lse - cache.logits[static_cast<std::size_t>(y)];
      if (positive) (*positive)[i] = cache.probs[1];
      if (grads) {
        auto& slot = slots[j];
        for (auto& t : slot) std::fill(t.data.begin(), t.data.end(), 0.0);
        const double d[2] = {(cache.probs[0] - (y == 0)) * inv_n, (cache.probs[1] - (y == 1)) * inv_n};
        backward(cache, d, &slot, nullptr, false);
      }
    });
    if (grads)
      for (std::size_t j = 0; j < chunk; ++j)
        for (std::size_t t = 0; t < grads->size(); ++t) {
          auto& dst = (*grads)[t].data;
          const auto& src = slots[j][t].data;
          for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
        }
  }
  double total = 0.0;
  for (double l : sample_loss) total += l;
  return total * inv_n;
}

std::vector<double> CnnModel::input_gradient(std::span<const double> image, int target) const {
  Cache c;
  forward(image, c, nullptr);
  double d[2] = {0.0, 0.0};
  d[target] = 1.0;
  std::vector<double> g;
  backward(c, d, nullptr, &g, false);
  return g;
}

std::vector<double> CnnModel::saliency(std::span<const double> image, int target, bool guided) const {
  if (target != 0 && target != 1) throw Error(ErrorCode::kInvalidArgument, "saliency target must be 0 or 1");
  Cache c;
  forward(image, c, nullptr);
  double d[2] = {0.0, 0.0};
  d[target] = 1.0;
  std::vector<double> g;
  backward(c, d, nullptr, &g, guided);
  for (double& v : g) v = std::abs(v);
  return g;
}

std::vector<double> CnnModel::predict_proba_images(const Matrix& images) const {
  std::vector<double> out(images.rows());
  parallel_for(images.rows(), [&](std::size_t r) { out[r] = probabilities(images.row(r))[1]; });
  return out;
}

std::vector<double> CnnModel::predict_proba(const Matrix& x) const {
  return predict_proba_images(encoding_.encode_all(x));
}

Json CnnModel::to_json() const {
  Json j;
  j["type"] = "cnn";
  j["spec"] = spec_.to_json();
  j["encoding"] = encoding_.to_json();
  j["schema"] = schema;
  auto& ps = j["parameters"] = Json::array();
  for (const auto& t : params_) ps.push_back({{"name", t.name}, {"shape", t.shape}, {"data", t.data}});
  auto& h = j["history"] = Json::array();
  for (const auto& e : history)
    h.push_back({{"train_loss", e.train_loss},
                 {"train_accuracy", e.train_accuracy},
                 {"val_loss", e.val_loss},
                 {"val_accuracy", e.val_accuracy},
                 {"val_f1", e.val_f1}});
  return j;
}

CnnModel CnnModel::from_json(const nlohmann::json& j) {
  CnnModel m(CnnSpec::from_json(j.at("spec")), ImageEncoding::from_json(j.at("encoding")));
  m.schema = j.at("schema").get<std::vector<std::string>>();
  const auto& ps = j.at("parameters");
  if (ps.size() != m.params_.size()) throw Error(ErrorCode::kShapeMismatch, "CNN parameter count mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].at("shape").get<std::vector<std::size_t>>() != m.params_[i].shape)
      throw Error(ErrorCode::kShapeMismatch, "CNN parameter '" + m.params_[i].name + "' has the wrong shape");
    m.params_[i].data = ps[i].at("data").get<std::vector<double>>();
  }
  for (const auto& e : j.at("history"))
    m.history.push_back({e.at("train_loss").get<double>(), e.at("train_accuracy").get<double>(),
                         e.at("val_loss").get<double>(), e.at("val_accuracy").get<double>(),
                         e.at("val_f1").get<double>()});
  return m;
}

// ---------------------------------------------------------------------------
// Training

CnnModel train_cnn(const LabeledData& train, const LabeledData& val, const CnnSpec& spec) {
  spec.validate();
  if (train.size() == 0) throw Error(ErrorCode::kInvalidArgument, "CNN training set is empty");
  CnnModel model(spec, ImageEncoding::fit(train.x, spec.side));
  model.schema = train.feature_names;
  const Matrix images = model.encoding().encode_all(train.x);
  const Matrix val_images = val.size() ? model.encoding().encode_all(val.x) : Matrix();

  auto& params = model.parameters();
  std::vector<Tensor> m1 = model.zero_gradients(), m2 = model.zero_gradients();
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kRho = 0.9, kEps = 1e-7;
  long step = 0;
  const std::size_t n = train.size(), batch = static_cast<std::size_t>(spec.batch_size);

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(spec.seed, 2 * static_cast<std::uint64_t>(epoch) + 1));
    shuffle.shuffle(std::span(order));
    Rng dropout(derive_seed(spec.seed, 2 * static_cast<std::uint64_t>(epoch) + 2));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(start + b));
      const Matrix xb = images.select_rows(rows);
      std::vector<int> yb(b);
      for (std::size_t i = 0; i < b; ++i) yb[i] = train.y[rows[i]];
      std::vector<Tensor> grads = model.zero_gradients();
      std::vector<double> pos;
      const double l = model.loss(xb, yb, &grads, &dropout, &pos);
      if (!std::isfinite(l)) {
        throw CnnDivergence("CNN loss became non-finite in epoch " + std::to_string(epoch + 1), model.history);
      }
      loss_sum += l * static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) correct += (pos[i] >= 0.5) == (yb[i] == 1);

      ++step;
      for (std::size_t t = 0; t < params.size(); ++t) {
        auto& w = params[t].data;
        const auto& g = grads[t].data;
        auto& a = m1[t].data;
        auto& v = m2[t].data;
        if (spec.optimizer == OptimizerKind::kAdam) {
          const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
          for (std::size_t e = 0; e < w.size(); ++e) {
            a[e] = kBeta1 * a[e] + (1.0 - kBeta1) * g[e];
            v[e] = kBeta2 * v[e] + (1.0 - kBeta2) * g[e] * g[e];
            w[e] -= spec.learning_rate * (a[e] / c1) / (std::sqrt(v[e] / c2) + kEps);
          }
        } else {
          for (std::size_t e = 0; e < w.size(); ++e) {
            v[e] = kRho * v[e] + (1.0 - kRho) * g[e] * g[e];
            w[e] -= spec.learning_rate * g[e] / (std::sqrt(v[e]) + kEps);
          }
        }
      }
    }
    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (val.size()) {
      std::vector<double> pos;
      stats.val_loss = model.loss(val_images, val.y, nullptr, nullptr, &pos);
      std::vector<int> pred(pos.size());
      for (std::size_t i = 0; i < pos.size(); ++i) pred[i] = pos[i] >= 0.5;
      const Metrics m = metrics(confusion(val.y, pred));
      stats.val_accuracy = m.accuracy;
      stats.val_f1 = m.f1;
    }
    model.history.push_back(stats);
  }
  return model;
}

void write_pgm(std::ostream& out, std::span<const double> pixels, std::size_t side, double lo, double hi) {
  if (pixels.size() != side * side) throw Error(ErrorCode::kShapeMismatch, "PGM pixel count mismatch");
  out << "P2\n" << side << ' ' << side << "\n255\n";
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double v = hi > lo ? (pixels[y * side + x] - lo) / (hi - lo) : 0.0;
      out << (x ? " " : "") << static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
    out << '\n';
  }
}

}  // namespace recon
