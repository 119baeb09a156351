#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "recon/common.hpp"
#include "recon/learners.hpp"

namespace recon {
namespace {

double kernel_value(const SvmParams& p, std::span<const double> a, std::span<const double> b) {
  switch (p.kernel) {
    case SvmKernel::kRbf: {
      double s = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
      return std::exp(-p.gamma * s);
    }
    case SvmKernel::kPoly: {
      double dot = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) dot += a[c] * b[c];
      const double base = p.gamma * dot + p.coef0;
      // Non-integer degrees stay defined for negative bases.
      return std::copysign(std::pow(std::abs(base), p.degree), base);
    }
    case SvmKernel::kLinear: {
      double dot = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) dot += a[c] * b[c];
      return dot;
    }
  }
  return 0.0;
}

// Rows of Q_ij = y_i y_j K(x_i, x_j), computed on demand with LRU eviction.
class QCache {
 public:
  QCache(const Matrix& x, const std::vector<int>& y, const SvmParams& p) : x_(x), y_(y), p_(p) {
    const double bytes_per_row = static_cast<double>(x.rows()) * sizeof(double);
    capacity_ = std::max<std::size_t>(2, static_cast<std::size_t>(p.cache_mb * 1024.0 * 1024.0 / bytes_per_row));
  }

  const std::vector<double>& row(std::size_t i) {
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (index_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    std::vector<double> values(x_.rows());
    for (std::size_t j = 0; j < x_.rows(); ++j) values[j] = y_[i] * y_[j] * kernel_value(p_, x_.row(i), x_.row(j));
    lru_.emplace_front(i, std::move(values));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  const Matrix& x_;
  const std::vector<int>& y_;
  const SvmParams& p_;
  std::size_t capacity_;
  std::list<std::pair<std::size_t, std::vector<double>>> lru_;
  std::unordered_map<std::size_t, std::list<std::pair<std::size_t, std::vector<double>>>::iterator> index_;
};

struct SmoResult {
  std::vector<double> alpha;
  double rho = 0.0;
  long iterations = 0;
  bool converged = false;
};

// Dual C-SVC by SMO with second-order working-set selection, no shrinking.
SmoResult solve_dual(const Matrix& x, const std::vector<int>& y, const SvmParams& p) {
  constexpr double kTau = 1e-12;
  const std::size_t n = x.rows();
  const double C = p.C;
  QCache q(x, y, p);
  std::vector<double> qd(n);
  for (std::size_t i = 0; i < n; ++i) qd[i] = kernel_value(p, x.row(i), x.row(i));
  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  SmoResult res;
  while (res.iterations < p.max_iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    long gi = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -grad[t] >= gmax) gmax = -grad[t], gi = static_cast<long>(t);
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t], gi = static_cast<long>(t);
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    long gj = -1;
    double best = std::numeric_limits<double>::infinity();
    const std::vector<double>* qi = gi >= 0 ? &q.row(static_cast<std::size_t>(gi)) : nullptr;
    for (std::size_t t = 0; t < n && qi; ++t) {
      const auto i = static_cast<std::size_t>(gi);
      if (y[t] == 1) {
        if (lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0) {
          double quad = qd[i] + qd[t] - 2.0 * y[i] * (*qi)[t];
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best) best = obj, gj = static_cast<long>(t);
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          double quad = qd[i] + qd[t] + 2.0 * y[i] * (*qi)[t];
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best) best = obj, gj = static_cast<long>(t);
        }
      }
    }
    if (gi < 0 || gj < 0 || gmax + gmax2 < p.tol) {
      res.converged = true;
      break;
    }
    ++res.iterations;
    const auto i = static_cast<std::size_t>(gi), j = static_cast<std::size_t>(gj);
    const std::vector<double> qi_row = q.row(i);
    const std::vector<double>& qj_row = q.row(j);
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = qd[i] + qd[j] + 2.0 * qi_row[j];
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else if (alpha[i] < 0) {
        alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = C - diff;
      } else if (alpha[j] > C) {
        alpha[j] = C, alpha[i] = C + diff;
      }
    } else {
      double quad = qd[i] + qd[j] - 2.0 * qi_row[j];
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = sum - C;
      } else if (alpha[j] < 0) {
        alpha[j] = 0, alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = sum - C;
      } else if (alpha[i] < 0) {
        alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += qi_row[t] * dai + qj_row[t] * daj;
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  res.rho = n_free ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  res.alpha = std::move(alpha);
  return res;
}

// Platt scaling by Newton's method with backtracking on the regularized
// targets; returns (A, B) with P(y=1|f) = 1 / (1 + exp(A f + B)).
std::pair<double, double> fit_platt(const std::vector<double>& f, const std::vector<int>& y) {
  double prior1 = 0, prior0 = 0;
  for (int v : y) (v == 1 ? prior1 : prior0) += 1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  const std::size_t n = f.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] == 1 ? hi : lo;
  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double aa, double bb) {
    double fv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = f[i] * aa + bb;
      fv += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return fv;
  };
  double fval = objective(a, b);
  constexpr double kSigma = 1e-12, kEps = 1e-5, kMinStep = 1e-10;
  for (int it = 0; it < 100; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = f[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += f[i] * f[i] * d2;
      h22 += d2;
      h21 += f[i] * d2;
      const double d1 = t[i] - p;
      g1 += f[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 0.0001 * step * gd) {
        a = na, b = nb, fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {a, b};
}

}  // namespace

std::unique_ptr<SvmModel> SvmModel::fit(const LabeledData& train, const SvmParams& params) {
  auto m = std::make_unique<SvmModel>();
  m->schema_ = train.feature_names;
  m->params = params;
  m->scaler = MinMaxScaler::fit(train.x);
  const Matrix xs = m->scaler.transform(train.x);
  std::vector<int> ys(train.size());
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = train.y[i] == 1 ? 1 : -1;
  m->y_sign = ys;

  const bool one_class = std::all_of(ys.begin(), ys.end(), [&](int v) { return v == ys.front(); });
  if (one_class) {
    // Constant decision: rho = -y makes f(x) = y everywhere.
    m->alpha.assign(ys.size(), 0.0);
    m->rho = -ys.front();
    m->support = Matrix(0, xs.cols());
    m->platt_a = -1.0;
    m->platt_b = ys.front() == 1 ? -std::numeric_limits<double>::max() : std::numeric_limits<double>::max();
    return m;
  }

  SmoResult res = solve_dual(xs, ys, params);
  m->converged_ = res.converged;
  m->iterations = res.iterations;
  m->rho = res.rho;
  m->alpha = res.alpha;
  std::vector<std::size_t> sv;
  for (std::size_t i = 0; i < res.alpha.size(); ++i)
    if (res.alpha[i] > 0) sv.push_back(i);
  m->support = xs.select_rows(sv);
  for (auto i : sv) m->dual_coef.push_back(res.alpha[i] * ys[i]);

  const std::vector<double> f = m->decision_function(train.x);
  std::tie(m->platt_a, m->platt_b) = fit_platt(f, train.y);
  return m;
}

std::vector<double> SvmModel::decision_function(const Matrix& x) const {
  std::vector<double> out(x.rows()), row(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    scaler.transform_row(x.row(r), row);
    double s = -rho;
    for (std::size_t i = 0; i < support.rows(); ++i) s += dual_coef[i] * kernel_value(params, support.row(i), row);
    out[r] = s;
  }
  return out;
}

std::vector<double> SvmModel::positive_proba(const Matrix& x) const {
  std::vector<double> f = decision_function(x);
  for (double& v : f) {
    const double z = platt_a * v + platt_b;
    v = z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
  }
  return f;
}

Json SvmModel::params_json() const {
  Json j = LearnerSpec::svm(params).to_json();
  j.erase("kind");
  return j;
}

Json SvmModel::fitted_json() const {
  Json sv = Json::array();
  for (std::size_t r = 0; r < support.rows(); ++r)
    sv.push_back(std::vector<double>(support.row(r).begin(), support.row(r).end()));
  return {{"scaler", scaler.to_json()}, {"support", sv},         {"dual_coef", dual_coef},
          {"rho", rho},                 {"platt_a", platt_a},   {"platt_b", platt_b},
          {"iterations", iterations}};
}

std::unique_ptr<SvmModel> SvmModel::from_fitted(const nlohmann::json& params, const nlohmann::json& fitted) {
  auto m = std::make_unique<SvmModel>();
  nlohmann::json p = params;
  p["kind"] = "svm";
  m->params = std::get<SvmParams>(LearnerSpec::from_json(p).params);
  m->scaler = MinMaxScaler::from_json(fitted.at("scaler"));
  const auto& sv = fitted.at("support");
  m->support = Matrix(sv.size(), m->scaler.lo.size());
  for (std::size_t r = 0; r < sv.size(); ++r)
    for (std::size_t c = 0; c < m->support.cols(); ++c) m->support(r, c) = sv[r].at(c).get<double>();
  m->dual_coef = fitted.at("dual_coef").get<std::vector<double>>();
  m->rho = fitted.at("rho").get<double>();
  m->platt_a = fitted.at("platt_a").get<double>();
  m->platt_b = fitted.at("platt_b").get<double>();
  m->iterations = fitted.at("iterations").get<long>();
  return m;
}

}  // namespace recon
