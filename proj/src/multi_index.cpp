#include "efflob/multi_index.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "efflob/error.hpp"

namespace efflob {

namespace {

// Appends all exponent vectors of total degree `remaining` over dims [pos, d),
// first exponent decreasing.
void enumerate(int pos, int remaining, std::vector<int>& cur, std::vector<int>& out) {
  const int d = static_cast<int>(cur.size());
  if (pos == d - 1) {
    cur[pos] = remaining;
    out.insert(out.end(), cur.begin(), cur.end());
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    cur[pos] = k;
    enumerate(pos + 1, remaining - k, cur, out);
  }
}

}  // namespace

std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

MultiIndexSet::MultiIndexSet(int dim, int max_degree) : dim_(dim), max_degree_(max_degree) {
  if (dim < 1 || max_degree < 0) throw Error(ErrorCode::DimensionMismatch, "bad multi-index set");
  std::vector<int> cur(static_cast<std::size_t>(dim));
  for (int n = 0; n <= max_degree; ++n) enumerate(0, n, cur, exps_);
  const std::size_t count = exps_.size() / static_cast<std::size_t>(dim);
  degrees_.resize(count);
  std::size_t table = 1;
  for (int i = 0; i < dim; ++i) table *= static_cast<std::size_t>(max_degree + 1);
  lookup_.assign(table, npos);
  for (std::size_t idx = 0; idx < count; ++idx) {
    auto a = alpha(idx);
    int deg = 0;
    std::size_t key = 0;
    for (int i = dim - 1; i >= 0; --i) {
      deg += a[i];
      key = key * static_cast<std::size_t>(max_degree + 1) + static_cast<std::size_t>(a[i]);
    }
    degrees_[idx] = deg;
    lookup_[key] = static_cast<std::ptrdiff_t>(idx);
  }
}

std::shared_ptr<const MultiIndexSet> MultiIndexSet::get(int dim, int max_degree) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const MultiIndexSet>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{dim, max_degree}];
  if (!slot) slot = std::make_shared<const MultiIndexSet>(dim, max_degree);
  return slot;
}

std::ptrdiff_t MultiIndexSet::index(std::span<const int> a) const {
  if (static_cast<int>(a.size()) != dim_) return npos;
  int deg = 0;
  std::size_t key = 0;
  for (int i = dim_ - 1; i >= 0; --i) {
    if (a[i] < 0) return npos;
    deg += a[i];
    if (deg > max_degree_) return npos;
    key = key * static_cast<std::size_t>(max_degree_ + 1) + static_cast<std::size_t>(a[i]);
  }
  return lookup_[key];
}

std::ptrdiff_t MultiIndexSet::neighbour(std::size_t idx, int axis, int by) const {
  std::vector<int> a(alpha(idx).begin(), alpha(idx).end());
  a[static_cast<std::size_t>(axis)] += by;
  return index(a);
}

MultiIndexPoly::MultiIndexPoly(int dim, int max_degree)
    : MultiIndexPoly(MultiIndexSet::get(dim, max_degree)) {}

MultiIndexPoly::MultiIndexPoly(std::shared_ptr<const MultiIndexSet> set)
    : set_(std::move(set)), coeffs_(set_->size(), 0.0) {}

double MultiIndexPoly::evaluate(std::span<const double> y) const {
  if (static_cast<int>(y.size()) != dim()) throw Error(ErrorCode::DimensionMismatch, "evaluate");
  double sum = 0.0;
  for (std::size_t idx = 0; idx < size(); ++idx) {
    double term = coeffs_[idx];
    auto a = set_->alpha(idx);
    for (int i = 0; i < dim(); ++i)
      for (int k = 0; k < a[i]; ++k) term *= y[i];
    sum += term;
  }
  return sum;
}

MultiIndexPoly MultiIndexPoly::operator*(const MultiIndexPoly& other) const {
  if (other.set_ != set_ && (other.dim() != dim() || other.max_degree() != max_degree()))
    throw Error(ErrorCode::DimensionMismatch, "product of polynomials over different sets");
  MultiIndexPoly out(set_);
  std::vector<int> sum(static_cast<std::size_t>(dim()));
  for (std::size_t i = 0; i < size(); ++i) {
    if (coeffs_[i] == 0.0) continue;
    for (std::size_t j = 0; j < size(); ++j) {
      if (set_->degree(i) + set_->degree(j) > max_degree()) continue;
      auto ai = set_->alpha(i);
      auto aj = set_->alpha(j);
      for (int k = 0; k < dim(); ++k) sum[k] = ai[k] + aj[k];
      out.coeffs_[static_cast<std::size_t>(set_->index(sum))] += coeffs_[i] * other.coeffs_[j];
    }
  }
  return out;
}

MultiIndexPoly& MultiIndexPoly::operator+=(const MultiIndexPoly& other) {
  if (other.size() != size()) throw Error(ErrorCode::DimensionMismatch, "sum");
  for (std::size_t i = 0; i < size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

MultiIndexPoly& MultiIndexPoly::operator-=(const MultiIndexPoly& other) {
  if (other.size() != size()) throw Error(ErrorCode::DimensionMismatch, "difference");
  for (std::size_t i = 0; i < size(); ++i) coeffs_[i] -= other.coeffs_[i];
  return *this;
}

MultiIndexPoly& MultiIndexPoly::operator*=(double s) {
  for (double& c : coeffs_) c *= s;
  return *this;
}

bool MultiIndexPoly::all_finite() const {
  for (double c : coeffs_)
    if (!std::isfinite(c)) return false;
  return true;
}

double MultiIndexPoly::max_abs() const {
  double m = 0.0;
  for (double c : coeffs_) m = std::max(m, std::abs(c));
  return m;
}

MultiIndexPoly shift_coeffs(const MultiIndexPoly& a, int axis, double shift) {
  if (axis < 0 || axis >= a.dim()) throw Error(ErrorCode::DimensionMismatch, "shift axis");
  if (shift == 0.0) return a;
  const auto& set = a.set();
  MultiIndexPoly out(a.set_ptr());
  for (std::size_t idx = 0; idx < a.size(); ++idx) {
    const int ai = set.alpha(idx)[static_cast<std::size_t>(axis)];
    double acc = 0.0;
    double pow = 1.0;
    for (int n = 0;; ++n) {
      const std::ptrdiff_t src = set.neighbour(idx, axis, n);
      if (src == MultiIndexSet::npos) break;
      acc += a[static_cast<std::size_t>(src)] * static_cast<double>(binomial(ai + n, ai)) * pow;
      pow *= shift;
    }
    out[idx] = acc;
  }
  return out;
}

MultiIndexPoly truncated_exp(const MultiIndexPoly& p) {
  MultiIndexPoly q = p;
  q[0] = 0.0;
  MultiIndexPoly sum(p.set_ptr());
  sum[0] = 1.0;
  MultiIndexPoly term = sum;
  // q has no constant term, so q^j vanishes beyond j = max_degree.
  for (int j = 1; j <= p.max_degree(); ++j) {
    term = term * q;
    term *= 1.0 / j;
    sum += term;
  }
  sum *= std::exp(p[0]);
  return sum;
}

}  // namespace efflob
