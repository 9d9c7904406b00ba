#include "efflob/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "efflob/error.hpp"

namespace efflob {

namespace {

const double kLogCap = std::log(kIntensityCap);

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

CoeffTable::CoeffTable(int dim, int degree, int events)
    : dim_(dim), degree_(degree), events_(events) {
  terms_ = MultiIndexSet::get(dim, degree)->size();
  active_.assign(static_cast<std::size_t>(events), 0);
  coeffs_.assign(static_cast<std::size_t>(events) * terms_, 0.0);
}

void CoeffTable::clear() {
  std::fill(active_.begin(), active_.end(), 0);
  std::fill(coeffs_.begin(), coeffs_.end(), 0.0);
}

double log_intensity(const CoeffTable& table, int k, std::span<const double> y) {
  auto c = table.coeffs(k);
  if (table.degree() == 1) {
    double s = c[0];
    for (int i = 0; i < table.dim(); ++i) s += c[static_cast<std::size_t>(i) + 1] * y[i];
    return s;
  }
  const auto set = MultiIndexSet::get(table.dim(), table.degree());
  double s = 0.0;
  for (std::size_t idx = 0; idx < c.size(); ++idx) {
    double term = c[idx];
    auto a = set->alpha(idx);
    for (int i = 0; i < table.dim(); ++i)
      for (int p = 0; p < a[i]; ++p) term *= y[i];
    s += term;
  }
  return s;
}

double eval_intensity(const CoeffTable& table, int k, std::span<const double> y, bool* overflow) {
  if (!table.active(k)) return 0.0;
  const double e = log_intensity(table, k, y);
  if (!(e <= kLogCap)) {
    if (overflow) *overflow = true;
    return std::numeric_limits<double>::infinity();
  }
  return std::exp(e);
}

double total_intensity(const CoeffTable& table, std::span<const double> y, bool* overflow) {
  double s = 0.0;
  for (int k = 0; k < table.events(); ++k) s += eval_intensity(table, k, y, overflow);
  return s;
}

void log_coeffs_poly(const CoeffTable& table, int k, MultiIndexPoly& out) {
  if (out.dim() != table.dim()) throw Error(ErrorCode::DimensionMismatch, "log_coeffs_poly");
  std::fill(out.coeffs().begin(), out.coeffs().end(), 0.0);
  const auto src = MultiIndexSet::get(table.dim(), table.degree());
  auto c = table.coeffs(k);
  for (std::size_t idx = 0; idx < c.size(); ++idx) {
    const auto pos = out.set().index(src->alpha(idx));
    if (pos != MultiIndexSet::npos) out[static_cast<std::size_t>(pos)] = c[idx];
  }
}

void taylor_sum_coeffs(const CoeffTable& table, MultiIndexPoly& out) {
  if (out.dim() != table.dim()) throw Error(ErrorCode::DimensionMismatch, "taylor_sum_coeffs");
  std::fill(out.coeffs().begin(), out.coeffs().end(), 0.0);
  const auto& set = out.set();
  const int d = table.dim();
  if (table.degree() <= 1) {
    // exp(c0 + c.y) = e^{c0} prod_i sum_n c_i^n y_i^n / n!
    const int n = out.max_degree();
    std::vector<double> pw(static_cast<std::size_t>(d * (n + 1)));
    std::vector<double> inv_fact(static_cast<std::size_t>(n + 1));
    for (int m = 0; m <= n; ++m) inv_fact[m] = 1.0 / factorial(m);
    for (int k = 0; k < table.events(); ++k) {
      if (!table.active(k)) continue;
      auto c = table.coeffs(k);
      const double e0 = std::exp(c[0]);
      for (int i = 0; i < d; ++i) {
        const double ci = table.degree() == 1 ? c[static_cast<std::size_t>(i) + 1] : 0.0;
        double p = 1.0;
        for (int m = 0; m <= n; ++m) {
          pw[i * (n + 1) + m] = p * inv_fact[m];
          p *= ci;
        }
      }
      for (std::size_t idx = 0; idx < out.size(); ++idx) {
        auto a = set.alpha(idx);
        double term = e0;
        for (int i = 0; i < d; ++i) term *= pw[i * (n + 1) + a[i]];
        out[idx] += term;
      }
      out[0] -= 1.0;
    }
    return;
  }
  MultiIndexPoly lp(out.set_ptr());
  for (int k = 0; k < table.events(); ++k) {
    if (!table.active(k)) continue;
    log_coeffs_poly(table, k, lp);
    out += truncated_exp(lp);
    out[0] -= 1.0;
  }
}

MultiIndexPoly taylor_sum_coeffs(const CoeffTable& table, int n_deg) {
  MultiIndexPoly out(table.dim(), n_deg);
  taylor_sum_coeffs(table, out);
  return out;
}

const char* transform_name(Transform t) {
  switch (t) {
    case Transform::Identity: return "identity";
    case Transform::Log: return "log";
    case Transform::Atanh: return "atanh";
    case Transform::NegExp: return "negexp";
  }
  return "?";
}

double to_unconstrained(Transform t, double v) {
  switch (t) {
    case Transform::Identity:
      if (!std::isfinite(v)) break;
      return v;
    case Transform::Log:
      if (!(v > 0.0) || !std::isfinite(v)) break;
      return std::log(v);
    case Transform::Atanh:
      if (!(v > -1.0 && v < 1.0)) break;
      return std::atanh(v);
    case Transform::NegExp:
      if (!(v < 0.0) || !std::isfinite(v)) break;
      return std::log(-v);
  }
  throw Error(ErrorCode::OutOfDomain,
              std::string("value ") + std::to_string(v) + " outside the domain of " + transform_name(t));
}

double from_unconstrained(Transform t, double u) {
  if (!std::isfinite(u)) throw Error(ErrorCode::OutOfDomain, "non-finite unconstrained value");
  switch (t) {
    case Transform::Identity: return u;
    case Transform::Log: return std::exp(u);
    case Transform::Atanh: return std::tanh(u);
    case Transform::NegExp: return -std::exp(u);
  }
  return u;
}

int ThetaSpec::index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

double ThetaSpec::at(const std::string& name) const {
  const int i = index(name);
  if (i < 0) throw Error(ErrorCode::Validation, "unknown parameter '" + name + "'");
  return values[static_cast<std::size_t>(i)];
}

void ThetaSpec::set(const std::string& name, double v) {
  const int i = index(name);
  if (i < 0) throw Error(ErrorCode::Validation, "unknown parameter '" + name + "'");
  values[static_cast<std::size_t>(i)] = v;
}

std::vector<double> ThetaSpec::to_unconstrained() const {
  std::vector<double> u(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) u[i] = efflob::to_unconstrained(transforms[i], values[i]);
  return u;
}

ThetaSpec ThetaSpec::with_unconstrained(std::span<const double> u) const {
  if (u.size() != values.size()) throw Error(ErrorCode::DimensionMismatch, "unconstrained vector length");
  ThetaSpec out = *this;
  for (std::size_t i = 0; i < u.size(); ++i) out.values[i] = efflob::from_unconstrained(transforms[i], u[i]);
  return out;
}

void ThetaSpec::validate() const {
  if (names.size() != values.size() || transforms.size() != values.size())
    throw Error(ErrorCode::DimensionMismatch, "theta names/transforms/values lengths differ");
  for (std::size_t i = 0; i < values.size(); ++i) {
    try {
      (void)efflob::to_unconstrained(transforms[i], values[i]);
    } catch (const Error&) {
      throw Error(ErrorCode::OutOfDomain, "parameter '" + names[i] + "' out of domain");
    }
  }
}

}  // namespace efflob
