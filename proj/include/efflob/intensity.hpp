#pragma once

// Exponential-polynomial intensities Lambda^k(x, y) = exp(sum_a b^k_a(x) y^a),
// their Taylor sums for the likelihood ODE, and parameter transforms.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "efflob/multi_index.hpp"

namespace efflob {

// Intensities above this are a numerical fault of the parameter point.
inline constexpr double kIntensityCap = 1e12;

// Log-intensity coefficients of every event type at one state x, each a
// polynomial in y of total degree `degree` in the MultiIndexSet layout.
class CoeffTable {
 public:
  CoeffTable() = default;
  CoeffTable(int dim, int degree, int events);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int events() const { return events_; }
  std::size_t terms() const { return terms_; }

  bool active(int k) const { return active_[static_cast<std::size_t>(k)] != 0; }
  void set_active(int k, bool on) { active_[static_cast<std::size_t>(k)] = on ? 1 : 0; }

  std::span<double> coeffs(int k) {
    return {coeffs_.data() + static_cast<std::size_t>(k) * terms_, terms_};
  }
  std::span<const double> coeffs(int k) const {
    return {coeffs_.data() + static_cast<std::size_t>(k) * terms_, terms_};
  }

  // Sets every event inactive with zero coefficients.
  void clear();

 private:
  int dim_ = 0;
  int degree_ = 0;
  int events_ = 0;
  std::size_t terms_ = 0;
  std::vector<std::uint8_t> active_;
  std::vector<double> coeffs_;
};

// Log-intensity of event k at y (no activity check).
double log_intensity(const CoeffTable& table, int k, std::span<const double> y);

// Lambda^k(x, y); 0 when inactive. Above kIntensityCap returns +inf and sets
// *overflow.
double eval_intensity(const CoeffTable& table, int k, std::span<const double> y,
                      bool* overflow = nullptr);

// Sum over active k of Lambda^k(x, y) (no -1 shift).
double total_intensity(const CoeffTable& table, std::span<const double> y, bool* overflow = nullptr);

// Coefficients of y -> sum_{k active} (Lambda^k(x, y) - 1) truncated at n_deg.
MultiIndexPoly taylor_sum_coeffs(const CoeffTable& table, int n_deg);
// Same, written into an existing polynomial (no allocation for degree 1).
void taylor_sum_coeffs(const CoeffTable& table, MultiIndexPoly& out);

// Coefficients of log Lambda^k as a polynomial of degree n_deg.
void log_coeffs_poly(const CoeffTable& table, int k, MultiIndexPoly& out);

enum class Transform : std::uint8_t { Identity, Log, Atanh, NegExp };

const char* transform_name(Transform t);
double to_unconstrained(Transform t, double value);
double from_unconstrained(Transform t, double u);

// Named parameter vector with a per-entry constraint transform.
struct ThetaSpec {
  std::vector<std::string> names;
  std::vector<Transform> transforms;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  int index(const std::string& name) const;  // -1 if absent
  double at(const std::string& name) const;
  void set(const std::string& name, double v);

  std::vector<double> to_unconstrained() const;
  ThetaSpec with_unconstrained(std::span<const double> u) const;
  void validate() const;
};

}  // namespace efflob
