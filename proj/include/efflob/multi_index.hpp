#pragma once

// Dense polynomials in d variables, truncated at a total degree, with
// coefficients stored in graded-lexicographic order: by total degree, then by
// decreasing first exponent, e.g. for d = 2: 1, y1, y2, y1^2, y1 y2, y2^2, ...

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace efflob {

class MultiIndexSet {
 public:
  static constexpr std::ptrdiff_t npos = -1;

  MultiIndexSet(int dim, int max_degree);

  // Shared, immutable instance for (dim, max_degree).
  static std::shared_ptr<const MultiIndexSet> get(int dim, int max_degree);

  int dim() const { return dim_; }
  int max_degree() const { return max_degree_; }
  std::size_t size() const { return degrees_.size(); }

  std::span<const int> alpha(std::size_t idx) const {
    return {exps_.data() + idx * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  int degree(std::size_t idx) const { return degrees_[idx]; }

  // Position of alpha, or npos when |alpha| exceeds the truncation degree.
  std::ptrdiff_t index(std::span<const int> alpha) const;
  // Position of alpha(idx) + by * e_axis (npos if out of range or negative).
  std::ptrdiff_t neighbour(std::size_t idx, int axis, int by) const;

 private:
  int dim_;
  int max_degree_;
  std::vector<int> exps_;
  std::vector<int> degrees_;
  std::vector<std::ptrdiff_t> lookup_;  // dense (max_degree+1)^dim table
};

std::size_t binomial(int n, int k);

class MultiIndexPoly {
 public:
  MultiIndexPoly(int dim, int max_degree);
  explicit MultiIndexPoly(std::shared_ptr<const MultiIndexSet> set);

  const MultiIndexSet& set() const { return *set_; }
  std::shared_ptr<const MultiIndexSet> set_ptr() const { return set_; }
  int dim() const { return set_->dim(); }
  int max_degree() const { return set_->max_degree(); }
  std::size_t size() const { return coeffs_.size(); }

  std::span<double> coeffs() { return coeffs_; }
  std::span<const double> coeffs() const { return coeffs_; }
  double& operator[](std::size_t i) { return coeffs_[i]; }
  double operator[](std::size_t i) const { return coeffs_[i]; }

  double evaluate(std::span<const double> y) const;

  // Truncated product.
  MultiIndexPoly operator*(const MultiIndexPoly& other) const;
  MultiIndexPoly& operator+=(const MultiIndexPoly& other);
  MultiIndexPoly& operator-=(const MultiIndexPoly& other);
  MultiIndexPoly& operator*=(double s);

  bool all_finite() const;
  double max_abs() const;

 private:
  std::shared_ptr<const MultiIndexSet> set_;
  std::vector<double> coeffs_;
};

// Coefficients of y -> p(y + shift * e_axis).
MultiIndexPoly shift_coeffs(const MultiIndexPoly& a, int axis, double shift);

// Truncated exp(p) for a polynomial p.
MultiIndexPoly truncated_exp(const MultiIndexPoly& p);

}  // namespace efflob
