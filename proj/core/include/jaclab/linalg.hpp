// Small dense-matrix linear algebra used throughout the lab: SVD,
// Moore-Penrose pseudo-inverse and its directional derivative, condition
// numbers and positive-definiteness tests. Matrices here are at most a few
// hundred entries, so everything favors determinism and checkability over
// asymptotic speed.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace jaclab {

struct SvdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. Constructors that accept entry data
// reject NaN/Inf; in-place writes through operator() are unchecked.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);
  Mat(std::initializer_list<std::initializer_list<double>> rows);

  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Mat transposed() const;
  std::vector<double> mul_vec(const std::vector<double>& v) const;
  // y = A^T v without forming the transpose.
  std::vector<double> tmul_vec(const std::vector<double>& v) const;

  double max_abs() const;     // entrywise infinity norm
  double frobenius() const;
  bool all_finite() const;

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(const Mat& a, const Mat& b);
Mat operator*(double s, const Mat& a);

// Rank-one product a b^T.
Mat outer(const std::vector<double>& a, const std::vector<double>& b);

double vec_dot(const std::vector<double>& a, const std::vector<double>& b);
double vec_norm(const std::vector<double>& v);
std::vector<double> vec_add(const std::vector<double>& a,
                            const std::vector<double>& b);
std::vector<double> vec_sub(const std::vector<double>& a,
                            const std::vector<double>& b);
std::vector<double> vec_scale(double s, const std::vector<double>& v);

// Thin SVD A = U diag(sigma) V^T with r = min(rows, cols). U and V carry
// orthonormal columns even for rank-deficient input (missing directions are
// completed from the standard basis); sigma is sorted nonincreasing.
struct SvdResult {
  Mat u;
  std::vector<double> sigma;
  Mat v;
};

// One-sided Jacobi SVD. Throws SvdError if the sweep cap (100) is reached
// before column pairs decouple.
SvdResult svd(const Mat& a);

// Relative rank threshold: 1e-12 * sigma_max * max(m, n).
double default_rank_tol(double sigma_max, std::size_t m, std::size_t n);

// Moore-Penrose pseudo-inverse: singular values above tol are inverted, the
// rest zeroed. The overload without tol uses default_rank_tol.
Mat pinv(const Mat& a);
Mat pinv(const Mat& a, double tol);

// sigma_max / sigma_min, or +infinity when sigma_min falls at or below the
// default rank threshold. The infinity serializes as "inf" in CSV output.
double cond(const Mat& a);

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
// nonincreasing. The input is symmetrized before iterating.
std::vector<double> symmetric_eigenvalues(const Mat& s);

// True iff x^T M x > 0 for all x != 0, i.e. all eigenvalues of the symmetric
// part (M + M^T)/2 exceed 1e-10.
bool is_positive_definite(const Mat& m);

// Directional derivative of pinv(j) along dj (Golub-Pereyra):
//   dJ+ = -J+ dJ J+ + J+ J+^T dJ^T (I - J J+) + (I - J+ J) dJ^T J+^T J+.
// Requires j full rank with margin (sigma_min > 100 * default tol); throws
// RankError otherwise since the derivative is discontinuous across rank
// changes.
Mat pinv_directional_derivative(const Mat& j, const Mat& dj);

}  // namespace jaclab
