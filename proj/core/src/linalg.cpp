#include "jaclab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jaclab {

namespace {

void check_finite(const std::vector<double>& data, const char* what) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) +
                                  ": non-finite entry rejected");
    }
  }
}

void check_same_shape(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Mat: data length != rows * cols");
  }
  check_finite(data_, "Mat");
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw std::invalid_argument("Mat: ragged initializer");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
  check_finite(data_, "Mat");
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::transposed() const {
  Mat t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

std::vector<double> Mat::mul_vec(const std::vector<double>& v) const {
  if (v.size() != cols_) throw std::invalid_argument("mul_vec: dim mismatch");
  std::vector<double> out(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) acc += (*this)(r, c) * v[c];
    out[r] = acc;
  }
  return out;
}

std::vector<double> Mat::tmul_vec(const std::vector<double>& v) const {
  if (v.size() != rows_) throw std::invalid_argument("tmul_vec: dim mismatch");
  std::vector<double> out(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out[c] += (*this)(r, c) * v[r];
  return out;
}

double Mat::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Mat::frobenius() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return std::sqrt(acc);
}

bool Mat::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Mat operator+(const Mat& a, const Mat& b) {
  check_same_shape(a, b, "operator+");
  Mat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

Mat operator-(const Mat& a, const Mat& b) {
  check_same_shape(a, b, "operator-");
  Mat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

Mat operator*(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("operator*: inner dimension mismatch");
  }
  Mat out(a.rows(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double arv = a(r, k);
      if (arv == 0.0) continue;
      for (std::size_t c = 0; c < b.cols(); ++c) out(r, c) += arv * b(k, c);
    }
  }
  return out;
}

Mat operator*(double s, const Mat& a) {
  Mat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = s * a.data()[i];
  return out;
}

Mat outer(const std::vector<double>& a, const std::vector<double>& b) {
  Mat out(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < b.size(); ++c) out(r, c) = a[r] * b[c];
  return out;
}

double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec_dot: dim");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double vec_norm(const std::vector<double>& v) {
  return std::sqrt(vec_dot(v, v));
}

std::vector<double> vec_add(const std::vector<double>& a,
                            const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec_add: dim");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

std::vector<double> vec_sub(const std::vector<double>& a,
                            const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec_sub: dim");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

std::vector<double> vec_scale(double s, const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = s * v[i];
  return out;
}

namespace {

constexpr int kMaxJacobiSweeps = 100;

// Orthonormalizes the columns of b in place via plane rotations, tracking
// the accumulated rotations in v. Returns false if the sweep cap is hit.
bool one_sided_jacobi(Mat& b, Mat& v) {
  const std::size_t m = b.rows();
  const std::size_t n = b.cols();
  const double tol = 1e-14;
  for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double bp = b(i, p), bq = b(i, q);
          app += bp * bp;
          aqq += bq * bq;
          apq += bp * bq;
        }
        if (app == 0.0 || aqq == 0.0) continue;
        if (std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double bp = b(i, p), bq = b(i, q);
          b(i, p) = c * bp - s * bq;
          b(i, q) = s * bp + c * bq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return true;
  }
  return false;
}

// Fills column `slot` of u with a unit vector orthogonal to columns
// [0, filled). Candidates are the standard basis vectors; two rounds of
// Gram-Schmidt keep the result orthonormal to working precision.
void complete_basis_column(Mat& u, std::size_t slot,
                           const std::vector<std::size_t>& filled) {
  const std::size_t m = u.rows();
  double best_norm = -1.0;
  std::vector<double> best;
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> cand(m, 0.0);
    cand[e] = 1.0;
    for (int round = 0; round < 2; ++round) {
      for (std::size_t j : filled) {
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += cand[i] * u(i, j);
        for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * u(i, j);
      }
    }
    const double nrm = vec_norm(cand);
    if (nrm > best_norm) {
      best_norm = nrm;
      best = std::move(cand);
    }
    if (best_norm > 0.9) break;  // good enough, basis vectors can't all fail
  }
  for (std::size_t i = 0; i < m; ++i) u(i, slot) = best[i] / best_norm;
}

}  // namespace

SvdResult svd(const Mat& a) {
  if (a.empty()) throw std::invalid_argument("svd: empty matrix");
  if (!a.all_finite()) throw std::invalid_argument("svd: non-finite entries");

  const bool flip = a.rows() < a.cols();
  Mat b = flip ? a.transposed() : a;
  const std::size_t m = b.rows();
  const std::size_t n = b.cols();

  Mat v = Mat::identity(n);
  if (!one_sided_jacobi(b, v)) {
    throw SvdError("svd: Jacobi sweeps did not converge within 100 sweeps");
  }

  std::vector<double> sigma(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += b(i, j) * b(i, j);
    sigma[j] = std::sqrt(acc);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) {
                     return sigma[i] > sigma[j];
                   });

  const double sigma_max = sigma.empty() ? 0.0 : sigma[order[0]];
  // Below this scale a column direction is rounding noise, not signal;
  // replace it by completing the orthonormal basis instead of normalizing.
  const double degenerate =
      sigma_max * std::numeric_limits<double>::epsilon();

  Mat u_sorted(m, n);
  Mat v_sorted(n, n);
  std::vector<double> sigma_sorted(n);
  std::vector<std::size_t> filled;
  std::vector<std::size_t> pending;
  for (std::size_t slot = 0; slot < n; ++slot) {
    const std::size_t src = order[slot];
    sigma_sorted[slot] = sigma[src];
    for (std::size_t i = 0; i < n; ++i) v_sorted(i, slot) = v(i, src);
    if (sigma[src] > degenerate) {
      for (std::size_t i = 0; i < m; ++i)
        u_sorted(i, slot) = b(i, src) / sigma[src];
      filled.push_back(slot);
    } else {
      sigma_sorted[slot] = 0.0;
      pending.push_back(slot);
    }
  }
  for (std::size_t slot : pending) {
    complete_basis_column(u_sorted, slot, filled);
    filled.push_back(slot);
  }

  SvdResult out;
  if (flip) {
    out.u = std::move(v_sorted);
    out.v = std::move(u_sorted);
  } else {
    out.u = std::move(u_sorted);
    out.v = std::move(v_sorted);
  }
  out.sigma = std::move(sigma_sorted);
  return out;
}

double default_rank_tol(double sigma_max, std::size_t m, std::size_t n) {
  return 1e-12 * sigma_max * static_cast<double>(std::max(m, n));
}

namespace {

Mat pinv_from_svd(const SvdResult& s, double tol) {
  const std::size_t n = s.v.rows();
  const std::size_t m = s.u.rows();
  const std::size_t r = s.sigma.size();
  Mat out(n, m);
  for (std::size_t k = 0; k < r; ++k) {
    if (s.sigma[k] <= tol) continue;
    const double inv = 1.0 / s.sigma[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = s.v(i, k) * inv;
      if (vik == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += vik * s.u(j, k);
    }
  }
  return out;
}

}  // namespace

Mat pinv(const Mat& a) {
  const SvdResult s = svd(a);
  const double smax = s.sigma.empty() ? 0.0 : s.sigma.front();
  return pinv_from_svd(s, default_rank_tol(smax, a.rows(), a.cols()));
}

Mat pinv(const Mat& a, double tol) {
  if (tol < 0.0) throw std::invalid_argument("pinv: tol must be >= 0");
  return pinv_from_svd(svd(a), tol);
}

double cond(const Mat& a) {
  const SvdResult s = svd(a);
  const double smax = s.sigma.front();
  const double smin = s.sigma.back();
  if (smin <= default_rank_tol(smax, a.rows(), a.cols())) {
    return std::numeric_limits<double>::infinity();
  }
  return smax / smin;
}

std::vector<double> symmetric_eigenvalues(const Mat& s) {
  if (s.rows() != s.cols()) {
    throw std::invalid_argument("symmetric_eigenvalues: square required");
  }
  const std::size_t n = s.rows();
  Mat a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (s(i, j) + s(j, i));

  const double scale = a.max_abs();
  for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * std::max(scale, 1e-300)) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - sn * aiq;
          a(i, q) = sn * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - sn * aqi;
          a(q, i) = sn * api + c * aqi;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

bool is_positive_definite(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("is_positive_definite: square required");
  }
  const std::vector<double> eig = symmetric_eigenvalues(m);
  return eig.back() > 1e-10;
}

Mat pinv_directional_derivative(const Mat& j, const Mat& dj) {
  check_same_shape(j, dj, "pinv_directional_derivative");
  const SvdResult s = svd(j);
  const double smax = s.sigma.front();
  const double smin = s.sigma.back();
  const double tol = default_rank_tol(smax, j.rows(), j.cols());
  if (smin <= 100.0 * tol) {
    throw RankError(
        "pinv_directional_derivative: matrix is rank-deficient within margin");
  }
  const Mat p = pinv_from_svd(s, tol);
  const Mat djt = dj.transposed();
  const Mat pt = p.transposed();
  const Mat im_jp = Mat::identity(j.rows()) - j * p;
  const Mat in_pj = Mat::identity(j.cols()) - p * j;
  return -1.0 * (p * dj * p) + (p * pt) * djt * im_jp + in_pj * djt * (pt * p);
}

}  // namespace jaclab
