#include "npad/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "npad/errors.hpp"

namespace npad {

namespace {

bool finite_range(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

bool Vec::all_finite() const { return finite_range(data_); }

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, "Mat: data length does not match rows*cols");
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Mat::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Mat::all_finite() const { return finite_range(data_); }

Vec matvec(const Mat& m, const Vec& v) {
  require(m.cols() == v.dim(), "matvec: matrix has " + std::to_string(m.cols()) +
                                   " columns but vector has dim " + std::to_string(v.dim()));
  Vec out(m.rows());
  matvec_accumulate(m, v.span(), out.span());
  return out;
}

void matvec_accumulate(const Mat& m, std::span<const double> v, std::span<double> out,
                       std::size_t col_offset) {
  const std::size_t n = v.size();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r).data() + col_offset;
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += row[c] * v[c];
    out[r] += acc;
  }
}

void matvec_transposed_accumulate(const Mat& m, std::span<const double> v, std::span<double> out,
                                  std::size_t col_offset) {
  const std::size_t n = out.size();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double scale = v[r];
    if (scale == 0.0) continue;
    const double* row = m.row(r).data() + col_offset;
    for (std::size_t c = 0; c < n; ++c) out[c] += scale * row[c];
  }
}

void outer_accumulate(Mat& m, std::span<const double> left, std::span<const double> right,
                      std::size_t col_offset) {
  const std::size_t n = right.size();
  for (std::size_t r = 0; r < left.size(); ++r) {
    const double scale = left[r];
    if (scale == 0.0) continue;
    double* row = m.row(r).data() + col_offset;
    for (std::size_t c = 0; c < n; ++c) row[c] += scale * right[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec softmax(const Vec& logits) {
  require(!logits.empty(), "softmax: empty input");
  require(logits.all_finite(), "softmax: non-finite logit");
  const double peak = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.dim());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.dim(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

Vec log_softmax(const Vec& logits) {
  require(!logits.empty(), "log_softmax: empty input");
  require(logits.all_finite(), "log_softmax: non-finite logit");
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double x : logits) total += std::exp(x - peak);
  const double log_norm = peak + std::log(total);
  Vec out(logits.dim());
  for (std::size_t i = 0; i < logits.dim(); ++i) out[i] = logits[i] - log_norm;
  return out;
}

double RngStream::uniform() { return uniform_(engine_); }

double RngStream::normal() { return normal_(engine_); }

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(splitmix64(base_seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

Vec gaussian_vec(RngStream& rng, std::size_t dim, double sigma) {
  require(sigma >= 0.0 && std::isfinite(sigma), "gaussian_vec: sigma must be finite and >= 0");
  Vec out(dim);
  if (sigma == 0.0) return out;
  for (double& x : out) x = sigma * rng.normal();
  return out;
}

std::size_t categorical_sample(RngStream& rng, const Vec& probs) {
  require(!probs.empty(), "categorical_sample: empty distribution");
  double total = 0.0;
  for (double p : probs) {
    require(std::isfinite(p) && p >= 0.0, "categorical_sample: negative or non-finite mass");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-6, "categorical_sample: masses do not sum to 1");
  const double u = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.dim(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

}  // namespace npad
