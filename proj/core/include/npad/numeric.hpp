#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace npad {

// Dense vector of doubles. Holds hidden states, logits, probabilities.
class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vec(std::initializer_list<double> values) : data_(values) {}
  explicit Vec(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t dim() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  const std::vector<double>& values() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const Vec&, const Vec&) = default;

 private:
  std::vector<double> data_;
};

// Row-major dense matrix. Biases are stored as rows x 1 matrices.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Mat& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Vec matvec(const Mat& m, const Vec& v);

// Kernels on raw spans for the model's hot loops. Shapes are the caller's
// responsibility; the checked entry points above validate them.
void matvec_accumulate(const Mat& m, std::span<const double> v, std::span<double> out,
                       std::size_t col_offset = 0);
void matvec_transposed_accumulate(const Mat& m, std::span<const double> v, std::span<double> out,
                                  std::size_t col_offset = 0);
void outer_accumulate(Mat& m, std::span<const double> left, std::span<const double> right,
                      std::size_t col_offset = 0);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

double sigmoid(double x);

Vec softmax(const Vec& logits);
Vec log_softmax(const Vec& logits);

// Seeded random source. A stream owns its engine; identical seeds replay
// identical draws within one build.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  double uniform();
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Child seed for stream `index` of a family rooted at `base_seed`. Depends only
// on the pair, so the streams for indices [0, n) are the same for every n.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index);

Vec gaussian_vec(RngStream& rng, std::size_t dim, double sigma);

std::size_t categorical_sample(RngStream& rng, const Vec& probs);

}  // namespace npad
