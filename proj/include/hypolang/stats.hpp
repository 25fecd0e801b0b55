#ifndef HYPOLANG_STATS_HPP
#define HYPOLANG_STATS_HPP

#include <cmath>
#include <cstddef>

namespace hypolang {

/// Welford accumulator; merge() combines partial results (Chan et al.).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double delta = o.mean_ - mean_;
    mean_ += delta * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  /// unbiased sample variance
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  /// standard error of the mean
  double sem() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Mean estimate with its standard error.
struct Estimate {
  double mean = 0.0;
  double se = 0.0;

  static Estimate from(const RunningStats& s) { return {s.mean(), s.sem()}; }
  /// |mean - target| <= k SE
  bool within(double target, double k = 3.0) const { return std::fabs(mean - target) <= k * se; }
};

}  // namespace hypolang

#endif  // HYPOLANG_STATS_HPP
