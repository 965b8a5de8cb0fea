#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace wsel {

using Vec = Eigen::VectorXd;

/// Raised when a caller passes a value outside an operation's domain.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation's documented precondition does not hold.
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a state that the mathematics rules out is reached anyway.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Either a value or a reason for its absence. Used where a failure is an
/// ordinary answer rather than a programming error.
template <class T>
class Outcome {
 public:
  Outcome(T v) : value_(std::move(v)) {}  // NOLINT(google-explicit-constructor)
  static Outcome fail(std::string why) {
    Outcome o;
    o.why_ = std::move(why);
    return o;
  }

  explicit operator bool() const { return value_.has_value(); }
  bool ok() const { return value_.has_value(); }
  const T& value() const {
    if (!value_) throw std::logic_error("Outcome::value on failure: " + why_);
    return *value_;
  }
  T& value() {
    if (!value_) throw std::logic_error("Outcome::value on failure: " + why_);
    return *value_;
  }
  const T* operator->() const { return &value(); }
  const std::string& failure() const { return why_; }

 private:
  Outcome() = default;
  std::optional<T> value_;
  std::string why_;
};

inline double l1(const Vec& v) { return v.lpNorm<1>(); }
inline double l1(const Vec& a, const Vec& b) { return (a - b).lpNorm<1>(); }

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

/// Lexicographic comparison with an absolute tolerance per coordinate.
inline bool lex_less(const Vec& a, const Vec& b, double tol = 1e-12) {
  const auto n = std::min(a.size(), b.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a(i) < b(i) - tol) return true;
    if (a(i) > b(i) + tol) return false;
  }
  return a.size() < b.size();
}

/// Number of worker threads: WALRAS_SELECT_THREADS if set, else hardware.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* s = std::getenv("WALRAS_SELECT_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(s, &end, 10);
    if (end != s && v >= 1) return static_cast<unsigned>(std::min<long>(v, hw));
  }
  return hw;
}

/// Runs body(i) for i in [0, n). Iterations must not share mutable state.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  unsigned k = std::min<std::size_t>(worker_count(), n);
  if (k <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(k);
  for (unsigned t = 0; t < k; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += k) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Dense two-phase simplex with Bland's rule. Problem sizes in this library are
// a few dozen rows, so a tableau is the simplest correct tool.

struct LpSolution {
  bool feasible = false;
  double objective = 0.0;
  Vec x;
};

/// minimize c.x subject to A x = b, x >= 0.
inline LpSolution solve_lp(Eigen::MatrixXd A, Eigen::VectorXd b, const Eigen::VectorXd& c) {
  constexpr double tol = 1e-11;
  const Eigen::Index m = A.rows(), n = A.cols();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (b(i) < 0) {
      A.row(i) *= -1.0;
      b(i) = -b(i);
    }
  }
  // columns: n structural, m artificial, then rhs
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  T.topLeftCorner(m, n) = A;
  T.block(0, n, m, m).setIdentity();
  T.block(0, n + m, m, 1) = b;
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  auto pivot = [&](Eigen::Index r, Eigen::Index col) {
    T.row(r) /= T(r, col);
    for (Eigen::Index i = 0; i <= m; ++i)
      if (i != r && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(r);
    basis[static_cast<std::size_t>(r)] = col;
  };
  auto run = [&](Eigen::Index ncols) {
    for (int guard = 0; guard < 100000; ++guard) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < ncols; ++j)
        if (T(m, j) < -tol) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m; ++i) {
        if (T(i, enter) > tol) {
          double ratio = T(i, n + m) / T(i, enter);
          if (ratio < best - 1e-14 ||
              (std::abs(ratio - best) <= 1e-14 && leave >= 0 &&
               basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;  // unbounded
      pivot(leave, enter);
    }
    throw InternalError("simplex iteration guard exceeded");
  };

  // phase 1: minimise the sum of artificials
  T.row(m).setZero();
  for (Eigen::Index i = 0; i < m; ++i) T.row(m) -= T.row(i);
  for (Eigen::Index i = 0; i < m; ++i) T(m, n + i) = 0.0;
  run(n + m);
  LpSolution out;
  if (-T(m, n + m) > 1e-9 * std::max(1.0, b.lpNorm<1>())) return out;

  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] >= n) {
      for (Eigen::Index j = 0; j < n; ++j)
        if (std::abs(T(i, j)) > 1e-9) {
          pivot(i, j);
          break;
        }
    }
  }
  // phase 2
  T.row(m).setZero();
  T.block(m, 0, 1, n) = c.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index bj = basis[static_cast<std::size_t>(i)];
    if (bj < n && T(m, bj) != 0.0) T.row(m) -= T(m, bj) * T.row(i);
  }
  for (Eigen::Index i = 0; i < m; ++i)
    if (basis[static_cast<std::size_t>(i)] >= n) T.row(i).segment(n, m).setZero();
  if (!run(n)) return out;
  out.feasible = true;
  out.x = Vec::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index bj = basis[static_cast<std::size_t>(i)];
    if (bj < n) out.x(bj) = T(i, n + m);
  }
  out.objective = c.dot(out.x);
  return out;
}

}  // namespace wsel
