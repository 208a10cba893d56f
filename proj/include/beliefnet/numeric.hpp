#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace beliefnet {

using vec = std::vector<double>;

/// Dense row-major matrix sized for potential tables (a few states per axis).
struct matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  matrix() = default;
  matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static matrix from_rows(std::initializer_list<std::initializer_list<double>> rws) {
    matrix m;
    m.rows = rws.size();
    for (const auto& row : rws) {
      if (m.cols == 0) m.cols = row.size();
      if (row.size() != m.cols) throw std::invalid_argument("ragged matrix rows");
      m.data.insert(m.data.end(), row.begin(), row.end());
    }
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  matrix transposed() const {
    matrix t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend bool operator==(const matrix&, const matrix&) = default;
};

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

inline double sum(const vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline double dot(const vec& a, const vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double logsumexp(const vec& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline vec softmax(const vec& logits) {
  double lse = logsumexp(logits);
  vec out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
  return out;
}

/// Rescale a nonnegative vector to sum 1.  Throws when the mass is zero or not finite.
inline void normalize(vec& v) {
  double s = sum(v);
  if (!(s > 0.0) || !std::isfinite(s)) throw std::runtime_error("normalize: mass must be positive and finite");
  for (double& x : v) x /= s;
}

inline vec normalized(vec v) {
  normalize(v);
  return v;
}

inline double linf_norm(const vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double linf_diff(const vec& a, const vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("linf_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Index of the largest entry; the lowest index wins ties.
inline std::size_t argmax_lowest(const vec& v) {
  if (v.empty()) throw std::invalid_argument("argmax_lowest: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline bool is_distribution(const vec& v, double tol = 1e-9) {
  double s = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
inline vec simplex_project(vec v) {
  if (v.empty()) throw std::invalid_argument("simplex_project: empty vector");
  vec u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double running = 0.0, tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    running += u[i];
    double candidate = (running - 1.0) / static_cast<double>(i + 1);
    if (u[i] - candidate > 0.0) {
      rho = i + 1;
      tau = candidate;
    }
  }
  (void)rho;
  for (double& x : v) x = std::max(0.0, x - tau);
  return v;
}

inline vec matvec(const matrix& m, const vec& x) {
  if (m.cols != x.size()) throw std::invalid_argument("matvec: shape mismatch");
  vec out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out[i] += m(i, j) * x[j];
  return out;
}

inline vec mat_t_vec(const matrix& m, const vec& x) {
  if (m.rows != x.size()) throw std::invalid_argument("mat_t_vec: shape mismatch");
  vec out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += m(i, j) * x[i];
  return out;
}

/// Smallest eigenvalue of (a + aᵀ)/2 via cyclic Jacobi rotations.
inline double min_symmetric_eigenvalue(const matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("min_symmetric_eigenvalue: matrix not square");
  std::size_t n = a.rows;
  if (n == 0) throw std::invalid_argument("min_symmetric_eigenvalue: empty matrix");
  matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += s(i, j) * s(i, j);
    if (off < 1e-28) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(s(p, q)) < 1e-300) continue;
        double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double skp = s(k, p), skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double spk = s(p, k), sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
      }
    }
  }
  double m = s(0, 0);
  for (std::size_t i = 1; i < n; ++i) m = std::min(m, s(i, i));
  return m;
}

// Fixed-chunk parallel loop.  Chunk boundaries depend only on `total`, never on the
// worker count, so per-chunk arithmetic (and any reduction done chunk-by-chunk in
// index order afterwards) yields identical doubles for every thread count.
inline constexpr std::size_t parallel_chunk_count = 64;

inline std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t total, std::size_t chunks, std::size_t c) {
  std::size_t base = total / chunks;
  std::size_t rem = total % chunks;
  std::size_t begin = c * base + std::min(c, rem);
  std::size_t end = begin + base + (c < rem ? 1 : 0);
  return {begin, end};
}

inline std::size_t chunk_count_for(std::size_t total) {
  return std::min<std::size_t>(parallel_chunk_count, std::max<std::size_t>(total, 1));
}

inline void for_each_chunk(std::size_t total, unsigned threads,
                           const std::function<void(std::size_t chunk, std::size_t begin, std::size_t end)>& body) {
  if (total == 0) return;
  std::size_t chunks = chunk_count_for(total);
  if (threads <= 1 || chunks == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      auto [b, e] = chunk_bounds(total, chunks, c);
      body(c, b, e);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::size_t workers = std::min<std::size_t>(threads, chunks);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<bool> failed{false};
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t c = next.fetch_add(1);
        if (c >= chunks || failed.load()) return;
        auto [b, e] = chunk_bounds(total, chunks, c);
        try {
          body(c, b, e);
        } catch (...) {
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) throw std::runtime_error("for_each_chunk: worker failed");
}

}  // namespace beliefnet
