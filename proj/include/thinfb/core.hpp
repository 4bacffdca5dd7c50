#pragma once
// Shared numerical core: fixed-capacity small vectors/symmetric matrices
// (tangential dimension n-1 <= 3), typed errors, a deterministic RNG,
// dense least squares and log-log slope fits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace thinfb {

enum class Err {
  NoConvergence,
  ClassViolation,
  PreconditionViolation,
  AuditFailure,
  NotFlat,
  NonInjective,
  NeverFlat,
  DegenerateRatio,
  EmptyBoundary,
  FitFailure,
  NoContact,
  InsufficientScales,
  NotTrapped,
  BudgetExhausted,
  MissingManifest,
  TraceViolation,
  PoorFit,
  ConfigError,
  IoError,
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::NoConvergence: return "NoConvergence";
    case Err::ClassViolation: return "ClassViolation";
    case Err::PreconditionViolation: return "PreconditionViolation";
    case Err::AuditFailure: return "AuditFailure";
    case Err::NotFlat: return "NotFlat";
    case Err::NonInjective: return "NonInjective";
    case Err::NeverFlat: return "NeverFlat";
    case Err::DegenerateRatio: return "DegenerateRatio";
    case Err::EmptyBoundary: return "EmptyBoundary";
    case Err::FitFailure: return "FitFailure";
    case Err::NoContact: return "NoContact";
    case Err::InsufficientScales: return "InsufficientScales";
    case Err::NotTrapped: return "NotTrapped";
    case Err::BudgetExhausted: return "BudgetExhausted";
    case Err::MissingManifest: return "MissingManifest";
    case Err::TraceViolation: return "TraceViolation";
    case Err::PoorFit: return "PoorFit";
    case Err::ConfigError: return "ConfigError";
    case Err::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Err code, const std::string& what) {
  if (!cond) fail(code, what);
}

inline constexpr int kMaxTangent = 3;  // largest supported n-1

/// Vector in the tangential coordinates x' (dimension n-1, possibly 0).
struct Vec {
  std::array<double, kMaxTangent> v{};
  int n = 0;

  static Vec zeros(int n) {
    Vec r;
    r.n = n;
    return r;
  }
  static Vec unit(int n, int axis, double scale = 1.0) {
    Vec r = zeros(n);
    r.v[static_cast<size_t>(axis)] = scale;
    return r;
  }
  double& operator[](int i) { return v[static_cast<size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<size_t>(i)]; }
  int size() const { return n; }

  double dot(const Vec& o) const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += v[static_cast<size_t>(i)] * o[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(*this)); }
  double max_abs() const {
    double s = 0;
    for (int i = 0; i < n; ++i) s = std::max(s, std::fabs(v[static_cast<size_t>(i)]));
    return s;
  }
  Vec plus(const Vec& o, double scale = 1.0) const {
    Vec r = *this;
    for (int i = 0; i < n; ++i) r[i] += scale * o[i];
    return r;
  }
  Vec scaled(double c) const {
    Vec r = *this;
    for (int i = 0; i < n; ++i) r[i] *= c;
    return r;
  }
};

/// Dense symmetric matrix of dimension n-1 (possibly 0x0).
struct SymMat {
  std::array<double, kMaxTangent * kMaxTangent> m{};
  int n = 0;

  static SymMat zeros(int n) {
    SymMat r;
    r.n = n;
    return r;
  }
  static SymMat identity(int n, double scale = 1.0) {
    SymMat r = zeros(n);
    for (int i = 0; i < n; ++i) r.at(i, i) = scale;
    return r;
  }
  double& at(int i, int j) { return m[static_cast<size_t>(i * kMaxTangent + j)]; }
  double at(int i, int j) const { return m[static_cast<size_t>(i * kMaxTangent + j)]; }
  int size() const { return n; }

  void symmetrize() {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double avg = 0.5 * (at(i, j) + at(j, i));
        at(i, j) = at(j, i) = avg;
      }
  }
  double asymmetry() const {
    double s = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s = std::max(s, std::fabs(at(i, j) - at(j, i)));
    return s;
  }
  double trace() const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += at(i, i);
    return s;
  }
  Vec mul(const Vec& x) const {
    Vec r = Vec::zeros(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r[i] += at(i, j) * x[j];
    return r;
  }
  double quad(const Vec& x) const { return x.dot(mul(x)); }

  // Spectral norm by cyclic Jacobi sweeps; matrices here are at most 3x3.
  double op_norm() const {
    if (n == 0) return 0.0;
    if (n == 1) return std::fabs(at(0, 0));
    SymMat a = *this;
    for (int sweep = 0; sweep < 32; ++sweep) {
      double off = 0;
      for (int p = 0; p < n; ++p)
        for (int q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a.at(p, q)));
      if (off < 1e-14) break;
      for (int p = 0; p < n; ++p)
        for (int q = p + 1; q < n; ++q) {
          double apq = a.at(p, q);
          if (std::fabs(apq) < 1e-300) continue;
          double theta = 0.5 * std::atan2(2 * apq, a.at(q, q) - a.at(p, p));
          double c = std::cos(theta), s = std::sin(theta);
          SymMat b = a;
          for (int k = 0; k < n; ++k) {
            b.at(p, k) = c * a.at(p, k) - s * a.at(q, k);
            b.at(q, k) = s * a.at(p, k) + c * a.at(q, k);
          }
          SymMat b2 = b;
          for (int k = 0; k < n; ++k) {
            b2.at(k, p) = c * b.at(k, p) - s * b.at(k, q);
            b2.at(k, q) = s * b.at(k, p) + c * b.at(k, q);
          }
          a = b2;
        }
    }
    double r = 0;
    for (int i = 0; i < n; ++i) r = std::max(r, std::fabs(a.at(i, i)));
    return r;
  }
  double max_abs_diff(const SymMat& o) const {
    double s = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s = std::max(s, std::fabs(at(i, j) - o.at(i, j)));
    return s;
  }
};

/// Deterministic RNG. The uniform draw maps the raw 64-bit stream to [0,1)
/// directly so results do not depend on the standard library's distribution
/// implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * unit(); }
  int index(int count) { return static_cast<int>(eng_() % static_cast<uint64_t>(count)); }
  Rng fork(uint64_t salt) const {
    std::mt19937_64 e = eng_;
    return Rng(e() ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
  }

 private:
  std::mt19937_64 eng_;
};

/// Gaussian elimination with partial pivoting; A is row-major n x n.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[static_cast<size_t>(r * n + col)]) >
          std::fabs(a[static_cast<size_t>(piv * n + col)]))
        piv = r;
    if (std::fabs(a[static_cast<size_t>(piv * n + col)]) < 1e-300)
      fail(Err::FitFailure, "singular system in solve_dense");
    if (piv != col) {
      for (int c = 0; c < n; ++c)
        std::swap(a[static_cast<size_t>(col * n + c)], a[static_cast<size_t>(piv * n + c)]);
      std::swap(b[static_cast<size_t>(col)], b[static_cast<size_t>(piv)]);
    }
    for (int r = col + 1; r < n; ++r) {
      double f = a[static_cast<size_t>(r * n + col)] / a[static_cast<size_t>(col * n + col)];
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c)
        a[static_cast<size_t>(r * n + c)] -= f * a[static_cast<size_t>(col * n + c)];
      b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(col)];
    }
  }
  std::vector<double> x(static_cast<size_t>(n));
  for (int r = n - 1; r >= 0; --r) {
    double s = b[static_cast<size_t>(r)];
    for (int c = r + 1; c < n; ++c) s -= a[static_cast<size_t>(r * n + c)] * x[static_cast<size_t>(c)];
    x[static_cast<size_t>(r)] = s / a[static_cast<size_t>(r * n + r)];
  }
  return x;
}

/// Dense LU with partial pivoting, reusable across right-hand sides.
class DenseLU {
 public:
  DenseLU() = default;
  DenseLU(std::vector<double> a, int n) : a_(std::move(a)), piv_(static_cast<size_t>(n)), n_(n) {
    for (int i = 0; i < n_; ++i) piv_[static_cast<size_t>(i)] = i;
    for (int col = 0; col < n_; ++col) {
      int p = col;
      for (int r = col + 1; r < n_; ++r)
        if (std::fabs(at(r, col)) > std::fabs(at(p, col))) p = r;
      require(std::fabs(at(p, col)) > 1e-300, Err::FitFailure, "DenseLU: singular matrix");
      if (p != col) {
        for (int c = 0; c < n_; ++c) std::swap(at(col, c), at(p, c));
        std::swap(piv_[static_cast<size_t>(col)], piv_[static_cast<size_t>(p)]);
      }
      double d = at(col, col);
      for (int r = col + 1; r < n_; ++r) {
        double f = at(r, col) / d;
        at(r, col) = f;
        if (f == 0.0) continue;
        for (int c = col + 1; c < n_; ++c) at(r, c) -= f * at(col, c);
      }
    }
  }
  int size() const { return n_; }
  void solve(const std::vector<double>& b, std::vector<double>& x) const {
    x.resize(static_cast<size_t>(n_));
    for (int i = 0; i < n_; ++i) x[static_cast<size_t>(i)] = b[static_cast<size_t>(piv_[static_cast<size_t>(i)])];
    for (int r = 1; r < n_; ++r) {
      double s = x[static_cast<size_t>(r)];
      for (int c = 0; c < r; ++c) s -= at(r, c) * x[static_cast<size_t>(c)];
      x[static_cast<size_t>(r)] = s;
    }
    for (int r = n_ - 1; r >= 0; --r) {
      double s = x[static_cast<size_t>(r)];
      for (int c = r + 1; c < n_; ++c) s -= at(r, c) * x[static_cast<size_t>(c)];
      x[static_cast<size_t>(r)] = s / at(r, r);
    }
  }

 private:
  double& at(int r, int c) { return a_[static_cast<size_t>(r) * static_cast<size_t>(n_) + static_cast<size_t>(c)]; }
  double at(int r, int c) const {
    return a_[static_cast<size_t>(r) * static_cast<size_t>(n_) + static_cast<size_t>(c)];
  }
  std::vector<double> a_;
  std::vector<int> piv_;
  int n_ = 0;
};

struct LsqFit {
  std::vector<double> coef;
  double rms_residual = 0;
  double max_residual = 0;
};

/// Weighted linear least squares via normal equations. rows[i] holds the
/// basis values at sample i; problems here have at most ~8 unknowns.
inline LsqFit lsq(const std::vector<std::vector<double>>& rows, const std::vector<double>& rhs,
                  const std::vector<double>* weights = nullptr) {
  require(!rows.empty() && rows.size() == rhs.size(), Err::FitFailure, "lsq: empty or mismatched data");
  const int k = static_cast<int>(rows.front().size());
  std::vector<double> ata(static_cast<size_t>(k * k), 0.0), atb(static_cast<size_t>(k), 0.0);
  for (size_t i = 0; i < rows.size(); ++i) {
    double w = weights ? (*weights)[i] : 1.0;
    for (int p = 0; p < k; ++p) {
      atb[static_cast<size_t>(p)] += w * rows[i][static_cast<size_t>(p)] * rhs[i];
      for (int q = 0; q < k; ++q)
        ata[static_cast<size_t>(p * k + q)] +=
            w * rows[i][static_cast<size_t>(p)] * rows[i][static_cast<size_t>(q)];
    }
  }
  LsqFit fit;
  fit.coef = solve_dense(std::move(ata), std::move(atb));
  double ss = 0, wsum = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    double pred = 0;
    for (int p = 0; p < k; ++p) pred += fit.coef[static_cast<size_t>(p)] * rows[i][static_cast<size_t>(p)];
    double w = weights ? (*weights)[i] : 1.0;
    double r = rhs[i] - pred;
    ss += w * r * r;
    wsum += w;
    fit.max_residual = std::max(fit.max_residual, std::fabs(r));
  }
  fit.rms_residual = std::sqrt(ss / std::max(wsum, 1e-300));
  return fit;
}

struct LineFit {
  double intercept = 0;
  double slope = 0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size() && xs.size() >= 2, Err::FitFailure, "fit_line: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double denom = n * sxx - sx * sx;
  require(std::fabs(denom) > 1e-300, Err::FitFailure, "fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

/// Slope of log(y) against log(x); the scaling exponents reported by the
/// experiment suite all come through here.
inline double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < xs.size(); ++i) {
    require(xs[i] > 0 && ys[i] > 0, Err::FitFailure, "fit_loglog_slope: nonpositive sample");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  return fit_line(lx, ly).slope;
}

}  // namespace thinfb
