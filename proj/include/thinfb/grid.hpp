#pragma once
// Uniform grids over a box in R^{n+1} (n = 1 or 2) storing the half-space
// s >= 0 only; evenness across {s=0} is a representation invariant, not data.
// GridFunction adds node values and the positivity mask on the {s=0} plane.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>

#include "thinfb/barrier.hpp"
#include "thinfb/core.hpp"

namespace thinfb {

/// Axis order: x' axes first (n-1 of them), then x_n, then s. The linear
/// index runs s slowest so the {s=0} plane is the leading contiguous block.
struct Grid {
  int n = 1;  // R^n x R ambient space
  double h = 0.0;
  std::array<double, 3> lo{};   // lower corner per axis; lo[s-axis] == 0
  std::array<int, 3> count{};   // nodes per axis

  static Grid box(int n, double h, const std::array<double, 3>& lo_corner,
                  const std::array<double, 3>& hi_corner) {
    require(n == 1 || n == 2, Err::PreconditionViolation, "Grid: n must be 1 or 2");
    Grid g;
    g.n = n;
    g.h = h;
    for (int k = 0; k <= n; ++k) {
      g.lo[static_cast<size_t>(k)] = lo_corner[static_cast<size_t>(k)];
      double len = hi_corner[static_cast<size_t>(k)] - lo_corner[static_cast<size_t>(k)];
      int c = static_cast<int>(std::llround(len / h)) + 1;
      require(c >= 3 && std::fabs((c - 1) * h - len) < 1e-9, Err::PreconditionViolation,
              "Grid: extents must be integer multiples of h");
      g.count[static_cast<size_t>(k)] = c;
    }
    require(std::fabs(g.lo[static_cast<size_t>(n)]) < 1e-12, Err::PreconditionViolation,
            "Grid: s axis must start at 0");
    return g;
  }

  /// Symmetric box [-half, half]^n x [0, s_max].
  static Grid symmetric(int n, double h, double half, double s_max) {
    std::array<double, 3> lo{}, hi{};
    for (int k = 0; k < n; ++k) {
      lo[static_cast<size_t>(k)] = -half;
      hi[static_cast<size_t>(k)] = half;
    }
    lo[static_cast<size_t>(n)] = 0;
    hi[static_cast<size_t>(n)] = s_max;
    return box(n, h, lo, hi);
  }

  int axes() const { return n + 1; }
  int sa() const { return n; }  // index of the s axis
  long total() const {
    long t = 1;
    for (int k = 0; k <= n; ++k) t *= count[static_cast<size_t>(k)];
    return t;
  }
  long plane_size() const { return total() / count[static_cast<size_t>(n)]; }
  double coord(int axis, int i) const { return lo[static_cast<size_t>(axis)] + i * h; }
  double hi(int axis) const {
    return coord(axis, count[static_cast<size_t>(axis)] - 1);
  }

  long index(const std::array<int, 3>& iv) const {
    long idx = iv[static_cast<size_t>(n)];
    for (int k = n - 1; k >= 0; --k) idx = idx * count[static_cast<size_t>(k)] + iv[static_cast<size_t>(k)];
    return idx;
  }
  std::array<int, 3> unindex(long idx) const {
    std::array<int, 3> iv{};
    for (int k = 0; k < n; ++k) {
      iv[static_cast<size_t>(k)] = static_cast<int>(idx % count[static_cast<size_t>(k)]);
      idx /= count[static_cast<size_t>(k)];
    }
    iv[static_cast<size_t>(n)] = static_cast<int>(idx);
    return iv;
  }
  long stride(int axis) const {
    long s = 1;
    if (axis == n) return plane_size();
    for (int k = 0; k < axis; ++k) s *= count[static_cast<size_t>(k)];
    return s;
  }

  Point point(const std::array<int, 3>& iv) const {
    Point p;
    p.xp = Vec::zeros(n - 1);
    for (int k = 0; k < n - 1; ++k) p.xp[k] = coord(k, iv[static_cast<size_t>(k)]);
    p.xn = coord(n - 1, iv[static_cast<size_t>(n - 1)]);
    p.s = coord(n, iv[static_cast<size_t>(n)]);
    return p;
  }

  bool on_outer_boundary(const std::array<int, 3>& iv) const {
    for (int k = 0; k <= n; ++k) {
      if (iv[static_cast<size_t>(k)] == 0 && k != n) return true;
      if (iv[static_cast<size_t>(k)] == count[static_cast<size_t>(k)] - 1) return true;
    }
    return false;  // s = 0 face is interior via even reflection
  }

  /// Nearest node multi-index; throws if x is outside the box.
  std::array<int, 3> nearest(const Point& x) const {
    std::array<int, 3> iv{};
    std::array<double, 3> c{};
    for (int k = 0; k < n - 1; ++k) c[static_cast<size_t>(k)] = x.xp[k];
    c[static_cast<size_t>(n - 1)] = x.xn;
    c[static_cast<size_t>(n)] = std::fabs(x.s);
    for (int k = 0; k <= n; ++k) {
      int i = static_cast<int>(std::llround((c[static_cast<size_t>(k)] - lo[static_cast<size_t>(k)]) / h));
      require(i >= 0 && i < count[static_cast<size_t>(k)], Err::PreconditionViolation,
              "Grid::nearest: point outside box");
      iv[static_cast<size_t>(k)] = i;
    }
    return iv;
  }

  bool contains(const Point& x, double slack = 1e-12) const {
    std::array<double, 3> c{};
    for (int k = 0; k < n - 1; ++k) c[static_cast<size_t>(k)] = x.xp[k];
    c[static_cast<size_t>(n - 1)] = x.xn;
    c[static_cast<size_t>(n)] = std::fabs(x.s);
    for (int k = 0; k <= n; ++k)
      if (c[static_cast<size_t>(k)] < lo[static_cast<size_t>(k)] - slack ||
          c[static_cast<size_t>(k)] > hi(k) + slack)
        return false;
    return true;
  }

  bool same_layout(const Grid& o) const {
    return n == o.n && std::fabs(h - o.h) < 1e-15 && count == o.count &&
           std::fabs(lo[0] - o.lo[0]) < 1e-12 && std::fabs(lo[1] - o.lo[1]) < 1e-12 &&
           std::fabs(lo[2] - o.lo[2]) < 1e-12;
  }

  template <class F>
  void for_each(F&& f) const {
    std::array<int, 3> iv{};
    const int cs = count[static_cast<size_t>(n)];
    for (int is = 0; is < cs; ++is) {
      iv[static_cast<size_t>(n)] = is;
      if (n == 1) {
        for (int in = 0; in < count[0]; ++in) {
          iv[0] = in;
          f(iv);
        }
      } else {
        for (int i1 = 0; i1 < count[1]; ++i1) {
          iv[1] = i1;
          for (int i0 = 0; i0 < count[0]; ++i0) {
            iv[0] = i0;
            f(iv);
          }
        }
      }
    }
  }
};

/// Scalar field samples on a Grid; even in s by the storage convention.
/// The mask marks the positivity set on the {s=0} plane; nodes off the mask
/// carry the value 0 there.
struct GridFunction {
  Grid grid;
  std::vector<double> values;
  std::vector<uint8_t> mask;  // size plane_size(), over the {s=0} plane

  static GridFunction zeros(const Grid& g) {
    GridFunction f;
    f.grid = g;
    f.values.assign(static_cast<size_t>(g.total()), 0.0);
    f.mask.assign(static_cast<size_t>(g.plane_size()), 0);
    return f;
  }

  template <class F>
  static GridFunction sample(const Grid& g, F&& fn, double positivity_floor = 0.0) {
    GridFunction out = zeros(g);
    g.for_each([&](const std::array<int, 3>& iv) {
      double v = fn(g.point(iv));
      out.values[static_cast<size_t>(g.index(iv))] = v;
      if (iv[static_cast<size_t>(g.sa())] == 0)
        out.mask[static_cast<size_t>(g.index(iv))] = v > positivity_floor ? 1 : 0;
    });
    out.enforce_mask_zero();
    return out;
  }

  double at(const std::array<int, 3>& iv) const { return values[static_cast<size_t>(grid.index(iv))]; }
  double& at(const std::array<int, 3>& iv) { return values[static_cast<size_t>(grid.index(iv))]; }
  bool masked(long plane_idx) const { return mask[static_cast<size_t>(plane_idx)] != 0; }

  void enforce_mask_zero() {
    for (long p = 0; p < grid.plane_size(); ++p)
      if (!mask[static_cast<size_t>(p)]) values[static_cast<size_t>(p)] = 0.0;
  }

  double max_abs() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::fabs(v));
    return m;
  }

  /// Value with even reflection in s; x', s must lie on grid planes (within
  /// tolerance), x_n is interpolated linearly along the e_n line.
  double interp_en(const Point& x) const {
    std::array<int, 3> iv{};
    const int n = grid.n;
    for (int k = 0; k < n - 1; ++k) {
      double q = (x.xp[k] - grid.lo[static_cast<size_t>(k)]) / grid.h;
      int i = static_cast<int>(std::llround(q));
      require(std::fabs(q - i) < 1e-8 && i >= 0 && i < grid.count[static_cast<size_t>(k)],
              Err::PreconditionViolation, "interp_en: x' not on a grid plane");
      iv[static_cast<size_t>(k)] = i;
    }
    double qs = std::fabs(x.s) / grid.h;
    int is = static_cast<int>(std::llround(qs));
    require(std::fabs(qs - is) < 1e-8 && is < grid.count[static_cast<size_t>(n)],
            Err::PreconditionViolation, "interp_en: s not on a grid plane");
    iv[static_cast<size_t>(n)] = is;

    double qn = (x.xn - grid.lo[static_cast<size_t>(n - 1)]) / grid.h;
    int i0 = static_cast<int>(std::floor(qn));
    double w = qn - i0;
    if (i0 < 0 || i0 >= grid.count[static_cast<size_t>(n - 1)] - 1) {
      // clamp single-node evaluation at the box edge
      int i = std::clamp(i0, 0, grid.count[static_cast<size_t>(n - 1)] - 1);
      require(std::fabs(qn - i) < 1e-8, Err::PreconditionViolation, "interp_en: x_n outside box");
      iv[static_cast<size_t>(n - 1)] = i;
      return at(iv);
    }
    iv[static_cast<size_t>(n - 1)] = i0;
    double v0 = at(iv);
    iv[static_cast<size_t>(n - 1)] = i0 + 1;
    double v1 = at(iv);
    return (1 - w) * v0 + w * v1;
  }

  /// Multilinear interpolation at an arbitrary point, even reflection in s.
  double interp(const Point& x) const {
    const int n = grid.n;
    std::array<double, 3> c{};
    for (int k = 0; k < n - 1; ++k) c[static_cast<size_t>(k)] = x.xp[k];
    c[static_cast<size_t>(n - 1)] = x.xn;
    c[static_cast<size_t>(n)] = std::fabs(x.s);
    std::array<int, 3> base{};
    std::array<double, 3> w{};
    for (int k = 0; k <= n; ++k) {
      double q = (c[static_cast<size_t>(k)] - grid.lo[static_cast<size_t>(k)]) / grid.h;
      int i = static_cast<int>(std::floor(q));
      i = std::clamp(i, 0, grid.count[static_cast<size_t>(k)] - 2);
      base[static_cast<size_t>(k)] = i;
      w[static_cast<size_t>(k)] = std::clamp(q - i, 0.0, 1.0);
    }
    double acc = 0;
    for (int corner = 0; corner < (1 << (n + 1)); ++corner) {
      std::array<int, 3> iv = base;
      double ww = 1;
      for (int k = 0; k <= n; ++k) {
        int bit = (corner >> k) & 1;
        iv[static_cast<size_t>(k)] += bit;
        ww *= bit ? w[static_cast<size_t>(k)] : 1 - w[static_cast<size_t>(k)];
      }
      acc += ww * at(iv);
    }
    return acc;
  }

  void save_binary(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), Err::IoError, "save_binary: cannot open " + path);
    const char magic[8] = {'T', 'H', 'I', 'N', 'F', 'B', 'G', '1'};
    f.write(magic, 8);
    int32_t n32 = grid.n;
    f.write(reinterpret_cast<const char*>(&n32), 4);
    for (int k = 0; k <= grid.n; ++k) {
      int32_t c = grid.count[static_cast<size_t>(k)];
      f.write(reinterpret_cast<const char*>(&c), 4);
    }
    f.write(reinterpret_cast<const char*>(&grid.h), 8);
    for (int k = 0; k <= grid.n; ++k)
      f.write(reinterpret_cast<const char*>(&grid.lo[static_cast<size_t>(k)]), 8);
    f.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * 8));
    f.write(reinterpret_cast<const char*>(mask.data()), static_cast<std::streamsize>(mask.size()));
    require(f.good(), Err::IoError, "save_binary: write failed");
  }

  static GridFunction load_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), Err::IoError, "load_binary: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    require(std::memcmp(magic, "THINFBG1", 8) == 0, Err::IoError, "load_binary: bad magic");
    int32_t n32 = 0;
    f.read(reinterpret_cast<char*>(&n32), 4);
    Grid g;
    g.n = n32;
    for (int k = 0; k <= g.n; ++k) {
      int32_t c = 0;
      f.read(reinterpret_cast<char*>(&c), 4);
      g.count[static_cast<size_t>(k)] = c;
    }
    f.read(reinterpret_cast<char*>(&g.h), 8);
    for (int k = 0; k <= g.n; ++k) f.read(reinterpret_cast<char*>(&g.lo[static_cast<size_t>(k)]), 8);
    GridFunction out = GridFunction::zeros(g);
    f.read(reinterpret_cast<char*>(out.values.data()),
           static_cast<std::streamsize>(out.values.size() * 8));
    f.read(reinterpret_cast<char*>(out.mask.data()), static_cast<std::streamsize>(out.mask.size()));
    require(f.good(), Err::IoError, "load_binary: truncated file");
    return out;
  }

  void export_csv(const std::string& path) const {
    std::ofstream f(path);
    require(f.good(), Err::IoError, "export_csv: cannot open " + path);
    f << "# x'..., x_n, s, value\n";
    char buf[64];
    grid.for_each([&](const std::array<int, 3>& iv) {
      Point p = grid.point(iv);
      std::string line;
      for (int k = 0; k < grid.n - 1; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,", p.xp[k]);
        line += buf;
      }
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.xn, p.s, at(iv));
      line += buf;
      f << line;
    });
  }
};

}  // namespace thinfb
