#include "kfe/sym_eigen.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace kfe {

namespace {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

constexpr double kPi = 3.141592653589793238462643383279502884;

double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

// Trigonometric Cardano roots of the characteristic polynomial, descending.
Vec3 analytic_eigenvalues(const Mat3& a) {
  double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  if (p1 == 0.0) {
    Vec3 d(a(0, 0), a(1, 1), a(2, 2));
    std::sort(d.data(), d.data() + 3, std::greater<double>());
    return d;
  }
  double q = a.trace() / 3.0;
  double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
              (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  double p = std::sqrt(p2 / 6.0);
  Mat3 b = (a - q * Mat3::Identity()) / p;
  double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
  double phi = std::acos(r) / 3.0;
  double l0 = q + 2.0 * p * std::cos(phi);
  double l2 = q + 2.0 * p * std::cos(phi + 2.0 * kPi / 3.0);
  double l1 = 3.0 * q - l0 - l2;
  return Vec3(l0, l1, l2);
}

// Null-space direction of (a - lambda I) via the largest row cross product.
// Returns false when all cross products vanish (repeated eigenvalue).
bool eigenvector_for(const Mat3& a, double lambda, double scale, Vec3& out) {
  Mat3 m = a;
  m.diagonal().array() -= lambda;
  Vec3 r0 = m.row(0), r1 = m.row(1), r2 = m.row(2);
  std::array<Vec3, 3> cross = {r0.cross(r1), r0.cross(r2), r1.cross(r2)};
  int best = 0;
  double best_n = cross[0].squaredNorm();
  for (int i = 1; i < 3; ++i) {
    double n = cross[i].squaredNorm();
    if (n > best_n) {
      best = i;
      best_n = n;
    }
  }
  if (best_n <= 1e-24 * scale * scale * scale * scale) return false;
  out = cross[best] / std::sqrt(best_n);
  return true;
}

// One Householder reflection brings a symmetric 3x3 to tridiagonal form;
// q accumulates the transform.
void tridiagonalize(const Mat3& a, Mat3& q, std::array<double, 3>& d,
                    std::array<double, 3>& e) {
  q.setIdentity();
  d = {a(0, 0), a(1, 1), a(2, 2)};
  e = {a(0, 1), a(1, 2), 0.0};
  double a01 = a(0, 1), a02 = a(0, 2);
  double h = a01 * a01 + a02 * a02;
  if (a02 == 0.0 || h == 0.0) return;

  double r = std::sqrt(h);
  if (a01 < 0.0) r = -r;  // avoid cancellation in a01 - r
  Vec3 w(0.0, a01 - r, a02);
  double wn2 = w.squaredNorm();
  Mat3 p = Mat3::Identity() - (2.0 / wn2) * (w * w.transpose());
  Mat3 t = p * a * p;
  q = p;
  d = {t(0, 0), t(1, 1), t(2, 2)};
  e = {t(0, 1), t(1, 2), 0.0};
}

// Implicit-shift QL sweeps on the tridiagonal (d, e); z accumulates vectors.
bool ql_iterate(std::array<double, 3>& d, std::array<double, 3>& e, Mat3& z) {
  constexpr double eps = 2.220446049250313e-16;
  for (int l = 0; l < 2; ++l) {
    for (int iter = 0;; ++iter) {
      int m;
      for (m = l; m < 2; ++m) {
        double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m == l) break;
      if (iter >= 50) return false;
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (int i = m - 1; i >= l; --i) {
        double f = s * e[i];
        double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        for (int k = 0; k < 3; ++k) {
          f = z(k, i + 1);
          z(k, i + 1) = s * z(k, i) + c * f;
          z(k, i) = c * z(k, i) - s * f;
        }
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }
  return true;
}

SymEigen3 ql_fallback(const Mat3& a) {
  Mat3 q;
  std::array<double, 3> d, e;
  tridiagonalize(a, q, d, e);
  if (!ql_iterate(d, e, q)) {
    throw std::runtime_error("eigen3: QL iteration failed to converge");
  }
  std::array<int, 3> idx = {0, 1, 2};
  std::sort(idx.begin(), idx.end(), [&](int i, int j) { return d[i] > d[j]; });
  SymEigen3 out;
  for (int i = 0; i < 3; ++i) {
    out.values[i] = d[idx[i]];
    out.vectors.col(i) = q.col(idx[i]).normalized();
  }
  return out;
}

// The trigonometric roots lose ~sqrt(eps) absolute accuracy when two roots
// cluster (acos conditioning); switch to QL values there.
Vec3 hybrid_eigenvalues(const Mat3& a) {
  Vec3 v = analytic_eigenvalues(a);
  double scale = std::max(1.0, max_abs(a));
  if (v[0] - v[1] >= 1e-5 * scale && v[1] - v[2] >= 1e-5 * scale) return v;

  Mat3 q;
  std::array<double, 3> d, e;
  tridiagonalize(a, q, d, e);
  if (!ql_iterate(d, e, q)) return v;  // keep the analytic roots
  std::sort(d.begin(), d.end(), std::greater<double>());
  return Vec3(d[0], d[1], d[2]);
}

Mat3 symmetrized(const Mat3& m) {
  double scale = std::max(1.0, max_abs(m));
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument("eigen3: input is not symmetric");
  }
  return 0.5 * (m + m.transpose());
}

}  // namespace

Eigen::Vector3d eigenvalues3(const Eigen::Matrix3d& m) {
  return hybrid_eigenvalues(symmetrized(m));
}

SymEigen3 eigen3(const Eigen::Matrix3d& m) {
  Mat3 a = symmetrized(m);
  double scale = std::max(1.0, max_abs(a));
  Vec3 vals = hybrid_eigenvalues(a);

  // Analytic vectors: v0 for the largest value, v2 for the smallest,
  // v1 completes the right-handed frame.
  Vec3 v0, v2;
  bool ok = eigenvector_for(a, vals[0], scale, v0) && eigenvector_for(a, vals[2], scale, v2);
  ok = ok && std::abs(v0.dot(v2)) <= 1e-8;
  SymEigen3 out;
  if (ok) {
    Vec3 v1 = v2.cross(v0);
    double n = v1.norm();
    ok = n > 1e-8;
    if (ok) {
      out.values = vals;
      out.vectors.col(0) = v0;
      out.vectors.col(1) = v1 / n;
      out.vectors.col(2) = v2;
      for (int i = 0; i < 3 && ok; ++i) {
        double resid = (a * out.vectors.col(i) - out.values[i] * out.vectors.col(i)).norm();
        ok = resid <= 1e-10 * scale;
      }
    }
  }
  if (!ok) out = ql_fallback(a);
  return out;
}

}  // namespace kfe
