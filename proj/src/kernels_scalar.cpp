#include "hfsel/kernels.hpp"

#include <cmath>

namespace hfsel::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double gather_dot(const double* w, const std::uint32_t* idx, const double* val, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[idx[i]] * val[i];
  return s;
}

double gather_dot_f32(const float* w, const std::uint32_t* idx, const double* val,
                      std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(w[idx[i]]) * val[i];
  return s;
}

void prox_l1_step(double* out, const double* w, const double* g, double step, double thresh,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = w[i] - step * g[i];
    const double mag = std::fabs(v) - thresh;
    out[i] = mag > 0.0 ? std::copysign(mag, v) : 0.0;
  }
}

void prox_l2_step(double* out, const double* w, const double* g, double step, double shrink,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (w[i] - step * g[i]) * shrink;
}

double l1_norm(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i]);
  return s;
}

double sq_norm(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return s;
}

void diff_stats(const double* a, const double* b, const double* g, std::size_t n,
                double* g_dot_diff, double* sq_dist) {
  double gd = 0.0;
  double sd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    gd += g[i] * d;
    sd += d * d;
  }
  *g_dot_diff = gd;
  *sq_dist = sd;
}

}  // namespace hfsel::kernels::scalar
