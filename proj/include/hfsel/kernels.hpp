#pragma once

// Arithmetic inner loops used by training and prediction.
//
// Every kernel has a portable scalar reference in `hfsel::kernels::scalar`.
// On x86-64 builds an AVX2+FMA variant lives in `hfsel::kernels::avx2`; the
// table returned by `active()` is chosen once per process from CPUID, and can
// be forced back to the scalar path with HFSEL_SIMD=scalar. The two paths
// differ only in summation order, never in which elements are touched.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace hfsel::kernels {

// sum_i a[i] * b[i]
using DotFn = double (*)(const double* a, const double* b, std::size_t n);
// sum_i w[idx[i]] * val[i]
using GatherDotFn = double (*)(const double* w, const std::uint32_t* idx, const double* val,
                               std::size_t n);
using GatherDotF32Fn = double (*)(const float* w, const std::uint32_t* idx, const double* val,
                                  std::size_t n);
// out[i] = soft_threshold(w[i] - step * g[i], thresh)
using ProxL1StepFn = void (*)(double* out, const double* w, const double* g, double step,
                              double thresh, std::size_t n);
// out[i] = (w[i] - step * g[i]) * shrink
using ProxL2StepFn = void (*)(double* out, const double* w, const double* g, double step,
                              double shrink, std::size_t n);
// sum_i |a[i]|, sum_i a[i]^2
using NormFn = double (*)(const double* a, std::size_t n);
// sum_i g[i] * (a[i] - b[i]) and sum_i (a[i] - b[i])^2 in one pass
using DiffStatsFn = void (*)(const double* a, const double* b, const double* g, std::size_t n,
                             double* g_dot_diff, double* sq_dist);

struct KernelTable {
  std::string_view name;
  DotFn dot;
  GatherDotFn gather_dot;
  GatherDotF32Fn gather_dot_f32;
  ProxL1StepFn prox_l1_step;
  ProxL2StepFn prox_l2_step;
  NormFn l1_norm;
  NormFn sq_norm;
  DiffStatsFn diff_stats;
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double gather_dot(const double* w, const std::uint32_t* idx, const double* val, std::size_t n);
double gather_dot_f32(const float* w, const std::uint32_t* idx, const double* val, std::size_t n);
void prox_l1_step(double* out, const double* w, const double* g, double step, double thresh,
                  std::size_t n);
void prox_l2_step(double* out, const double* w, const double* g, double step, double shrink,
                  std::size_t n);
double l1_norm(const double* a, std::size_t n);
double sq_norm(const double* a, std::size_t n);
void diff_stats(const double* a, const double* b, const double* g, std::size_t n,
                double* g_dot_diff, double* sq_dist);
}  // namespace scalar

#if defined(HFSEL_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double gather_dot(const double* w, const std::uint32_t* idx, const double* val, std::size_t n);
double gather_dot_f32(const float* w, const std::uint32_t* idx, const double* val, std::size_t n);
void prox_l1_step(double* out, const double* w, const double* g, double step, double thresh,
                  std::size_t n);
void prox_l2_step(double* out, const double* w, const double* g, double step, double shrink,
                  std::size_t n);
double l1_norm(const double* a, std::size_t n);
double sq_norm(const double* a, std::size_t n);
void diff_stats(const double* a, const double* b, const double* g, std::size_t n,
                double* g_dot_diff, double* sq_dist);
}  // namespace avx2
#endif

const KernelTable& scalar_table();
// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// The table used by the library. Resolved on first call.
const KernelTable& active();

bool cpu_has_avx2();

}  // namespace hfsel::kernels
