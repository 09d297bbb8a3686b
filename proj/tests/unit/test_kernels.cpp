#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hfsel/kernels.hpp"

using namespace hfsel;

namespace {

std::vector<double> randvec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

void expect_close(double a, double b, double scale) {
  EXPECT_NEAR(a, b, 1e-12 * (1.0 + scale));
}

}  // namespace

TEST(Kernels, ScalarReferenceValues) {
  const double a[] = {1, 2, 3};
  const double b[] = {4, -5, 6};
  EXPECT_DOUBLE_EQ(kernels::scalar::dot(a, b, 3), 12.0);
  EXPECT_DOUBLE_EQ(kernels::scalar::l1_norm(b, 3), 15.0);
  EXPECT_DOUBLE_EQ(kernels::scalar::sq_norm(a, 3), 14.0);
  const double w[] = {0.5, -0.05, 2.0};
  const double g[] = {0.0, 0.0, 0.0};
  double out[3];
  kernels::scalar::prox_l1_step(out, w, g, 1.0, 0.1, 3);
  EXPECT_DOUBLE_EQ(out[0], 0.4);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
  EXPECT_DOUBLE_EQ(out[2], 1.9);
}

TEST(Kernels, TableNames) {
  EXPECT_EQ(kernels::scalar_table().name, "scalar");
  if (!kernels::cpu_has_avx2()) EXPECT_EQ(kernels::avx2_table(), nullptr);
}

TEST(Kernels, Avx2MatchesScalar) {
  const kernels::KernelTable* v = kernels::avx2_table();
  if (v == nullptr) GTEST_SKIP() << "no AVX2 on this machine/build";
  const auto& s = kernels::scalar_table();
  std::mt19937_64 rng(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 33u, 100u, 1001u}) {
    auto a = randvec(rng, n), b = randvec(rng, n), g = randvec(rng, n);
    const double scale = std::sqrt(kernels::scalar::sq_norm(a.data(), n) * kernels::scalar::sq_norm(b.data(), n));
    expect_close(v->dot(a.data(), b.data(), n), s.dot(a.data(), b.data(), n), scale);
    expect_close(v->l1_norm(a.data(), n), s.l1_norm(a.data(), n), s.l1_norm(a.data(), n));
    expect_close(v->sq_norm(a.data(), n), s.sq_norm(a.data(), n), s.sq_norm(a.data(), n));

    std::vector<std::uint32_t> idx(n);
    std::vector<double> w(2 * n + 1);
    std::vector<float> wf(w.size());
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(w.size() - 1));
    for (auto& i : idx) i = pick(rng);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = std::normal_distribution<double>(0, 1)(rng);
      wf[i] = static_cast<float>(w[i]);
    }
    expect_close(v->gather_dot(w.data(), idx.data(), a.data(), n),
                 s.gather_dot(w.data(), idx.data(), a.data(), n), scale + n);
    expect_close(v->gather_dot_f32(wf.data(), idx.data(), a.data(), n),
                 s.gather_dot_f32(wf.data(), idx.data(), a.data(), n), scale + n);

    std::vector<double> o1(n), o2(n);
    s.prox_l1_step(o1.data(), a.data(), g.data(), 0.3, 0.2, n);
    v->prox_l1_step(o2.data(), a.data(), g.data(), 0.3, 0.2, n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(o1[i], o2[i], 1e-14);
      EXPECT_EQ(o1[i] == 0.0, o2[i] == 0.0);  // sparsity pattern is identical
    }
    s.prox_l2_step(o1.data(), a.data(), g.data(), 0.3, 0.9, n);
    v->prox_l2_step(o2.data(), a.data(), g.data(), 0.3, 0.9, n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(o1[i], o2[i], 1e-14);

    double gd1, sq1, gd2, sq2;
    s.diff_stats(a.data(), b.data(), g.data(), n, &gd1, &sq1);
    v->diff_stats(a.data(), b.data(), g.data(), n, &gd2, &sq2);
    expect_close(gd1, gd2, scale + n);
    expect_close(sq1, sq2, sq1);
  }
}
