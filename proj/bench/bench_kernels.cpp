// Serial reference versus OpenMP kernels on a 2-dim bowl slice. Prints
// wall times and checks that both produce identical results.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "callias/bvp.hpp"
#include "callias/callias_ops.hpp"
#include "callias/engine.hpp"
#include "callias/kernels.hpp"
#include "callias/linalg.hpp"

using namespace callias;

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

BoundaryOperator bowl(double radius, double h, double mass) {
  const BoundarySlice s = BoundarySlice::plane(radius, h, 2);
  auto f = sample_sites(s, [](double x, double y) { return (x * x + y * y) / 2; });
  return build_boundary_operator(s, f, mass, "bowl");
}

}  // namespace

int main(int argc, char** argv) {
  const int workers = argc > 1 ? std::atoi(argv[1]) : 8;
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  pin_blas_threads();
  std::printf("workers=%d\n", workers);

  const BoundaryOperator big = bowl(8.0, 0.0625, 0.0);
  std::vector<double> g1, g2;
  const double ts = seconds([&] { g1 = kernels::site_gaps_serial(big); });
  const double tp = seconds([&] { g2 = kernels::site_gaps(big, workers); });
  std::printf("site_gaps       sites=%-7lld serial %.4fs  parallel %.4fs  identical=%s\n",
              static_cast<long long>(big.slice().site_count()), ts, tp, g1 == g2 ? "yes" : "no");

  std::vector<BoundaryOperator> ops;
  for (int i = 0; i < 16; ++i) ops.push_back(bowl(2.0, 0.25, -0.5 + 0.0625 * i));
  std::vector<const BoundaryOperator*> ptrs;
  for (const auto& o : ops) ptrs.push_back(&o);
  SpectralEngine e1, e2;
  std::vector<std::shared_ptr<const SpectralData>> d1, d2;
  const double ds = seconds([&] { d1 = kernels::decompose_batch_serial(e1, ptrs); });
  const double dp = seconds([&] { d2 = kernels::decompose_batch(e2, ptrs, workers); });
  bool same = true;
  for (std::size_t i = 0; i < d1.size(); ++i) same = same && d1[i]->values == d2[i]->values;
  std::printf("decompose_batch ops=%-9zu serial %.4fs  parallel %.4fs  identical=%s\n", ptrs.size(), ds, dp,
              same ? "yes" : "no");

  std::vector<ConstrainedOperator> bvps;
  for (std::size_t i = 0; i + 1 < ops.size(); i += 2) {
    const CalliasOperator d = CalliasOperator::interpolating(ops[i], ops[i + 1], TimeGrid{1.0, 4});
    bvps.push_back(ConstrainedOperator::assemble(d, aps_condition(*d1[i], 0.0, Side::Start),
                                                 aps_condition(*d1[i + 1], 0.0, Side::End)));
  }
  std::vector<const ConstrainedOperator*> bp;
  for (const auto& b : bvps) bp.push_back(&b);
  IndexPolicy policy;
  policy.method = IndexPolicy::Method::Dense;
  std::vector<IndexReport> r1, r2;
  const double is = seconds([&] { r1 = kernels::index_batch_serial(bp, policy); });
  const double ip = seconds([&] { r2 = kernels::index_batch(bp, policy, workers); });
  bool same_idx = true;
  for (std::size_t i = 0; i < r1.size(); ++i) same_idx = same_idx && r1[i].index == r2[i].index;
  std::printf("index_batch     bvps=%-8zu serial %.4fs  parallel %.4fs  identical=%s\n", bp.size(), is, ip,
              same_idx ? "yes" : "no");
  return same && same_idx && g1 == g2 ? 0 : 1;
}
