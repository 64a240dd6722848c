#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "callias/bvp.hpp"
#include "callias/callias_ops.hpp"
#include "callias/engine.hpp"
#include "callias/spectral.hpp"

namespace callias {

// A sampled family s -> A^s on [0, 1], constant outside a compact site set.
struct FamilySpec {
  BoundarySlice slice;
  std::vector<double> s_grid;  // 0 = s_0 < ... < s_m = 1
  std::function<BoundaryOperator(double)> operators;
  std::vector<Index> compact_variation;  // sites where members may differ
  bool endpoint_invertible = true;
  std::string label;

  // Grid shape, members on the slice, equality outside compact_variation at
  // every grid point, and a finite-difference continuity spot check.
  void validate() const;
};

// Concatenation: F on [0, 1/2], G on [1/2, 1]. F(1) must equal G(0).
FamilySpec concatenate(const FamilySpec& f, const FamilySpec& g);
// s -> A^{1-s}.
FamilySpec reversed(const FamilySpec& f);
// s -> -A^s.
FamilySpec negated(const FamilySpec& f);

struct FlowOptions {
  SpectralOptions spectral;       // Auto: dense up to window_above, window beyond
  Index window_above = 600;       // slice dimension switching to window mode
  Index window_count = 24;
  double isolate_width = 1e-6;    // crossing isolation
  double zero_nudge = 1e-7;       // shift of a sample that hits a zero eigenvalue
  double overlap = 0.7;
  int max_depth = 40;
  int workers = 0;
};

struct Crossing {
  double s = 0;      // midpoint of the isolating interval
  double width = 0;
  int direction = 0;  // +1 for lambda going from < 0 to > 0
  Index branch = 0;   // rank of the eigenvalue from the bottom just before s
};

struct FlowResult {
  enum class Method { CrossingCount, DaiZhang };
  Method method = Method::CrossingCount;
  std::vector<Crossing> crossings;
  long long sf = 0;
  long long sf_other = 0;  // the other method, asserted equal
  int refinement_depth = 0;
  std::vector<double> samples;  // grid points after zero nudging
};

const char* method_name(FlowResult::Method m);

struct EigenCurves {
  std::vector<double> s;
  std::vector<RVec> values;             // sorted spectrum (window if partial)
  std::vector<std::vector<Index>> branch;  // global rank per value
  std::vector<Crossing> crossings;
  int refinement_depth = 0;
};

EigenCurves eigencurves(const FamilySpec& f, SpectralEngine& engine, const FlowOptions& o = {});
// Computes both methods, throws NumericalError if they disagree and returns
// the requested one.
FlowResult spectral_flow(const FamilySpec& f, FlowResult::Method method, SpectralEngine& engine,
                         const FlowOptions& o = {});

struct EtaComponents {
  long long index = 0;
  long long dim_ker_a0 = 0;
  long long dim_ker_a1 = 0;
};

struct EtaReport {
  long long eta = 0;
  EtaComponents components;
  long long dual_route = 0;
  long long dual_index = 0;
  bool routes_agree = false;
  bool parity_ok = false;
  std::optional<long long> independent_eta;  // over a second cobordism
  std::optional<double> heat_route;
  std::vector<IndexReport> reports;
  double zero_tol_a0 = 0, zero_tol_a1 = 0;
};

// eta(A1, A0) = 2 ind D_{B0 + B1} + dim ker A0 + dim ker A1, B0 = APS(0) of A0
// at the start, B1 = H_{(0, inf)}(A1) at the end.
EtaReport relative_eta(const BoundaryOperator& a0, const BoundaryOperator& a1,
                       const CalliasOperator& cobordism, SpectralEngine& engine,
                       const IndexPolicy& policy = {},
                       const CalliasOperator* second_cobordism = nullptr);

// Cobordant: same slice and equal away from a compact site set.
bool cobordant(const BoundaryOperator& a, const BoundaryOperator& b);

struct EtaProperties {
  long long eta10 = 0, eta01 = 0, eta21 = 0, eta20 = 0;
  bool antisymmetry = false;  // eta(A0, A1) = -eta(A1, A0)
  bool cocycle = false;       // eta(A2, A0) = eta(A2, A1) + eta(A1, A0)
  std::vector<EtaReport> reports;
};

// Builds plateau cobordisms on the grid between each ordered pair.
EtaProperties eta_properties(const BoundaryOperator& a0, const BoundaryOperator& a1,
                             const BoundaryOperator& a2, const TimeGrid& grid, SpectralEngine& engine,
                             const IndexPolicy& policy = {}, Margins margins = {});

struct HeatOptions {
  double tolerance = 1e-10;  // absolute, on the head integral
  unsigned max_depth = 30;
};

// eta(0; A1, A0) from eigenvalues: integral of t^{-1/2} Tr(A1 e^{-tA1^2} - A0 e^{-tA0^2})
// over (0, inf) divided by Gamma(1/2). Adaptive Gauss-Kronrod on [0, 1]
// after t = u^2, closed-form erfc tails on [1, inf).
double relative_eta_heat(const SpectralData& a0, const SpectralData& a1, const HeatOptions& o = {});

struct EtaSfVerdict {
  long long eta = 0;
  long long sf = 0;
  bool passed = false;
  std::optional<long long> eta_end_ref, eta_start_ref;  // difference form
  bool difference_passed = true;
  EtaReport eta_report;
  FlowResult flow;
};

struct EtaSfOptions {
  TimeGrid grid{1.0, 24};
  Margins margins{};
  FlowResult::Method method = FlowResult::Method::CrossingCount;
  FlowOptions flow{};
};

// eta(A^1, A^0) over the interpolation cobordism of the family against 2 sf;
// with a reference, eta(A^1, A_ref) - eta(A^0, A_ref) against 2 sf as well.
EtaSfVerdict check_eta_equals_2sf(const FamilySpec& f, SpectralEngine& engine,
                                  const IndexPolicy& policy = {}, const EtaSfOptions& o = {},
                                  const BoundaryOperator* reference = nullptr);

}  // namespace callias
