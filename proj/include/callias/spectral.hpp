#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "callias/callias_ops.hpp"
#include "callias/linalg.hpp"

namespace callias {

struct SpectralInterval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool lower_closed = false;
  bool upper_closed = false;

  static SpectralInterval all() { return {}; }
  static SpectralInterval below(double a, bool closed) {
    return {-std::numeric_limits<double>::infinity(), a, false, closed};
  }
  static SpectralInterval above(double a, bool closed) {
    return {a, std::numeric_limits<double>::infinity(), closed, false};
  }
  static SpectralInterval between(double lo, bool lo_closed, double hi, bool hi_closed) {
    return {lo, hi, lo_closed, hi_closed};
  }
  void validate() const;
};

// Eigenvalues outside a partial decomposition, counted by inertia.
struct SpectralWindow {
  double lower = 0;   // every eigenvalue in [lower, upper] is in the data
  double upper = 0;
  Index below = 0;    // eigenvalues < lower
  Index above = 0;    // eigenvalues > upper
};

struct SpectralData {
  std::string label;
  std::string op_hash;
  Index dim = 0;
  RVec values;  // ascending, with multiplicity
  Mat vectors;  // orthonormal columns
  double zero_tol = 0;
  std::optional<SpectralWindow> window;

  bool complete() const { return !window.has_value(); }
  Index size() const { return values.size(); }
  Index kernel_dim() const;
  // Membership with the zero convention: an endpoint equal to 0 compares
  // against |lambda| <= zero_tol, so the closed/open flag decides kernels.
  bool contains(const SpectralInterval& I, double lambda) const;
  // Global count of eigenvalues in I (uses the window counts if partial).
  Index count(const SpectralInterval& I) const;
  // Indices into values/vectors of the eigenpairs in I.
  std::vector<Index> members(const SpectralInterval& I) const;
  // Throws when a nonzero endpoint sits within zero_tol of an eigenvalue.
  void check_endpoints(const SpectralInterval& I) const;
  // Spectral data of -A (eigenvalues negated, order restored).
  SpectralData negated() const;
  double max_abs() const;
};

struct SpectralOptions {
  enum class Mode { Auto, Dense, Window };
  Mode mode = Mode::Auto;
  Index dense_limit = 4000;
  Index window_count = 200;
  double shift = 0.0;
  std::optional<double> zero_tol;     // default 1e-8 * max|lambda|
  double residual_tol = 1e-9;
  int max_iterations = 1000;
};

// Uncached decomposition. Dense LAPACK up to dense_limit, otherwise a
// shift-invert subspace iteration around options.shift.
SpectralData eigendecompose(const BoundaryOperator& op, const SpectralOptions& options = {});

// Worst eigen-residual max_j |A u_j - l_j u_j| / max(1, |l_j|) and Gram
// defect max |U^* U - I|.
struct SpectralQuality {
  double residual = 0;
  double orthonormality = 0;
};
SpectralQuality spectral_quality(const BoundaryOperator& op, const SpectralData& s);

// Orthonormal basis of the eigenvectors with lambda in I.
Mat spectral_projection(const SpectralData& s, const SpectralInterval& I);

double sobolev_norm(const SpectralData& s, const Vec& u, double order);

struct HybridNorms {
  double check = 0;  // H^{1/2} below a (closed), H^{-1/2} above
  double hat = 0;    // H^{-1/2} below a (closed), H^{1/2} above
  double check_of_negated = 0;  // check norm with respect to -A at cut -a
  bool hat_equals_negated_check = false;
};
HybridNorms hybrid_norms(const SpectralData& s, const Vec& u, double a);

// beta(u, v) = -<cdt u, v>, antilinear in u.
cplx duality_pairing(const CliffordData& cl, const Vec& u, const Vec& v);

struct PairingGram {
  Mat gram;
  double abs_det = 0;
  double min_singular = 0;
};
// Gram matrix of beta between the eigenbases of A and A#.
PairingGram pairing_gram(const SpectralData& a, const SpectralData& a_sharp, const CliffordData& cl);

// Cut-off equal to 1 on [0, r/3] and 0 on [2r/3, r].
struct Cutoff {
  double r = 1.0;
  double operator()(double t) const;
};

struct CylinderSection {
  TimeGrid grid;
  std::vector<Vec> nodes;  // values at t_k, k = 0..K
};

CylinderSection extension_map(const SpectralData& s, const Vec& u, const TimeGrid& grid,
                              const Cutoff& chi);

// Discrete H^1 norm on a product cylinder: h-weighted node sums of
// |u|^2 + |A u|^2 plus midpoint differences for |d_t u|^2.
double cylinder_h1_norm(const SpectralData& s, const CylinderSection& u);
// |u(0)|_{H^{1/2}} / |u|_{H^1}.
double trace_ratio(const SpectralData& s, const CylinderSection& u);
// |E u|_D / check_norm(u) with the graph norm of c(dt)(d_t + A).
double extension_ratio(const SpectralData& s, const Vec& u, const TimeGrid& grid, const Cutoff& chi,
                       double a);

}  // namespace callias
