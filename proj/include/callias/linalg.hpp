#pragma once

#include <complex>
#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace callias {

using Index = Eigen::Index;
using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cplx>;
using Triplet = Eigen::Triplet<cplx>;

struct HermitianEig {
  RVec values;  // ascending
  Mat vectors;  // orthonormal columns
};

// Full Hermitian eigendecomposition (LAPACK divide and conquer).
HermitianEig hermitian_eig(const Mat& a);
RVec hermitian_eigenvalues(const Mat& a);

// Singular values, descending.
RVec singular_values(const Mat& a);

struct Inertia {
  Index negative = 0;
  Index zero = 0;
  Index positive = 0;
};

// Sylvester inertia from a Bunch-Kaufman factorisation.
Inertia hermitian_inertia(const Mat& a, double zero_tol);

// Orthonormal basis of the column span; singular values <= tol are dropped.
Mat column_space(const Mat& a, double tol);
// Thin QR; assumes full column rank.
Mat orthonormalize(const Mat& a);
// Orthonormal basis of the orthogonal complement of span(q), q orthonormal.
Mat orthogonal_complement(const Mat& q);
// Sines of the principal angles between two subspaces of equal dimension,
// descending.
RVec principal_angle_sines(const Mat& q1, const Mat& q2);
// Largest principal-angle sine; 1 if the dimensions differ.
double subspace_distance(const Mat& q1, const Mat& q2);

double hermitian_defect(const SpMat& a);
double frobenius_norm(const SpMat& a);
SpMat prune(const SpMat& a);
bool exactly_equal(const SpMat& a, const SpMat& b);

// SHA-256 hex digest.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& s);

class Hasher {
 public:
  Hasher();
  ~Hasher();
  Hasher(const Hasher&) = delete;
  Hasher& operator=(const Hasher&) = delete;
  void update(const void* data, std::size_t size);
  void update(const std::string& s);
  void update(double x);
  void update(std::int64_t x);
  void update(const SpMat& a);
  std::string hex();

 private:
  void* ctx_;
};

// Pin BLAS to one thread so floating point results do not depend on the
// machine's core count.
void pin_blas_threads();

}  // namespace callias
