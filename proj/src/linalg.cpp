#include "callias/linalg.hpp"

#include <complex>
#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>

#include <lapacke.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <vector>

#include "callias/errors.hpp"

extern "C" void openblas_set_num_threads(int);

namespace callias {

namespace {

HermitianEig run_zheevd(const Mat& a, bool vectors) {
  if (a.rows() != a.cols()) throw InvalidArgument("hermitian_eig: matrix is not square");
  HermitianEig out;
  const lapack_int n = static_cast<lapack_int>(a.rows());
  out.values.resize(n);
  if (n == 0) {
    out.vectors.resize(0, 0);
    return out;
  }
  Mat work = a;
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', n, work.data(), n,
                                   out.values.data());
  if (info != 0) throw NumericalError("zheevd failed, info=" + std::to_string(info));
  if (vectors) out.vectors = std::move(work);
  return out;
}

}  // namespace

HermitianEig hermitian_eig(const Mat& a) { return run_zheevd(a, true); }

RVec hermitian_eigenvalues(const Mat& a) { return run_zheevd(a, false).values; }

RVec singular_values(const Mat& a) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  RVec s(k);
  if (k == 0) return s;
  Mat work = a;
  lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n, work.data(), m, s.data(), nullptr,
                                   1, nullptr, 1);
  if (info != 0) throw NumericalError("zgesdd failed, info=" + std::to_string(info));
  return s;
}

Inertia hermitian_inertia(const Mat& a, double zero_tol) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Inertia in;
  if (n == 0) return in;
  Mat work = a;
  std::vector<lapack_int> ipiv(n);
  lapack_int info = LAPACKE_zhetrf(LAPACK_COL_MAJOR, 'L', n, work.data(), n, ipiv.data());
  if (info < 0) throw NumericalError("zhetrf failed, info=" + std::to_string(info));
  auto classify = [&](double d) {
    if (std::abs(d) <= zero_tol)
      ++in.zero;
    else if (d < 0)
      ++in.negative;
    else
      ++in.positive;
  };
  for (lapack_int k = 0; k < n;) {
    if (ipiv[k] > 0) {
      classify(work(k, k).real());
      k += 1;
    } else {
      const double p = work(k, k).real();
      const double q = work(k + 1, k + 1).real();
      const cplx b = work(k + 1, k);
      // eigenvalues of the 2x2 Hermitian pivot block
      const double mean = 0.5 * (p + q);
      const double rad = std::sqrt(0.25 * (p - q) * (p - q) + std::norm(b));
      classify(mean - rad);
      classify(mean + rad);
      k += 2;
    }
  }
  return in;
}

Mat column_space(const Mat& a, double tol) {
  if (a.cols() == 0) return Mat(a.rows(), 0);
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU);
  const RVec& s = svd.singularValues();
  Index r = 0;
  while (r < s.size() && s(r) > tol) ++r;
  return svd.matrixU().leftCols(r);
}

Mat orthonormalize(const Mat& a) {
  if (a.cols() == 0) return Mat(a.rows(), 0);
  Eigen::HouseholderQR<Mat> qr(a);
  return qr.householderQ() * Mat::Identity(a.rows(), a.cols());
}

Mat orthogonal_complement(const Mat& q) {
  const Index n = q.rows();
  const Index d = q.cols();
  if (d == 0) return Mat::Identity(n, n);
  if (d == n) return Mat(n, 0);
  Eigen::HouseholderQR<Mat> qr(q);
  Mat full = qr.householderQ();
  return full.rightCols(n - d);
}

RVec principal_angle_sines(const Mat& q1, const Mat& q2) {
  if (q1.cols() != q2.cols())
    throw InvalidArgument("principal_angle_sines: subspace dimensions differ");
  if (q1.cols() == 0) return RVec(0);
  Mat r = q2 - q1 * (q1.adjoint() * q2);
  RVec s = singular_values(r);
  return s;
}

double subspace_distance(const Mat& q1, const Mat& q2) {
  if (q1.rows() != q2.rows() || q1.cols() != q2.cols()) return 1.0;
  if (q1.cols() == 0) return 0.0;
  return std::min(1.0, principal_angle_sines(q1, q2).maxCoeff());
}

double hermitian_defect(const SpMat& a) {
  SpMat d = SpMat(a.adjoint()) - a;
  return frobenius_norm(d);
}

double frobenius_norm(const SpMat& a) {
  double s = 0.0;
  for (Index k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) s += std::norm(it.value());
  return std::sqrt(s);
}

SpMat prune(const SpMat& a) {
  SpMat p = a;
  p.prune([](Index, Index, const cplx& v) { return v != cplx(0.0, 0.0); });
  p.makeCompressed();
  return p;
}

bool exactly_equal(const SpMat& a, const SpMat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  SpMat pa = prune(a);
  SpMat pb = prune(b);
  if (pa.nonZeros() != pb.nonZeros()) return false;
  for (Index k = 0; k < pa.outerSize(); ++k) {
    SpMat::InnerIterator ia(pa, k);
    SpMat::InnerIterator ib(pb, k);
    for (; ia && ib; ++ia, ++ib)
      if (ia.index() != ib.index() || ia.value() != ib.value()) return false;
    if (ia || ib) return false;
  }
  return true;
}

Hasher::Hasher() {
  auto* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  ctx_ = ctx;
}

Hasher::~Hasher() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Hasher::update(const void* data, std::size_t size) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, size);
}

void Hasher::update(const std::string& s) {
  update(static_cast<std::int64_t>(s.size()));
  update(s.data(), s.size());
}

void Hasher::update(double x) { update(&x, sizeof x); }

void Hasher::update(std::int64_t x) { update(&x, sizeof x); }

void Hasher::update(const SpMat& a) {
  SpMat p = prune(a);
  update(static_cast<std::int64_t>(p.rows()));
  update(static_cast<std::int64_t>(p.cols()));
  for (Index k = 0; k < p.outerSize(); ++k)
    for (SpMat::InnerIterator it(p, k); it; ++it) {
      update(static_cast<std::int64_t>(it.row()));
      update(static_cast<std::int64_t>(it.col()));
      update(it.value().real());
      update(it.value().imag());
    }
}

std::string Hasher::hex() {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), md, &len);
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

std::string sha256_hex(const void* data, std::size_t size) {
  Hasher h;
  h.update(data, size);
  return h.hex();
}

std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

void pin_blas_threads() { openblas_set_num_threads(1); }

}  // namespace callias
