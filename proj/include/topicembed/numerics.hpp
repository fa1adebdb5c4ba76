#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "topicembed/rng.hpp"

namespace topicembed {

// digamma(x) for x > 0.  Recurrence below 6, then the asymptotic series in
// 1/x^2.  Absolute error stays below 1e-10 down to x = 1e-3.
double digamma(double x);

// softmax with max-subtraction.  Throws std::domain_error on NaN input or an
// empty vector; +inf entries are rejected the same way.
std::vector<double> softmax(std::span<const double> v);

// In-place variant for hot loops: out is resized to v.size().
void softmax_into(std::span<const double> v, std::vector<double>& out);

double logsumexp(std::span<const double> v);

// Dense symmetric matrix, row-major full storage.  Only small orders are
// expected (embedding dimension M); no packing.
class SymMatrix {
public:
    SymMatrix() : n_(0) {}
    explicit SymMatrix(int n, double diag = 0.0);
    static SymMatrix identity(int n, double scale = 1.0);

    int dim() const { return n_; }
    double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    double at(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }

    // Copies the lower triangle onto the upper one.
    void symmetrize();

    double trace() const;

    SymMatrix& operator+=(const SymMatrix& o);
    SymMatrix& operator*=(double s);

    // Rank-one update: this += s * v v^T.
    void add_outer(std::span<const double> v, double s = 1.0);

    std::vector<double> multiply(std::span<const double> v) const;

private:
    int n_;
    std::vector<double> a_;
};

// Raised when a Cholesky factorization hits a non-positive pivot.  The pivot
// index is part of the message so failures point at the offending row.
struct not_positive_definite : std::runtime_error {
    int pivot;
    explicit not_positive_definite(int p)
        : std::runtime_error("matrix not positive definite at pivot " + std::to_string(p)),
          pivot(p) {}
};

// Inverse of a symmetric positive definite matrix via Cholesky (A = L L^T).
// Throws not_positive_definite if a pivot is <= 0.  The result is exactly
// symmetric by construction.
SymMatrix sym_inverse(const SymMatrix& a);

// log det(A) for symmetric positive definite A, from the Cholesky factor.
double sym_logdet(const SymMatrix& a);

// Sample N(mean, diag(sd^2)); one fresh normal per coordinate, in order.
std::vector<double> gaussian_vector(std::span<const double> mean,
                                    std::span<const double> sd,
                                    RandomStream& rng);
std::vector<double> gaussian_vector(std::span<const double> mean,
                                    double sd, RandomStream& rng);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace topicembed
