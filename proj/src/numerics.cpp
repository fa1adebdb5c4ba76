#include "topicembed/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace topicembed {

double digamma(double x) {
    if (!(x > 0.0)) {
        throw std::domain_error("digamma: argument must be positive");
    }
    double result = 0.0;
    // psi(x) = psi(x + 1) - 1/x until the asymptotic series is accurate.
    // With the B_12 term kept, shifting past 10 leaves the truncation error
    // below 1e-15.
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    // psi(x) ~ log x - 1/(2x) - sum B_2n / (2n x^2n)
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = std::log(x) - 0.5 * inv;
    series -= inv2 * (1.0 / 12.0
              - inv2 * (1.0 / 120.0
              - inv2 * (1.0 / 252.0
              - inv2 * (1.0 / 240.0
              - inv2 * (1.0 / 132.0
              - inv2 * (691.0 / 32760.0))))));
    return result + series;
}

void softmax_into(std::span<const double> v, std::vector<double>& out) {
    if (v.empty()) {
        throw std::domain_error("softmax: empty input");
    }
    double m = -HUGE_VAL;
    for (double x : v) {
        if (std::isnan(x) || x == HUGE_VAL) {
            throw std::domain_error("softmax: non-finite input");
        }
        m = std::max(m, x);
    }
    out.resize(v.size());
    double z = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        z += out[i];
    }
    const double inv = 1.0 / z;
    for (double& x : out) x *= inv;
}

std::vector<double> softmax(std::span<const double> v) {
    std::vector<double> out;
    softmax_into(v, out);
    return out;
}

double logsumexp(std::span<const double> v) {
    double m = -HUGE_VAL;
    for (double x : v) m = std::max(m, x);
    if (m == -HUGE_VAL) return -HUGE_VAL;
    double z = 0.0;
    for (double x : v) z += std::exp(x - m);
    return m + std::log(z);
}

SymMatrix::SymMatrix(int n, double diag) : n_(n), a_(static_cast<std::size_t>(n) * n, 0.0) {
    for (int i = 0; i < n; ++i) at(i, i) = diag;
}

SymMatrix SymMatrix::identity(int n, double scale) { return SymMatrix(n, scale); }

void SymMatrix::symmetrize() {
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < i; ++j) at(j, i) = at(i, j);
}

double SymMatrix::trace() const {
    double t = 0.0;
    for (int i = 0; i < n_; ++i) t += at(i, i);
    return t;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
    for (double& x : a_) x *= s;
    return *this;
}

void SymMatrix::add_outer(std::span<const double> v, double s) {
    for (int i = 0; i < n_; ++i) {
        const double si = s * v[i];
        double* row = a_.data() + static_cast<std::size_t>(i) * n_;
        for (int j = 0; j < n_; ++j) row[j] += si * v[j];
    }
}

std::vector<double> SymMatrix::multiply(std::span<const double> v) const {
    std::vector<double> out(n_, 0.0);
    for (int i = 0; i < n_; ++i) {
        const double* row = a_.data() + static_cast<std::size_t>(i) * n_;
        double s = 0.0;
        for (int j = 0; j < n_; ++j) s += row[j] * v[j];
        out[i] = s;
    }
    return out;
}

namespace {

// Lower Cholesky factor of a; throws on a non-positive pivot.
std::vector<double> cholesky_lower(const SymMatrix& a) {
    const int n = a.dim();
    std::vector<double> l(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            for (int k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
            if (i == j) {
                if (!(s > 0.0)) throw not_positive_definite(i);
                l[i * n + i] = std::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    return l;
}

}  // namespace

SymMatrix sym_inverse(const SymMatrix& a) {
    const int n = a.dim();
    const std::vector<double> l = cholesky_lower(a);
    // Invert L in place (lower triangular), then A^-1 = L^-T L^-1.
    std::vector<double> li(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        li[i * n + i] = 1.0 / l[i * n + i];
        for (int j = 0; j < i; ++j) {
            double s = 0.0;
            for (int k = j; k < i; ++k) s += l[i * n + k] * li[k * n + j];
            li[i * n + j] = -s / l[i * n + i];
        }
    }
    SymMatrix inv(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = 0.0;
            for (int k = i; k < n; ++k) s += li[k * n + i] * li[k * n + j];
            inv.at(i, j) = s;
            inv.at(j, i) = s;
        }
    }
    return inv;
}

double sym_logdet(const SymMatrix& a) {
    const int n = a.dim();
    const std::vector<double> l = cholesky_lower(a);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::log(l[i * n + i]);
    return 2.0 * s;
}

std::vector<double> gaussian_vector(std::span<const double> mean,
                                    std::span<const double> sd,
                                    RandomStream& rng) {
    std::vector<double> out(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) out[i] = mean[i] + sd[i] * rng.normal();
    return out;
}

std::vector<double> gaussian_vector(std::span<const double> mean,
                                    double sd, RandomStream& rng) {
    std::vector<double> out(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) out[i] = mean[i] + sd * rng.normal();
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace topicembed
