#ifndef MONARCH_ORACLE_HPP
#define MONARCH_ORACLE_HPP

// Brute-force references. Nothing here may include another monarch module
// besides field_core.

#include "monarch/field_core.hpp"

namespace monarch::oracle {

inline constexpr std::size_t kOracleLimit = 4096;

inline void guard(std::size_t N, const char* who) {
    if (N > kOracleLimit) throw resource_limit(std::string(who) + ": size " + std::to_string(N) + " exceeds oracle limit");
}

/// out[i] = sum_j omega_N^{ij} v[j]
inline std::vector<cplx> naive_dft(const std::vector<cplx>& v) {
    const std::size_t N = v.size();
    guard(N, "naive_dft");
    std::vector<cplx> out(N);
    for (std::size_t i = 0; i < N; ++i) {
        cplx acc{};
        for (std::size_t j = 0; j < N; ++j) {
            const double t = 2.0 * std::numbers::pi * static_cast<double>((i * j) % N) / static_cast<double>(N);
            acc += cplx(std::cos(t), std::sin(t)) * v[j];
        }
        out[i] = acc;
    }
    return out;
}

/// Dense matrix with entry [i,j] = omega_N^{ij}.
inline DenseMatrix<cplx> dft_matrix(std::size_t N) {
    guard(N, "dft_matrix");
    DenseMatrix<cplx> F(N, N);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            const double t = 2.0 * std::numbers::pi * static_cast<double>((i * j) % N) / static_cast<double>(N);
            F(i, j) = {std::cos(t), std::sin(t)};
        }
    return F;
}

/// out[i] = sum_j k[j] u[(i - j) mod N]
template <Field T>
std::vector<T> naive_circular_conv(const std::vector<T>& k, const std::vector<T>& u) {
    if (k.size() != u.size()) throw std::invalid_argument("naive_circular_conv: length mismatch");
    const std::size_t N = k.size();
    guard(N, "naive_circular_conv");
    std::vector<T> out(N, T{});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) out[i] += k[j] * u[(i + N - j) % N];
    return out;
}

/// Coefficients of the polynomial product, length |k| + |u| - 1.
template <Field T>
std::vector<T> naive_linear_conv(const std::vector<T>& k, const std::vector<T>& u) {
    if (k.empty() || u.empty()) return {};
    guard(k.size() + u.size(), "naive_linear_conv");
    std::vector<T> out(k.size() + u.size() - 1, T{});
    for (std::size_t a = 0; a < k.size(); ++a)
        for (std::size_t c = 0; c < u.size(); ++c) out[a + c] += k[a] * u[c];
    return out;
}

/// Solves evals * x = y by dense LU. Throws singular_system.
template <Field T>
std::vector<T> interpolate_basis(const DenseMatrix<T>& evals, const std::vector<T>& y) {
    if (evals.rows != evals.cols) throw std::invalid_argument("interpolate_basis: evaluation matrix must be square");
    if (y.size() != evals.rows) throw std::invalid_argument("interpolate_basis: length mismatch");
    guard(evals.rows, "interpolate_basis");
    LUDecomposition<T> lu(evals, 1e15);
    return lu.solve(y);
}

template <Field T>
DenseMatrix<T> dense_inverse(const DenseMatrix<T>& A) {
    guard(A.rows, "dense_inverse");
    return LUDecomposition<T>(A, 1e15).inverse();
}

/// V[i, a] = points[i]^a for a < degree_bound.
inline DenseMatrix<cplx> vandermonde(const std::vector<cplx>& points, std::size_t degree_bound) {
    DenseMatrix<cplx> V(points.size(), degree_bound);
    for (std::size_t i = 0; i < points.size(); ++i) {
        cplx x{1.0};
        for (std::size_t a = 0; a < degree_bound; ++a) {
            V(i, a) = x;
            x *= points[i];
        }
    }
    return V;
}

/// sum_a c[a] x^a by Horner's rule.
template <Field T>
T horner(const std::vector<T>& c, T x) {
    T acc{};
    for (std::size_t a = c.size(); a-- > 0;) acc = acc * x + c[a];
    return acc;
}

/// T_a(x) by the three-term recurrence.
inline double chebyshev_t(std::size_t a, double x) {
    if (a == 0) return 1.0;
    double t0 = 1.0, t1 = x;
    for (std::size_t k = 1; k < a; ++k) {
        const double t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    return t1;
}

/// sum_a c[a] T_a(x)
inline double chebyshev_eval(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (std::size_t a = 0; a < c.size(); ++a) acc += c[a] * chebyshev_t(a, x);
    return acc;
}

/// cos(pi (i + 1/2) / N)
inline double chebyshev_node(std::size_t N, std::size_t i) {
    return std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(N));
}

/// Product of two Chebyshev series, linearised with
/// 2 T_a T_b = T_{a+b} + T_{|a-b|}.
inline std::vector<double> chebyshev_product_expand(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double w = 0.5 * a[i] * b[j];
            out[i + j] += w;
            out[i > j ? i - j : j - i] += w;
        }
    return out;
}

/// Chebyshev series of p(T_m(x)) given the Chebyshev series of p, using
/// T_a(T_m(x)) = T_{a m}(x).
inline std::vector<double> chebyshev_compose_power(const std::vector<double>& c, std::size_t m) {
    if (c.empty()) return {};
    std::vector<double> out((c.size() - 1) * m + 1, 0.0);
    for (std::size_t a = 0; a < c.size(); ++a) out[a * m] += c[a];
    return out;
}

}  // namespace monarch::oracle

#endif
