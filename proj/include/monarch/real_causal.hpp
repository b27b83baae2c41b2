#ifndef MONARCH_REAL_CAUSAL_HPP
#define MONARCH_REAL_CAUSAL_HPP

#include <optional>
#include <random>
#include <utility>

#include "monarch/monarch_factor.hpp"

namespace monarch {

/// C_N[i,j] = T_j(cos(pi (i + 1/2) / N)).
struct ChebyshevTransform {
    std::size_t N = 0;
    DenseMatrix<double> C;
};

inline ChebyshevTransform chebyshev_transform_build(std::size_t N) {
    if (N == 0) throw std::invalid_argument("chebyshev_transform_build: N must be positive");
    ChebyshevTransform t{N, DenseMatrix<double>(N, N)};
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            t.C(i, j) = std::cos(std::numbers::pi * static_cast<double>(j) * (static_cast<double>(i) + 0.5) /
                                 static_cast<double>(N));
    return t;
}

/// C^{-1} y = diag(1/N, 2/N, ..., 2/N) C^T y. The columns of C are
/// orthogonal with squared norms N, N/2, ..., N/2.
inline std::vector<double> chebyshev_inverse_matvec(const ChebyshevTransform& t, const std::vector<double>& y) {
    if (y.size() != t.N) throw std::invalid_argument("chebyshev_inverse_matvec: length mismatch");
    std::vector<double> x(t.N, 0.0);
    for (std::size_t i = 0; i < t.N; ++i)
        for (std::size_t j = 0; j < t.N; ++j) x[j] += t.C(i, j) * y[i];
    const double n = static_cast<double>(t.N);
    x[0] /= n;
    for (std::size_t j = 1; j < t.N; ++j) x[j] *= 2.0 / n;
    return x;
}

/// Splits C_N = Cbar - Sbar with
///   Cbar[i,j] = cos(pi (i+1/2) j1 / s) cos(pi (i+1/2) j0 / N)
///   Sbar[i,j] = sin(pi (i+1/2) j1 / s) sin(pi (i+1/2) j0 / N)
/// where j = j1 s + j0 and s = sqrt(N).
inline std::pair<DenseMatrix<double>, DenseMatrix<double>> chebyshev_cs_split(std::size_t N) {
    const std::size_t s = exact_sqrt(N);
    if (s == 0) throw std::invalid_argument("chebyshev_cs_split: N must be a perfect square");
    DenseMatrix<double> Cb(N, N), Sb(N, N);
    for (std::size_t i = 0; i < N; ++i) {
        const double x = std::numbers::pi * (static_cast<double>(i) + 0.5);
        for (std::size_t j = 0; j < N; ++j) {
            const double a = x * static_cast<double>(j / s) / static_cast<double>(s);
            const double c = x * static_cast<double>(j % s) / static_cast<double>(N);
            Cb(i, j) = std::cos(a) * std::cos(c);
            Sb(i, j) = std::sin(a) * std::sin(c);
        }
    }
    return {std::move(Cb), std::move(Sb)};
}

// ---------------------------------------------------------------------------
// SC operators

/// Real coefficient blocks fed to block_sc_build, with s = sqrt(N):
///   L[a, j1] is the T_a coefficient of l_{s-j1-1}, degree <= s-j1-1.
///   R rows [j1 s, (j1+1) s) hold R_{j1}; R_{j1}[a, j0] is the T_a
///   coefficient of r_{s-j1-1, s-j0-1}, degree <= s-j0-1, and zero when
///   (s-j0-1-a) is odd.
struct SCOperator {
    std::size_t N = 0;
    std::size_t s = 0;
    DenseMatrix<double> L;
    DenseMatrix<double> R;
    MonarchFactorization<double> M;               // P L P R P
    std::optional<LUDecomposition<double>> dense; // LU of the SC matrix, empty when singular
};

inline void check_sc_constraints(const DenseMatrix<double>& L, const DenseMatrix<double>& R, std::size_t s) {
    const std::size_t N = s * s;
    for (std::size_t a = 0; a < N; ++a)
        for (std::size_t j1 = 0; j1 < s; ++j1)
            if (L(a, j1) != 0.0 && a + j1 + 1 > s)
                throw mask_violation("L[" + std::to_string(a) + "," + std::to_string(j1) + "] exceeds degree " +
                                     std::to_string(s - j1 - 1));
    for (std::size_t j1 = 0; j1 < s; ++j1)
        for (std::size_t a = 0; a < s; ++a)
            for (std::size_t j0 = 0; j0 < s; ++j0) {
                if (R(j1 * s + a, j0) == 0.0) continue;
                const std::string at = "R[block " + std::to_string(j1) + "][" + std::to_string(a) + "," + std::to_string(j0) + "]";
                if (a + j0 + 1 > s) throw mask_violation(at + " exceeds degree " + std::to_string(s - j0 - 1));
                if ((s - j0 - 1 - a) % 2 != 0) throw mask_violation(at + " breaks the parity constraint");
            }
}

namespace detail {

inline bool even_block(std::size_t i, std::size_t s) { return (i / s) % 2 == 0; }

}  // namespace detail

/// Scatters u0 into the even-numbered length-s blocks and u1 into the odd
/// ones, each in order.
inline std::vector<double> mix(const std::vector<double>& u0, const std::vector<double>& u1, std::size_t N) {
    const std::size_t s = exact_sqrt(N);
    if (s == 0) throw std::invalid_argument("mix: N must be a perfect square");
    const std::size_t n0 = ((s + 1) / 2) * s, n1 = (s / 2) * s;
    if (u0.size() != n0 || u1.size() != n1) throw std::invalid_argument("mix: half lengths do not match N");
    std::vector<double> u(N);
    std::size_t a = 0, c = 0;
    for (std::size_t i = 0; i < N; ++i) u[i] = detail::even_block(i, s) ? u0[a++] : u1[c++];
    return u;
}

/// Inverse of mix.
inline std::pair<std::vector<double>, std::vector<double>> mix_split(const std::vector<double>& u) {
    const std::size_t s = exact_sqrt(u.size());
    if (s == 0) throw std::invalid_argument("mix_split: length must be a perfect square");
    std::vector<double> u0, u1;
    u0.reserve(((s + 1) / 2) * s);
    u1.reserve((s / 2) * s);
    for (std::size_t i = 0; i < u.size(); ++i) (detail::even_block(i, s) ? u0 : u1).push_back(u[i]);
    return {std::move(u0), std::move(u1)};
}

/// SC matrix times u using two matvecs of the factored M:
///   z0 = M (mix(u0,0) + mix(0,u1)), z1 = M (mix(u0,0) - mix(0,u1)),
///   y[i] = D[i] * (z0[i] if i1 even else z1[i]), D[i] = (-1)^{i1 (s-1)}.
inline std::vector<double> sc_matvec_via_parity_split(const SCOperator& op, const std::vector<double>& u,
                                                      FlopCounter* counter = nullptr) {
    if (u.size() != op.N) throw std::invalid_argument("sc_matvec_via_parity_split: length mismatch");
    auto [u0, u1] = mix_split(u);
    const std::vector<double> zero0(u0.size(), 0.0), zero1(u1.size(), 0.0);
    const auto a = mix(u0, zero1, op.N);
    const auto c = mix(zero0, u1, op.N);
    std::vector<double> plus(op.N), minus(op.N);
    for (std::size_t i = 0; i < op.N; ++i) {
        plus[i] = a[i] + c[i];
        minus[i] = a[i] - c[i];
    }
    const auto z0 = monarch_matvec(op.M, plus, counter);
    const auto z1 = monarch_matvec(op.M, minus, counter);
    std::vector<double> y(op.N);
    for (std::size_t i = 0; i < op.N; ++i) {
        const std::size_t i1 = i / op.s;
        const double d = (i1 * (op.s - 1)) % 2 == 0 ? 1.0 : -1.0;
        y[i] = d * (i1 % 2 == 0 ? z0[i] : z1[i]);
    }
    return y;
}

/// Dense SC matrix, column by column through the parity split.
inline DenseMatrix<double> sc_materialize(const SCOperator& op) {
    if (op.N > kMaterializeLimit) throw resource_limit("sc_materialize: N exceeds materialization limit");
    DenseMatrix<double> D(op.N, op.N);
    std::vector<double> e(op.N, 0.0);
    for (std::size_t j = 0; j < op.N; ++j) {
        e[j] = 1.0;
        auto col = sc_matvec_via_parity_split(op, e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < op.N; ++i) D(i, j) = col[i];
    }
    return D;
}

/// Largest N for which block_sc_build prepares the dense SC inverse.
inline constexpr std::size_t kDenseSCLimit = 1024;

/// L' = P C_N L sliced into s diagonal blocks; R_{j1} = C_s R_{j1}.
inline SCOperator block_sc_build(const DenseMatrix<double>& L, const DenseMatrix<double>& R) {
    const std::size_t N = L.rows;
    const std::size_t s = exact_sqrt(N);
    if (s == 0) throw std::invalid_argument("block_sc_build: N must be a perfect square");
    if (L.cols != s || R.rows != N || R.cols != s)
        throw std::invalid_argument("block_sc_build: coefficient matrices must be N x sqrt(N)");
    check_sc_constraints(L, R, s);

    BlockDiagonalMatrix<double> Lf(s, s);
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t c = i / s, a = i % s;
        // Only rows m < s of L can be populated.
        for (std::size_t m = 0; m < s; ++m) {
            const double t = std::cos(std::numbers::pi * static_cast<double>(m) * (static_cast<double>(i) + 0.5) /
                                      static_cast<double>(N));
            for (std::size_t j = 0; j < s; ++j) Lf.blocks[a](c, j) += t * L(m, j);
        }
    }
    const auto Cs = chebyshev_transform_build(s);
    BlockDiagonalMatrix<double> Rf(s, s);
    for (std::size_t j1 = 0; j1 < s; ++j1)
        for (std::size_t i0 = 0; i0 < s; ++i0)
            for (std::size_t m = 0; m < s; ++m)
                for (std::size_t j0 = 0; j0 < s; ++j0) Rf.blocks[j1](i0, j0) += Cs.C(i0, m) * R(j1 * s + m, j0);

    SCOperator op;
    op.N = N;
    op.s = s;
    op.L = L;
    op.R = R;
    op.M = make_monarch<double>(N, 2, {std::move(Rf), std::move(Lf)}, Recipe::order2_plprp);
    if (N <= kDenseSCLimit) {
        try {
            op.dense.emplace(sc_materialize(op));
        } catch (const singular_system&) {
            op.dense.reset();
        }
    }
    return op;
}

/// Random coefficients meeting the degree and parity constraints, with every
/// leading coefficient set to 1 + |draw| so the SC matrix is invertible.
inline std::pair<DenseMatrix<double>, DenseMatrix<double>> random_sc_coefficients(std::size_t N, std::uint64_t seed) {
    const std::size_t s = exact_sqrt(N);
    if (s == 0) throw std::invalid_argument("random_sc_coefficients: N must be a perfect square");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    DenseMatrix<double> L(N, s), R(N, s);
    for (std::size_t j1 = 0; j1 < s; ++j1) {
        const std::size_t deg = s - j1 - 1;
        for (std::size_t a = 0; a < deg; ++a) L(a, j1) = U(rng);
        L(deg, j1) = 1.0 + std::abs(U(rng));
    }
    for (std::size_t j1 = 0; j1 < s; ++j1)
        for (std::size_t j0 = 0; j0 < s; ++j0) {
            const std::size_t deg = s - j0 - 1;
            for (std::size_t a = deg % 2; a < deg; a += 2) R(j1 * s + a, j0) = U(rng);
            R(j1 * s + deg, j0) = 1.0 + std::abs(U(rng));
        }
    return {std::move(L), std::move(R)};
}

/// Every coefficient polynomial set to a single Chebyshev polynomial of the
/// maximal allowed degree: l_k = T_k and r_{k,m} = T_m.
inline std::pair<DenseMatrix<double>, DenseMatrix<double>> chebyshev_monomial_sc_coefficients(std::size_t N) {
    const std::size_t s = exact_sqrt(N);
    if (s == 0) throw std::invalid_argument("chebyshev_monomial_sc_coefficients: N must be a perfect square");
    DenseMatrix<double> L(N, s), R(N, s);
    for (std::size_t j1 = 0; j1 < s; ++j1) L(s - j1 - 1, j1) = 1.0;
    for (std::size_t j1 = 0; j1 < s; ++j1)
        for (std::size_t j0 = 0; j0 < s; ++j0) R(j1 * s + s - j0 - 1, j0) = 1.0;
    return {std::move(L), std::move(R)};
}

/// Intermediate vectors of one real_causal_conv call.
struct RealConvTrace {
    std::vector<double> k_padded, u_padded, k_eval, u_eval, product, full;
};

/// M'^{-1}((M' k') .* (M' u')) with k', u' front-padded by ceil(N/2) zeros;
/// returns the first n entries. The inverse is a dense LU of the SC matrix,
/// so this path is limited to test-scale N.
inline std::vector<double> real_causal_conv(const SCOperator& op, const std::vector<double>& k, const std::vector<double>& u,
                                            RealConvTrace* trace = nullptr) {
    const std::size_t n = k.size();
    if (u.size() != n) throw std::invalid_argument("real_causal_conv: k and u must have the same length");
    if (n == 0 || n > op.N / 2) throw std::invalid_argument("real_causal_conv: need 1 <= n <= floor(N/2)");
    if (!op.dense) throw singular_system("real_causal_conv: SC matrix is singular or too large for the dense inverse");
    const std::size_t front = (op.N + 1) / 2;
    std::vector<double> kp(op.N, 0.0), up(op.N, 0.0);
    std::copy(k.begin(), k.end(), kp.begin() + static_cast<std::ptrdiff_t>(front));
    std::copy(u.begin(), u.end(), up.begin() + static_cast<std::ptrdiff_t>(front));
    auto fk = sc_matvec_via_parity_split(op, kp);
    auto fu = sc_matvec_via_parity_split(op, up);
    std::vector<double> prod(op.N);
    for (std::size_t i = 0; i < op.N; ++i) prod[i] = fk[i] * fu[i];
    auto full = op.dense->solve(prod);
    std::vector<double> out(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n));
    if (trace) *trace = {std::move(kp), std::move(up), std::move(fk), std::move(fu), std::move(prod), std::move(full)};
    return out;
}

/// Complex signals are rejected: this pipeline is real end to end.
inline std::vector<double> real_causal_conv(const SCOperator&, const std::vector<cplx>&, const std::vector<cplx>&) {
    throw std::invalid_argument("real_causal_conv: inputs must be real");
}

}  // namespace monarch

#endif
