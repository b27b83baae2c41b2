#ifndef MONARCH_CAUSAL_CONV_HPP
#define MONARCH_CAUSAL_CONV_HPP

#include <random>

#include "monarch/monarch_factor.hpp"

namespace monarch {

/// ceil(sqrt(2n))^2
inline std::size_t causal_padded_size(std::size_t n) {
    std::size_t s = 0;
    while (s * s < 2 * n) ++s;
    if (s == 0) s = 1;
    return s * s;
}

/// Coefficients whose zero pattern makes the convolution causal.
///
/// L: only the top s x s block is populated, lower triangular.
/// R: block j1 entry [i0, j0] vanishes when i0 < j0, and also when
///    i0 >= floor(s/2) while j0 < floor(s/2).
/// Every diagonal entry of the top L block and of each R block is nonzero.
struct MaskedCoefficients {
    std::size_t n = 0;
    std::size_t N = 0;
    CoefficientMatrices<cplx> C;
};

inline void check_mask(const MaskedCoefficients& mc) {
    const std::size_t N = mc.N;
    const std::size_t s = exact_sqrt(N);
    if (s == 0 || N != causal_padded_size(mc.n))
        throw std::invalid_argument("masked coefficients: N must equal ceil(sqrt(2n))^2");
    if (mc.C.L.rows != N || mc.C.L.cols != s || mc.C.R.rows != N || mc.C.R.cols != s)
        throw std::invalid_argument("masked coefficients: matrices must be N x sqrt(N)");
    const std::size_t h = s / 2;
    auto where = [](const char* m, std::size_t blk, std::size_t r, std::size_t c) {
        return std::string(m) + "[block " + std::to_string(blk) + "][" + std::to_string(r) + "," + std::to_string(c) + "]";
    };
    for (std::size_t m = 0; m < N; ++m)
        for (std::size_t j1 = 0; j1 < s; ++j1) {
            const cplx x = mc.C.L(m, j1);
            if (m >= s) {
                if (x != cplx{}) throw mask_violation(where("L", m / s, m % s, j1) + " must be zero outside the top block");
            } else if (m < j1 && x != cplx{}) {
                throw mask_violation(where("L", 0, m, j1) + " must be zero above the diagonal");
            } else if (m == j1 && x == cplx{}) {
                throw mask_violation(where("L", 0, m, j1) + " diagonal must be nonzero");
            }
        }
    for (std::size_t j1 = 0; j1 < s; ++j1)
        for (std::size_t i0 = 0; i0 < s; ++i0)
            for (std::size_t j0 = 0; j0 < s; ++j0) {
                const cplx x = mc.C.R(j1 * s + i0, j0);
                if (i0 < j0 && x != cplx{}) throw mask_violation(where("R", j1, i0, j0) + " must be zero above the diagonal");
                if (i0 >= h && j0 < h && x != cplx{})
                    throw mask_violation(where("R", j1, i0, j0) + " must be zero in the lower-left quadrant");
                if (i0 == j0 && x == cplx{}) throw mask_violation(where("R", j1, i0, j0) + " diagonal must be nonzero");
            }
}

/// Seeded coefficients that obey the mask; diagonals are 1 + |draw|.
inline MaskedCoefficients mask_random_coefficients(std::size_t n, std::uint64_t seed) {
    const std::size_t N = causal_padded_size(n);
    const std::size_t s = exact_sqrt(N);
    const std::size_t h = s / 2;
    std::mt19937_64 rng(seed);
    MaskedCoefficients mc{n, N, {DenseMatrix<cplx>(N, s), DenseMatrix<cplx>(N, s)}};
    for (std::size_t i0 = 0; i0 < s; ++i0)
        for (std::size_t j1 = 0; j1 <= i0; ++j1) {
            const cplx d = draw_scalar<cplx>(rng);
            mc.C.L(i0, j1) = i0 == j1 ? cplx{1.0 + std::abs(d)} : d;
        }
    for (std::size_t j1 = 0; j1 < s; ++j1)
        for (std::size_t i0 = 0; i0 < s; ++i0)
            for (std::size_t j0 = 0; j0 <= i0; ++j0) {
                if (i0 >= h && j0 < h) continue;
                const cplx d = draw_scalar<cplx>(rng);
                mc.C.R(j1 * s + i0, j0) = i0 == j0 ? cplx{1.0 + std::abs(d)} : d;
            }
    return mc;
}

/// The instantiation whose basis polynomials are the monomials Z^j; its
/// factors are exactly the DFT of size N.
inline MaskedCoefficients monomial_coefficients(std::size_t n) {
    const std::size_t N = causal_padded_size(n);
    return {n, N, dft_coefficients(N)};
}

struct CausalMonarchOperator {
    std::size_t n = 0;
    std::size_t N = 0;
    MonarchFactorization<cplx> M;
    MonarchInverse<cplx> M_inv;
};

inline CausalMonarchOperator build_causal_operator(std::size_t n, const MaskedCoefficients& mc) {
    if (mc.n != n) throw std::invalid_argument("build_causal_operator: coefficients were built for a different n");
    check_mask(mc);
    auto M = coeffs_to_factors(mc.C);
    auto inv = prepare_inverse(M);
    return {n, mc.N, std::move(M), std::move(inv)};
}

/// Skips the mask check. Only for negative controls in tests.
inline CausalMonarchOperator build_unmasked_operator(std::size_t n, const CoefficientMatrices<cplx>& C) {
    const std::size_t N = causal_padded_size(n);
    if (C.L.rows != N) throw std::invalid_argument("build_unmasked_operator: coefficient size does not match n");
    auto M = coeffs_to_factors(C);
    auto inv = prepare_inverse(M);
    return {n, N, std::move(M), std::move(inv)};
}

/// Dense random coefficients with every entry populated (fails the mask).
inline CoefficientMatrices<cplx> unmasked_random_coefficients(std::size_t n, std::uint64_t seed) {
    const std::size_t N = causal_padded_size(n);
    const std::size_t s = exact_sqrt(N);
    std::mt19937_64 rng(seed);
    CoefficientMatrices<cplx> C{DenseMatrix<cplx>(N, s), DenseMatrix<cplx>(N, s)};
    for (auto& x : C.L.entries) x = draw_scalar<cplx>(rng);
    for (auto& x : C.R.entries) x = draw_scalar<cplx>(rng);
    for (std::size_t j1 = 0; j1 < s; ++j1) {
        C.L(j1, j1) += 2.0;
        for (std::size_t j0 = 0; j0 < s; ++j0) C.R(j1 * s + j0, j0) += 2.0;
    }
    return C;
}

/// M^{-1}((M k') .* (M u')) with k', u' zero-padded to N. Returns the first
/// n entries, or all N when full_output is set.
inline Signal<cplx> causal_conv(const CausalMonarchOperator& op, const Signal<cplx>& k, const Signal<cplx>& u,
                                bool full_output = false, FlopCounter* counter = nullptr) {
    if (k.size() != op.n || u.size() != op.n) throw std::invalid_argument("causal_conv: signals must have length n");
    Signal<cplx> kp(op.N, cplx{}), up(op.N, cplx{});
    std::copy(k.begin(), k.end(), kp.begin());
    std::copy(u.begin(), u.end(), up.begin());
    auto fk = monarch_matvec(op.M, kp, counter);
    auto fu = monarch_matvec(op.M, up, counter);
    for (std::size_t i = 0; i < op.N; ++i) fk[i] *= fu[i];
    if (counter) counter->pointwise_muls += op.N;
    auto y = monarch_inverse_matvec(op.M_inv, fk, counter);
    if (!full_output) y.resize(op.n);
    return y;
}

struct CausalityReport {
    std::size_t trials = 0;
    std::size_t violations = 0;
    double max_leakage = 0.0;
};

/// Perturbs one input position per trial by 1e-3 and measures how much the
/// outputs strictly before it move.
inline CausalityReport causality_jacobian_check(const CausalMonarchOperator& op, const Signal<cplx>& k, std::size_t trials,
                                                std::uint64_t seed = 0, double tolerance = 1e-9) {
    constexpr double delta = 1e-3;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, op.n - 1);
    CausalityReport rep;
    rep.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        Signal<cplx> u(op.n);
        for (auto& x : u) x = draw_scalar<cplx>(rng);
        const std::size_t j = pick(rng);
        auto base = causal_conv(op, k, u);
        u[j] += delta;
        auto bumped = causal_conv(op, k, u);
        double leak = 0.0;
        for (std::size_t i = 0; i < j; ++i) leak = std::max(leak, std::abs(bumped[i] - base[i]));
        rep.max_leakage = std::max(rep.max_leakage, leak);
        if (leak >= tolerance) ++rep.violations;
    }
    return rep;
}

}  // namespace monarch

#endif
