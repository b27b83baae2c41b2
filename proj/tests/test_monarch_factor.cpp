#include <gtest/gtest.h>

#include <sstream>

#include "monarch/monarch_factor.hpp"
#include "monarch/oracle.hpp"

using namespace monarch;

namespace {

std::vector<cplx> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::vector<cplx> v(n);
    for (auto& x : v) x = draw_scalar<cplx>(rng);
    return v;
}

cplx root(std::size_t N, std::size_t k) {
    return std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(k % N) / static_cast<double>(N));
}

CoefficientMatrices<cplx> random_coefficients(std::size_t N, std::uint64_t seed) {
    const std::size_t s = exact_sqrt(N);
    std::mt19937_64 rng(seed);
    CoefficientMatrices<cplx> C{DenseMatrix<cplx>(N, s), DenseMatrix<cplx>(N, s)};
    for (auto& x : C.L.entries) x = draw_scalar<cplx>(rng);
    for (auto& x : C.R.entries) x = draw_scalar<cplx>(rng);
    return C;
}

MonarchFactorization<cplx> identity_monarch(std::size_t N) {
    const std::size_t s = exact_sqrt(N);
    return make_monarch<cplx>(N, 2, {BlockDiagonalMatrix<cplx>::identity(s, s), BlockDiagonalMatrix<cplx>::identity(s, s)},
                              Recipe::order2_plprp);
}

}  // namespace

TEST(MonarchMatvec, IdentityFactorsGivePermutation) {
    const auto M = identity_monarch(4);
    const std::vector<cplx> v{1.0, 2.0, 3.0, 4.0};
    const auto P = permutation_sigma(2, 4);
    EXPECT_EQ(monarch_matvec(M, v), apply_permutation(P, apply_permutation(P, apply_permutation(P, v))));
    EXPECT_EQ(monarch_matvec(M, v), (std::vector<cplx>{1.0, 3.0, 2.0, 4.0}));
    EXPECT_EQ(max_abs_diff(monarch_materialize(M), permutation_matrix<cplx>(P)), 0.0);
}

TEST(MonarchMatvec, MatchesMaterialized) {
    std::mt19937_64 rng(10);
    for (std::size_t N : {16, 64}) {
        const auto M = random_monarch<cplx>(N, 2, N);
        const auto D = monarch_materialize(M);
        for (int t = 0; t < 10; ++t) {
            const auto v = random_vec(N, rng);
            EXPECT_LE(max_abs_diff(monarch_matvec(M, v), dense_matvec(D, v)), 1e-10);
        }
    }
    EXPECT_THROW(monarch_matvec(random_monarch<cplx>(16, 2, 0), std::vector<cplx>(15)), std::invalid_argument);
}

TEST(MonarchMatvec, OrderTwoIsPLPRP) {
    const auto M = random_monarch<cplx>(16, 2, 3);
    const auto P = permutation_matrix<cplx>(permutation_sigma(4, 16));
    const auto L = materialize_blockdiag(M.factors[1]);
    const auto R = materialize_blockdiag(M.factors[0]);
    const auto want = dense_matmul(P, dense_matmul(L, dense_matmul(P, dense_matmul(R, P))));
    EXPECT_LE(max_abs_diff(monarch_materialize(M), want), 1e-13);
}

TEST(MonarchMatvec, Linearity) {
    std::mt19937_64 rng(11);
    for (std::size_t N : {16, 64, 256}) {
        const auto M = random_monarch<cplx>(N, 2, N + 1);
        const auto u = random_vec(N, rng), v = random_vec(N, rng);
        const cplx a{0.3, -1.2}, b{2.0, 0.5};
        std::vector<cplx> w(N);
        for (std::size_t i = 0; i < N; ++i) w[i] = a * u[i] + b * v[i];
        const auto Mu = monarch_matvec(M, u), Mv = monarch_matvec(M, v), Mw = monarch_matvec(M, w);
        for (std::size_t i = 0; i < N; ++i) EXPECT_LE(std::abs(Mw[i] - (a * Mu[i] + b * Mv[i])), 1e-10);
    }
}

TEST(MonarchMaterialize, ColumnsAreBasisEvaluationsBitExact) {
    const auto M = random_monarch<cplx>(64, 2, 12);
    const auto D = monarch_materialize(M);
    for (std::size_t j = 0; j < 64; ++j) EXPECT_EQ(factors_to_basis_eval(M, j), D.column(j));
    EXPECT_THROW(factors_to_basis_eval(M, 64), std::invalid_argument);
}

TEST(MonarchMaterialize, RandomColumnConsistency) {
    const auto M = random_monarch<cplx>(256, 2, 13);
    const auto D = monarch_materialize(M);
    std::mt19937_64 rng(13);
    for (int t = 0; t < 20; ++t) {
        const std::size_t j = rng() % 256;
        std::vector<cplx> e(256, cplx{});
        e[j] = 1.0;
        EXPECT_EQ(monarch_matvec(M, e), D.column(j));
    }
}

TEST(MonarchMaterialize, SizeGuard) {
    EXPECT_THROW(monarch_materialize(monarch_dft(4225 + 2 * 65 + 1)), resource_limit);
}

TEST(MonarchMatvec, BasisEvalSumsToMatvec) {
    std::mt19937_64 rng(14);
    const auto M = random_monarch<cplx>(16, 2, 14);
    const auto v = random_vec(16, rng);
    std::vector<cplx> acc(16, cplx{});
    for (std::size_t j = 0; j < 16; ++j) {
        const auto col = factors_to_basis_eval(M, j);
        for (std::size_t i = 0; i < 16; ++i) acc[i] += col[i] * v[j];
    }
    EXPECT_LE(max_abs_diff(acc, monarch_matvec(M, v)), 1e-12);
}

TEST(MonarchInverse, IdentityFactorsInvertPermutation) {
    const auto M = identity_monarch(16);
    std::mt19937_64 rng(15);
    const auto v = random_vec(16, rng);
    EXPECT_EQ(monarch_inverse_matvec(M, v), apply_permutation(permutation_sigma(4, 16).inverse(), v));
}

TEST(MonarchInverse, DftInverseIsScaledConjugateTranspose) {
    const std::size_t N = 16;
    const auto F = monarch_dft(N);
    const auto inv = prepare_inverse(F);
    const auto oracle_inv = oracle::dense_inverse(oracle::dft_matrix(N));
    DenseMatrix<cplx> got(N, N);
    for (std::size_t j = 0; j < N; ++j) {
        std::vector<cplx> e(N, cplx{});
        e[j] = 1.0;
        const auto col = monarch_inverse_matvec(inv, e);
        for (std::size_t i = 0; i < N; ++i) got(i, j) = col[i];
    }
    EXPECT_LE(max_abs_diff(got, oracle_inv), 1e-12);
    auto FH = oracle::dft_matrix(N).transpose();
    for (auto& x : FH.entries) x = std::conj(x) / static_cast<double>(N);
    EXPECT_LE(max_abs_diff(got, FH), 1e-12);
    EXPECT_LE(max_abs_diff(monarch_materialize(monarch_idft(N)), FH), 1e-12);
}

TEST(MonarchInverse, RoundTrip) {
    std::mt19937_64 rng(16);
    for (std::size_t N : {16, 64})
        for (std::uint64_t t = 0; t < 100; ++t) {
            const auto M = random_monarch<cplx>(N, 2, 1000 * N + t);
            const auto inv = prepare_inverse(M);
            const auto v = random_vec(N, rng);
            EXPECT_LE(max_abs_diff(monarch_inverse_matvec(inv, monarch_matvec(M, v)), v), 1e-8 * max_abs(v));
        }
}

TEST(MonarchInverse, SingularBlockIsNamed) {
    auto M = random_monarch<cplx>(16, 2, 17);
    for (std::size_t c = 0; c < 4; ++c) M.factors[1].blocks[2](3, c) = cplx{};
    try {
        prepare_inverse(M);
        FAIL() << "expected singular_factor";
    } catch (const singular_factor& e) {
        EXPECT_EQ(e.factor_index, 1u);
        EXPECT_EQ(e.block_index, 2u);
    }
    EXPECT_THROW(monarch_inverse_matvec(M, std::vector<cplx>(16)), singular_factor);
}

TEST(MonarchDft, SmallEntries) {
    const auto D = monarch_materialize(monarch_dft(4));
    EXPECT_LE(std::abs(D(1, 1) - cplx(0.0, 1.0)), 1e-15);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_LE(std::abs(D(0, k) - 1.0), 1e-15);
        EXPECT_LE(std::abs(D(k, 0) - 1.0), 1e-15);
    }
    EXPECT_THROW(monarch_dft(0), std::invalid_argument);
    EXPECT_EQ(monarch_dft(12).p, 1u);
}

TEST(MonarchDft, RadixForNonSquareSizes) {
    for (std::size_t N : {2, 8, 12, 27, 32, 128, 243}) {
        const auto F = monarch_dft(N);
        EXPECT_EQ(F.recipe, Recipe::radix_digit_reversal);
        const auto D = monarch_materialize(F);
        double worst = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) worst = std::max(worst, std::abs(D(i, j) - root(N, i * j)));
        EXPECT_LE(worst, 1e-10) << "N=" << N;
        EXPECT_LE(max_abs_diff(monarch_materialize(monarch_idft(N)), oracle::dense_inverse(D)), 1e-10) << "N=" << N;
    }
    EXPECT_EQ(monarch_dft(8).p, 3u);
    EXPECT_EQ(monarch_dft(32).b, 2u);
    const auto F = radix_dft(3, 2);
    EXPECT_LE(max_abs_diff(monarch_materialize(F), oracle::dft_matrix(9)), 1e-12);
    FlopCounter fc;
    monarch_matvec(monarch_dft(8), std::vector<cplx>(8, 1.0), &fc);
    EXPECT_EQ(fc.block_macs, 3u * 4u * 4u);
}

TEST(MonarchDft, ExactAgainstDirectFormula) {
    for (std::size_t N : {4, 16, 64, 256, 1024}) {
        const auto D = monarch_materialize(monarch_dft(N));
        double worst = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) worst = std::max(worst, std::abs(D(i, j) - root(N, i * j)));
        EXPECT_LE(worst, 1e-10) << "N=" << N;
    }
}

TEST(MonarchDft, Unitary) {
    const auto D = monarch_materialize(monarch_dft(16));
    auto DH = D.transpose();
    for (auto& x : DH.entries) x = std::conj(x);
    auto G = dense_matmul(D, DH);
    for (auto& x : G.entries) x /= 16.0;
    EXPECT_LE(max_abs_diff(G, DenseMatrix<cplx>::identity(16)), 1e-9 / 16.0);
}

TEST(MonarchDft, MatchesNaiveDft) {
    std::mt19937_64 rng(18);
    for (std::size_t N : {4, 16, 64, 256}) {
        const auto v = random_vec(N, rng);
        EXPECT_LE(max_abs_diff(monarch_matvec(monarch_dft(N), v), oracle::naive_dft(v)), 1e-9);
    }
}

TEST(MonarchDft, DeltaAndFirstColumn) {
    const std::size_t N = 64;
    const auto F = monarch_dft(N);
    std::vector<cplx> e0(N, cplx{});
    e0[0] = 1.0;
    EXPECT_LE(max_abs_diff(monarch_matvec(F, e0), std::vector<cplx>(N, 1.0)), 1e-12);
    const auto col = factors_to_basis_eval(F, 1);
    for (std::size_t i = 0; i < N; ++i) EXPECT_LE(std::abs(col[i] - root(N, i)), 1e-12);
}

TEST(CoeffsToFactors, IdentityCoefficientsGiveDft) {
    const auto A = monarch_materialize(coeffs_to_factors(dft_coefficients(64)));
    EXPECT_LE(max_abs_diff(A, oracle::dft_matrix(64)), 1e-10);
}

// Column (j1,j0) is l_{j0}(Z) r_{j0,j1}(Z^s) at Z = omega_N^i; check with Horner.
TEST(CoeffsToFactors, ColumnsEvaluateBasisPolynomials) {
    const std::size_t N = 16, s = 4;
    const auto C = random_coefficients(N, 19);
    const auto D = monarch_materialize(coeffs_to_factors(C));
    for (std::size_t j1 = 0; j1 < s; ++j1)
        for (std::size_t j0 = 0; j0 < s; ++j0) {
            const auto l = C.L.column(j0);
            std::vector<cplx> r(s);
            for (std::size_t m = 0; m < s; ++m) r[m] = C.R(j0 * s + m, j1);
            for (std::size_t i = 0; i < N; ++i) {
                const cplx z = root(N, i);
                const cplx want = oracle::horner(l, z) * oracle::horner(r, std::pow(z, static_cast<int>(s)));
                EXPECT_LE(std::abs(D(i, j1 * s + j0) - want), 1e-11);
            }
        }
}

TEST(CoeffsToFactors, SingleMonomialColumn) {
    const std::size_t N = 16, s = 4;
    auto C = dft_coefficients(N);
    for (std::size_t m = 0; m < N; ++m) C.L(m, 2) = cplx{};
    C.L(11, 2) = 1.0;
    const auto D = monarch_materialize(coeffs_to_factors(C));
    for (std::size_t j1 = 0; j1 < s; ++j1) {
        for (std::size_t i = 0; i < N; ++i) {
            const cplx z = root(N, i);
            const cplx want = std::pow(z, 11) * std::pow(z, static_cast<int>(s * j1));
            EXPECT_LE(std::abs(D(i, j1 * s + 2) - want), 1e-12);
        }
    }
}

TEST(CoeffsToFactors, ZeroRBlockZeroesColumns) {
    const std::size_t N = 16, s = 4;
    auto C = random_coefficients(N, 20);
    for (std::size_t m = 0; m < s; ++m)
        for (std::size_t j0 = 0; j0 < s; ++j0) C.R(1 * s + m, j0) = cplx{};
    const auto D = monarch_materialize(coeffs_to_factors(C));
    std::size_t zero_cols = 0;
    for (std::size_t j = 0; j < N; ++j) {
        const auto col = D.column(j);
        if (max_abs(col) == 0.0) ++zero_cols;
        if (j % s == 1) {
            EXPECT_EQ(max_abs(col), 0.0);
        }
    }
    EXPECT_EQ(zero_cols, s);
}

TEST(CoeffsToFactors, RejectsBadShapes) {
    CoefficientMatrices<cplx> C{DenseMatrix<cplx>(16, 3), DenseMatrix<cplx>(16, 4)};
    EXPECT_THROW(coeffs_to_factors(C), std::invalid_argument);
    CoefficientMatrices<cplx> D{DenseMatrix<cplx>(8, 2), DenseMatrix<cplx>(8, 2)};
    EXPECT_THROW(coeffs_to_factors(D), std::invalid_argument);
}

// Factor entries are polynomial evaluations; interpolating them with an
// independent Vandermonde solve must give back the coefficients.
TEST(CoeffsToFactors, BijectionRecoversCoefficients) {
    const std::size_t N = 16, s = 4;
    for (std::uint64_t seed : {21, 22, 23}) {
        const auto C = random_coefficients(N, seed);
        const auto M = coeffs_to_factors(C);
        const auto& R = M.factors[0];
        const auto& L = M.factors[1];

        std::vector<cplx> zs(N), ys(s);
        for (std::size_t i = 0; i < N; ++i) zs[i] = root(N, i);
        for (std::size_t i = 0; i < s; ++i) ys[i] = root(s, i);
        const auto VN = oracle::vandermonde(zs, N);
        const auto Vs = oracle::vandermonde(ys, s);

        double worst = 0.0;
        for (std::size_t j = 0; j < s; ++j) {
            std::vector<cplx> evals(N);
            for (std::size_t i = 0; i < N; ++i) evals[i] = L.blocks[i % s](i / s, j);
            const auto got = oracle::interpolate_basis(VN, evals);
            worst = std::max(worst, max_abs_diff(got, C.L.column(j)));
        }
        for (std::size_t j1 = 0; j1 < s; ++j1)
            for (std::size_t j0 = 0; j0 < s; ++j0) {
                const auto got = oracle::interpolate_basis(Vs, R.blocks[j1].column(j0));
                for (std::size_t m = 0; m < s; ++m) worst = std::max(worst, std::abs(got[m] - C.R(j1 * s + m, j0)));
            }
        EXPECT_LE(worst, 1e-8);
    }
}

TEST(FlopCount, ClosedForms) {
    EXPECT_EQ(flop_count(4, 2, FlopOp::matvec), 128u);
    EXPECT_EQ(flop_count(4, 2, FlopOp::conv), 3u * 128u + 24u);
    EXPECT_EQ(flop_count_dense(4), 128u);
    EXPECT_LT(flop_count(64, 6, FlopOp::matvec), flop_count(64, 2, FlopOp::matvec));
    EXPECT_THROW(flop_count(10, 2, FlopOp::matvec), std::invalid_argument);
}

TEST(FlopCount, RatioDoublesPerFourfold) {
    for (std::size_t N : {1024, 4096, 16384}) {
        auto ratio = [](std::size_t n) {
            return static_cast<double>(flop_count_dense(n)) / static_cast<double>(flop_count(n, 2, FlopOp::conv));
        };
        const double q = ratio(4 * N) / ratio(N);
        EXPECT_GE(q, 1.9);
        EXPECT_LE(q, 2.1);
    }
}

TEST(FlopCount, InstrumentedMatchesClosedForm) {
    for (std::size_t N : {16, 64, 256}) {
        FlopCounter fc;
        const auto M = random_monarch<cplx>(N, 2, 1);
        monarch_matvec(M, std::vector<cplx>(N, 1.0), &fc);
        EXPECT_EQ(fc.real_flops(), flop_count(N, 2, FlopOp::matvec));
    }
    FlopCounter fc;
    const auto M3 = random_monarch<cplx>(64, 3, 2, Recipe::multivar_subindex_reversal);
    monarch_matvec(M3, std::vector<cplx>(64, 1.0), &fc);
    EXPECT_EQ(fc.real_flops(), flop_count(64, 3, FlopOp::matvec));
}

TEST(MakeMonarch, Validation) {
    EXPECT_THROW(random_monarch<cplx>(10, 2, 0), std::invalid_argument);
    EXPECT_THROW(make_monarch<cplx>(16, 2, {BlockDiagonalMatrix<cplx>::identity(4, 4)}, Recipe::order2_plprp), std::invalid_argument);
    EXPECT_THROW(make_monarch<cplx>(16, 2, {BlockDiagonalMatrix<cplx>::identity(8, 2), BlockDiagonalMatrix<cplx>::identity(8, 2)},
                                    Recipe::order2_plprp),
                 std::invalid_argument);
    EXPECT_THROW(random_monarch<cplx>(64, 3, 0, Recipe::order2_plprp), std::invalid_argument);
}

TEST(Serialization, RoundTripComplexAndReal) {
    const auto M = random_monarch<cplx>(64, 3, 30, Recipe::multivar_subindex_reversal);
    std::stringstream ss;
    save_monarch(ss, M);
    EXPECT_EQ(ss.str().size(), 16u + 3u * 16u * 16u * 16u);
    const auto back = load_monarch<cplx>(ss);
    EXPECT_EQ(back.N, 64u);
    EXPECT_EQ(back.p, 3u);
    EXPECT_EQ(back.recipe, Recipe::multivar_subindex_reversal);
    EXPECT_EQ(max_abs_diff(monarch_materialize(back), monarch_materialize(M)), 0.0);

    const auto Rm = random_monarch<double>(16, 2, 31);
    std::stringstream rs;
    save_monarch(rs, Rm);
    const auto rb = load_monarch<double>(rs);
    EXPECT_EQ(max_abs_diff(monarch_materialize(rb), monarch_materialize(Rm)), 0.0);

    std::stringstream ds;
    save_monarch(ds, monarch_dft(8));
    const auto db = load_monarch<cplx>(ds);
    EXPECT_EQ(db.recipe, Recipe::radix_digit_reversal);
    EXPECT_EQ(db.perms, monarch_dft(8).perms);
}

TEST(Serialization, HeaderLayout) {
    std::stringstream ss;
    save_monarch(ss, monarch_dft(16));
    const std::string s = ss.str();
    EXPECT_EQ(s.substr(0, 4), "MNR1");
    EXPECT_EQ(static_cast<unsigned char>(s[4]), 16u);
    EXPECT_EQ(static_cast<unsigned char>(s[8]), 2u);
    EXPECT_EQ(static_cast<unsigned char>(s[10]), 1u);
}

TEST(Serialization, RejectsCorruptInput) {
    std::stringstream ss;
    save_monarch(ss, random_monarch<cplx>(16, 2, 32));
    const std::string good = ss.str();

    std::stringstream bad_magic("XXXX" + good.substr(4));
    EXPECT_THROW(load_monarch<cplx>(bad_magic), std::runtime_error);

    std::stringstream wrong_field(good);
    EXPECT_THROW(load_monarch<double>(wrong_field), std::runtime_error);

    std::stringstream truncated(good.substr(0, good.size() - 5));
    EXPECT_THROW(load_monarch<cplx>(truncated), std::runtime_error);

    std::stringstream trailing(good + "z");
    EXPECT_THROW(load_monarch<cplx>(trailing), std::runtime_error);

    std::string bad_n = good;
    bad_n[4] = 15;
    std::stringstream nonsquare(bad_n);
    EXPECT_THROW(load_monarch<cplx>(nonsquare), std::runtime_error);

    std::string bad_recipe = good;
    bad_recipe[12] = 3;
    std::stringstream unknown(bad_recipe);
    EXPECT_THROW(load_monarch<cplx>(unknown), std::runtime_error);
}
