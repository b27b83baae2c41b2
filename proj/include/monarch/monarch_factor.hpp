#ifndef MONARCH_MONARCH_FACTOR_HPP
#define MONARCH_MONARCH_FACTOR_HPP

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

#include "monarch/field_core.hpp"

namespace monarch {

/// How permutations interleave with the block-diagonal factors.
///
/// order2_plprp: M = P B1 P B0 P with P = sigma(sqrt N, N).
/// multivar_subindex_reversal: digit reversal first, then B0, then for each
/// later factor a rotation of the trailing digits, no trailing permutation.
enum class Recipe : std::uint16_t { order2_plprp = 0, multivar_subindex_reversal = 1, radix_digit_reversal = 2 };

template <Field T>
struct MonarchFactorization {
    std::size_t N = 0;
    std::size_t p = 0;
    std::size_t b = 0;
    std::vector<BlockDiagonalMatrix<T>> factors;  // factors[0] acts first
    Recipe recipe = Recipe::order2_plprp;
    std::vector<IndexPermutation> perms;          // p + 1 entries, perms[0] acts first
};

/// The p + 1 permutations threaded between factors for a recipe.
inline std::vector<IndexPermutation> recipe_permutations(Recipe recipe, std::size_t b, std::size_t p) {
    const std::size_t N = ipow(b, p);
    std::vector<IndexPermutation> perms;
    perms.reserve(p + 1);
    switch (recipe) {
        case Recipe::order2_plprp: {
            if (p != 2) throw std::invalid_argument("order2 recipe requires p = 2");
            auto P = IndexPermutation::sigma(b, N);
            perms.assign(3, P);
            break;
        }
        case Recipe::multivar_subindex_reversal: {
            perms.push_back(IndexPermutation::subindex_reversal(b, p));
            for (std::size_t a = 1; a < p; ++a) perms.push_back(IndexPermutation::block_sigma(b, ipow(b, p - a + 1), N));
            perms.push_back(IndexPermutation::identity(N));
            break;
        }
        case Recipe::radix_digit_reversal: {
            // Factor a acts on groups {k + m b^a : m < b} inside each segment
            // of length b^{a+1}; G_a gathers each group into a contiguous block.
            auto gather = [&](std::size_t a) { return IndexPermutation::block_sigma(ipow(b, a), ipow(b, a + 1), N); };
            perms.push_back(IndexPermutation::subindex_reversal(b, p).then(gather(0)));
            for (std::size_t a = 1; a < p; ++a) perms.push_back(gather(a - 1).inverse().then(gather(a)));
            perms.push_back(gather(p - 1).inverse());
            break;
        }
        default:
            throw std::invalid_argument("unknown recipe");
    }
    return perms;
}

/// Validates shapes and attaches the recipe permutations.
template <Field T>
MonarchFactorization<T> make_monarch(std::size_t N, std::size_t p, std::vector<BlockDiagonalMatrix<T>> factors,
                                     Recipe recipe) {
    if (p < 1) throw std::invalid_argument("make_monarch: order must be at least 1");
    const std::size_t b = exact_root(N, p);
    if (b == 0) throw std::invalid_argument("make_monarch: N=" + std::to_string(N) + " is not a perfect p-th power");
    if (factors.size() != p) throw std::invalid_argument("make_monarch: expected p factors");
    for (const auto& f : factors)
        if (f.block_size != b || f.num_blocks * f.block_size != N)
            throw std::invalid_argument("make_monarch: factor shape does not match N and b");
    MonarchFactorization<T> M;
    M.N = N;
    M.p = p;
    M.b = b;
    M.factors = std::move(factors);
    M.recipe = recipe;
    M.perms = recipe_permutations(recipe, b, p);
    return M;
}

template <Field T>
std::vector<T> monarch_matvec(const MonarchFactorization<T>& M, const std::vector<T>& v, FlopCounter* counter = nullptr) {
    if (v.size() != M.N) throw std::invalid_argument("monarch_matvec: length mismatch");
    std::vector<T> x = apply_permutation(M.perms[0], v);
    for (std::size_t a = 0; a < M.p; ++a) {
        x = block_diag_matvec(M.factors[a], x, counter);
        x = apply_permutation(M.perms[a + 1], x);
    }
    return x;
}

inline constexpr std::size_t kMaterializeLimit = 4096;

template <Field T>
DenseMatrix<T> monarch_materialize(const MonarchFactorization<T>& M) {
    if (M.N > kMaterializeLimit)
        throw resource_limit("monarch_materialize: N=" + std::to_string(M.N) + " exceeds " +
                             std::to_string(kMaterializeLimit));
    DenseMatrix<T> D(M.N, M.N);
    std::vector<T> e(M.N, T{});
    for (std::size_t j = 0; j < M.N; ++j) {
        e[j] = T{1};
        auto col = monarch_matvec(M, e);
        e[j] = T{};
        for (std::size_t i = 0; i < M.N; ++i) D(i, j) = col[i];
    }
    return D;
}

/// Column j of M: the values of the j-th basis polynomial on the evaluation grid.
template <Field T>
std::vector<T> factors_to_basis_eval(const MonarchFactorization<T>& M, std::size_t j) {
    if (j >= M.N) throw std::invalid_argument("factors_to_basis_eval: column index out of range");
    std::vector<T> e(M.N, T{});
    e[j] = T{1};
    return monarch_matvec(M, e);
}

// ---------------------------------------------------------------------------
// Inversion

/// Per-block inverses of a factorization, ready for repeated solves.
template <Field T>
struct MonarchInverse {
    std::vector<BlockDiagonalMatrix<T>> inverse_factors;
    std::vector<IndexPermutation> inverse_perms;
    std::size_t N = 0;
    double worst_condition = 0.0;
};

template <Field T>
MonarchInverse<T> prepare_inverse(const MonarchFactorization<T>& M, double max_condition = 1e13) {
    MonarchInverse<T> inv;
    inv.N = M.N;
    for (std::size_t a = 0; a < M.p; ++a) {
        std::vector<DenseMatrix<T>> blocks;
        blocks.reserve(M.factors[a].num_blocks);
        for (std::size_t k = 0; k < M.factors[a].num_blocks; ++k) {
            try {
                LUDecomposition<T> lu(M.factors[a].blocks[k], max_condition);
                inv.worst_condition = std::max(inv.worst_condition, lu.condition());
                blocks.push_back(lu.inverse());
            } catch (const singular_system& e) {
                throw singular_factor(a, k, e.what());
            }
        }
        inv.inverse_factors.emplace_back(std::move(blocks));
    }
    for (const auto& P : M.perms) inv.inverse_perms.push_back(P.inverse());
    return inv;
}

template <Field T>
std::vector<T> monarch_inverse_matvec(const MonarchInverse<T>& inv, const std::vector<T>& y, FlopCounter* counter = nullptr) {
    if (y.size() != inv.N) throw std::invalid_argument("monarch_inverse_matvec: length mismatch");
    const std::size_t p = inv.inverse_factors.size();
    std::vector<T> x = apply_permutation(inv.inverse_perms[p], y);
    for (std::size_t a = p; a-- > 0;) {
        x = block_diag_matvec(inv.inverse_factors[a], x, counter);
        x = apply_permutation(inv.inverse_perms[a], x);
    }
    return x;
}

template <Field T>
std::vector<T> monarch_inverse_matvec(const MonarchFactorization<T>& M, const std::vector<T>& y) {
    return monarch_inverse_matvec(prepare_inverse(M), y);
}

// ---------------------------------------------------------------------------
// Coefficients and the DFT

/// Coefficient blocks for an order-2 Monarch. Column j1 of L holds the
/// monomial coefficients of l_{j1}(Z) (degree < N). Rows [j1*s, (j1+1)*s) of
/// R form the block R_{j1}; its column j0 holds the coefficients of
/// r_{j1,j0}(Y) (degree < s). Here s = sqrt(N).
template <Field T>
struct CoefficientMatrices {
    DenseMatrix<T> L;
    DenseMatrix<T> R;
};

/// Builds P L P R P from coefficient blocks. Column (j1,j0) of the result
/// evaluates l_{j0}(Z) * r_{j0,j1}(Z^s) at Z = omega_N^i.
inline MonarchFactorization<cplx> coeffs_to_factors(const CoefficientMatrices<cplx>& C) {
    const std::size_t N = C.L.rows;
    const std::size_t s = exact_sqrt(N);
    if (s == 0) throw std::invalid_argument("coeffs_to_factors: N must be a perfect square");
    if (C.L.cols != s || C.R.rows != N || C.R.cols != s)
        throw std::invalid_argument("coeffs_to_factors: coefficient matrices must be N x sqrt(N)");

    // L'' = F_N * L, skipping rows of L that are entirely zero.
    std::vector<std::size_t> live;
    for (std::size_t m = 0; m < N; ++m)
        for (std::size_t j = 0; j < s; ++j)
            if (C.L(m, j) != cplx{}) {
                live.push_back(m);
                break;
            }
    BlockDiagonalMatrix<cplx> Lf(s, s);
    for (std::size_t i = 0; i < N; ++i) {
        // Row i = (c, a) of L'' becomes row c of block a.
        const std::size_t c = i / s, a = i % s;
        auto& blk = Lf.blocks[a];
        for (auto m : live) {
            const cplx w = omega(N, static_cast<long long>((i * m) % N));
            for (std::size_t j = 0; j < s; ++j) blk(c, j) += w * C.L(m, j);
        }
    }

    BlockDiagonalMatrix<cplx> Rf(s, s);
    for (std::size_t j1 = 0; j1 < s; ++j1) {
        auto& blk = Rf.blocks[j1];
        for (std::size_t i0 = 0; i0 < s; ++i0)
            for (std::size_t m = 0; m < s; ++m) {
                const cplx w = omega(s, static_cast<long long>((i0 * m) % s));
                for (std::size_t j0 = 0; j0 < s; ++j0) blk(i0, j0) += w * C.R(j1 * s + m, j0);
            }
    }
    return make_monarch<cplx>(N, 2, {std::move(Rf), std::move(Lf)}, Recipe::order2_plprp);
}

/// Identity top block for L and identity blocks for R.
inline CoefficientMatrices<cplx> dft_coefficients(std::size_t N) {
    const std::size_t s = exact_sqrt(N);
    if (s == 0) throw std::invalid_argument("dft_coefficients: N must be a perfect square");
    CoefficientMatrices<cplx> C{DenseMatrix<cplx>(N, s), DenseMatrix<cplx>(N, s)};
    for (std::size_t j = 0; j < s; ++j) C.L(j, j) = 1.0;
    for (std::size_t j1 = 0; j1 < s; ++j1)
        for (std::size_t j0 = 0; j0 < s; ++j0) C.R(j1 * s + j0, j0) = 1.0;
    return C;
}

/// Radix-b Cooley-Tukey DFT of size b^p as p butterfly factors. Block
/// (segment, k) of factor a has entry [r, m] = omega_{b^{a+1}}^{m (k + r b^a)}.
inline MonarchFactorization<cplx> radix_dft(std::size_t b, std::size_t p) {
    if (b < 2 || p == 0) throw std::invalid_argument("radix_dft: need b >= 2 and p >= 1");
    const std::size_t N = ipow(b, p);
    std::vector<BlockDiagonalMatrix<cplx>> fs;
    for (std::size_t a = 0; a < p; ++a) {
        const std::size_t stride = ipow(b, a), span = stride * b;
        BlockDiagonalMatrix<cplx> B(N / b, b);
        for (std::size_t blk = 0; blk < N / b; ++blk) {
            const std::size_t k = blk % stride;
            for (std::size_t r = 0; r < b; ++r)
                for (std::size_t m = 0; m < b; ++m)
                    B.blocks[blk](r, m) = omega(span, static_cast<long long>((m * (k + r * stride)) % span));
        }
        fs.push_back(std::move(B));
    }
    return make_monarch<cplx>(N, p, std::move(fs), Recipe::radix_digit_reversal);
}

/// Monarch with entry [i,j] = omega_N^{ij}: order 2 when N is a perfect
/// square, otherwise radix b with the smallest b such that N = b^p (p = 1
/// for sizes that are not perfect powers).
inline MonarchFactorization<cplx> monarch_dft(std::size_t N) {
    if (exact_sqrt(N) != 0) return coeffs_to_factors(dft_coefficients(N));
    for (std::size_t b = 2; b <= N; ++b) {
        std::size_t x = N, p = 0;
        while (x % b == 0) {
            x /= b;
            ++p;
        }
        if (x == 1) return radix_dft(b, p);
    }
    throw std::invalid_argument("monarch_dft: N must be positive");
}

/// conj(F_N) / N, the inverse of monarch_dft(N), in factored form.
inline MonarchFactorization<cplx> monarch_idft(std::size_t N) {
    auto F = monarch_dft(N);
    for (auto& f : F.factors)
        for (auto& blk : f.blocks)
            for (auto& x : blk.entries) x = std::conj(x);
    for (auto& x : F.factors[0].blocks) {
        for (auto& e : x.entries) e /= static_cast<double>(N);
    }
    return F;
}

// ---------------------------------------------------------------------------
// Random factors for tests and benchmarks

template <Field T>
T draw_scalar(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    if constexpr (std::is_same_v<T, double>) {
        return U(rng);
    } else {
        for (;;) {
            double x = U(rng), y = U(rng);
            if (x * x + y * y <= 1.0) return {x, y};
        }
    }
}

/// Entries uniform on [-1,1] (real) or the unit disk (complex), plus 2 on
/// each block diagonal.
template <Field T>
MonarchFactorization<T> random_monarch(std::size_t N, std::size_t p, std::uint64_t seed,
                                       Recipe recipe = Recipe::order2_plprp) {
    const std::size_t b = exact_root(N, p);
    if (b == 0) throw std::invalid_argument("random_monarch: N is not a perfect p-th power");
    std::mt19937_64 rng(seed);
    std::vector<BlockDiagonalMatrix<T>> fs;
    for (std::size_t a = 0; a < p; ++a) {
        BlockDiagonalMatrix<T> B(N / b, b);
        for (auto& blk : B.blocks) {
            for (auto& x : blk.entries) x = draw_scalar<T>(rng);
            for (std::size_t r = 0; r < b; ++r) blk(r, r) += T{2.0};
        }
        fs.push_back(std::move(B));
    }
    return make_monarch<T>(N, p, std::move(fs), recipe);
}

// ---------------------------------------------------------------------------
// FLOP model

enum class FlopOp { matvec, conv };

/// Real FLOPs of the factored path: a matvec is p * (N/b) * b^2 complex MACs
/// at 8 FLOPs each; permutations are free. A convolution is three matvecs
/// plus N complex products at 6 FLOPs each.
inline std::uint64_t flop_count(std::size_t N, std::size_t p, FlopOp op) {
    const std::size_t b = exact_root(N, p);
    if (b == 0) throw std::invalid_argument("flop_count: N=" + std::to_string(N) + " is not a perfect p-th power");
    const std::uint64_t matvec = static_cast<std::uint64_t>(p) * (N / b) * b * b * 8;
    if (op == FlopOp::matvec) return matvec;
    return 3 * matvec + 6 * static_cast<std::uint64_t>(N);
}

/// Dense N x N complex matvec: N^2 MACs at 8 FLOPs each.
inline std::uint64_t flop_count_dense(std::size_t N) { return 8ull * N * N; }

// ---------------------------------------------------------------------------
// Binary format
//
//   offset  size  field
//   0       4     magic "MNR1"
//   4       4     u32 N
//   8       2     u16 p
//   10      2     u16 field tag (0 real, 1 complex)
//   12      2     u16 recipe tag
//   14      2     u16 reserved, zero
//   16      ...   factors in order; each block row-major as (re, im) float64 pairs
//
// All integers and floats are little-endian.

namespace detail {

template <class U>
void put_le(std::ostream& os, U value) {
    unsigned char buf[sizeof(U)];
    std::memcpy(buf, &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
    os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
    unsigned char buf[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw std::runtime_error("monarch file: truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
    U value;
    std::memcpy(&value, buf, sizeof(U));
    return value;
}

}  // namespace detail

template <Field T>
void save_monarch(std::ostream& os, const MonarchFactorization<T>& M) {
    os.write("MNR1", 4);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(M.N));
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(M.p));
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(field_traits<T>::tag));
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(M.recipe));
    detail::put_le<std::uint16_t>(os, 0);
    for (const auto& f : M.factors)
        for (const auto& blk : f.blocks)
            for (const auto& x : blk.entries) {
                if constexpr (std::is_same_v<T, double>) {
                    detail::put_le<double>(os, x);
                    detail::put_le<double>(os, 0.0);
                } else {
                    detail::put_le<double>(os, x.real());
                    detail::put_le<double>(os, x.imag());
                }
            }
}

template <Field T>
MonarchFactorization<T> load_monarch(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "MNR1", 4) != 0)
        throw std::runtime_error("monarch file: bad magic");
    const auto N = detail::get_le<std::uint32_t>(is);
    const auto p = detail::get_le<std::uint16_t>(is);
    const auto tag = detail::get_le<std::uint16_t>(is);
    const auto recipe = detail::get_le<std::uint16_t>(is);
    detail::get_le<std::uint16_t>(is);
    if (tag != static_cast<std::uint16_t>(field_traits<T>::tag))
        throw std::runtime_error("monarch file: field tag does not match requested scalar type");
    if (recipe > static_cast<std::uint16_t>(Recipe::radix_digit_reversal))
        throw std::runtime_error("monarch file: unknown recipe tag");
    const std::size_t b = exact_root(N, p);
    if (p == 0 || b == 0) throw std::runtime_error("monarch file: N is not a perfect p-th power");
    std::vector<BlockDiagonalMatrix<T>> fs;
    for (std::size_t a = 0; a < p; ++a) {
        BlockDiagonalMatrix<T> B(N / b, b);
        for (auto& blk : B.blocks)
            for (auto& x : blk.entries) {
                const double re = detail::get_le<double>(is);
                const double im = detail::get_le<double>(is);
                if constexpr (std::is_same_v<T, double>) {
                    if (im != 0.0) throw std::runtime_error("monarch file: nonzero imaginary part in real factor");
                    x = re;
                } else {
                    x = {re, im};
                }
            }
        fs.push_back(std::move(B));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("monarch file: trailing bytes");
    return make_monarch<T>(N, p, std::move(fs), static_cast<Recipe>(recipe));
}

}  // namespace monarch

#endif
