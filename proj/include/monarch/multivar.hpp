#ifndef MONARCH_MULTIVAR_HPP
#define MONARCH_MULTIVAR_HPP

#include <map>
#include <optional>

#include "monarch/real_causal.hpp"

namespace monarch {

/// p components, each in [0, b). Component 0 is the most significant digit
/// of the flat index, so lexicographic order equals flat order.
using MultiIndex = std::vector<std::size_t>;

inline std::size_t flatten(const MultiIndex& j, std::size_t b) {
    std::size_t flat = 0;
    for (auto c : j) {
        if (c >= b) throw std::invalid_argument("flatten: component out of range");
        flat = flat * b + c;
    }
    return flat;
}

inline MultiIndex unflatten(std::size_t flat, std::size_t b, std::size_t p) {
    MultiIndex j(p);
    for (std::size_t a = p; a-- > 0;) {
        j[a] = flat % b;
        flat /= b;
    }
    if (flat != 0) throw std::invalid_argument("unflatten: index out of range");
    return j;
}

/// Strict lexicographic order.
inline bool lex_less(const MultiIndex& x, const MultiIndex& y) {
    return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
}

/// (i_{p-1},...,i_0) -> (i_0,...,i_{p-1}) in base b.
inline IndexPermutation subindex_reversal(std::size_t b, std::size_t p) { return IndexPermutation::subindex_reversal(b, p); }

struct MultivarMonarch {
    std::size_t N = 0;
    std::size_t p = 0;
    std::size_t b = 0;
    std::vector<DenseMatrix<double>> coeffs;  // B~_(a), each N x b
    MonarchFactorization<double> M;
    std::optional<MonarchInverse<double>> inverse;
};

/// Block k of factor a is C_b times rows [k b, (k+1) b) of coeffs[a]. Block k
/// of factor a is indexed by (i_0..i_{a-1}, j_{p-1}..j_{a+1}); inside it rows
/// are i_a and columns j_a.
inline MultivarMonarch multivar_build(const std::vector<DenseMatrix<double>>& coeffs) {
    const std::size_t p = coeffs.size();
    if (p == 0) throw std::invalid_argument("multivar_build: need at least one coefficient matrix");
    const std::size_t b = coeffs[0].cols;
    const std::size_t N = coeffs[0].rows;
    if (b == 0 || ipow(b, p) != N) throw std::invalid_argument("multivar_build: need N = b^p");
    for (const auto& B : coeffs)
        if (B.rows != N || B.cols != b) throw std::invalid_argument("multivar_build: every coefficient matrix must be N x b");
    const auto Cb = chebyshev_transform_build(b);
    std::vector<BlockDiagonalMatrix<double>> fs;
    for (const auto& B : coeffs) {
        BlockDiagonalMatrix<double> F(N / b, b);
        for (std::size_t k = 0; k < N / b; ++k)
            for (std::size_t r = 0; r < b; ++r)
                for (std::size_t m = 0; m < b; ++m) {
                    const double c = Cb.C(r, m);
                    for (std::size_t j = 0; j < b; ++j) F.blocks[k](r, j) += c * B(k * b + m, j);
                }
        fs.push_back(std::move(F));
    }
    MultivarMonarch mv;
    mv.N = N;
    mv.p = p;
    mv.b = b;
    mv.coeffs = coeffs;
    mv.M = make_monarch<double>(N, p, std::move(fs), Recipe::multivar_subindex_reversal);
    try {
        mv.inverse = prepare_inverse(mv.M);
    } catch (const singular_factor&) {
        mv.inverse.reset();
    }
    return mv;
}

/// Causal variant: axis a uses one b x b coefficient matrix for every block,
/// column j holding the Chebyshev coefficients of a polynomial of degree
/// exactly b - j - 1.
inline MultivarMonarch causal_multivar_build(const std::vector<DenseMatrix<double>>& axis_coeffs) {
    const std::size_t p = axis_coeffs.size();
    if (p == 0) throw std::invalid_argument("causal_multivar_build: need at least one axis");
    const std::size_t b = axis_coeffs[0].rows;
    const std::size_t N = ipow(b, p);
    std::vector<DenseMatrix<double>> stacked;
    for (const auto& A : axis_coeffs) {
        if (A.rows != b || A.cols != b) throw std::invalid_argument("causal_multivar_build: axis coefficients must be b x b");
        DenseMatrix<double> B(N, b);
        for (std::size_t k = 0; k < N / b; ++k)
            for (std::size_t m = 0; m < b; ++m)
                for (std::size_t j = 0; j < b; ++j) B(k * b + m, j) = A(m, j);
        stacked.push_back(std::move(B));
    }
    return multivar_build(stacked);
}

/// Throws mask_violation unless every factor uses identical blocks whose
/// column j has degree exactly b - j - 1.
inline void check_multivar_degrees(const MultivarMonarch& mv) {
    const std::size_t b = mv.b;
    for (std::size_t a = 0; a < mv.p; ++a) {
        const auto& B = mv.coeffs[a];
        for (std::size_t k = 0; k < mv.N / b; ++k)
            for (std::size_t m = 0; m < b; ++m)
                for (std::size_t j = 0; j < b; ++j) {
                    const std::string at = "factor " + std::to_string(a) + " block " + std::to_string(k) + " [" +
                                           std::to_string(m) + "," + std::to_string(j) + "]";
                    const double x = B(k * b + m, j);
                    if (x != B(m, j)) throw mask_violation(at + " differs from block 0");
                    if (m + j + 1 > b && x != 0.0) throw mask_violation(at + " exceeds degree " + std::to_string(b - j - 1));
                    if (m + j + 1 == b && x == 0.0) throw mask_violation(at + " leading coefficient must be nonzero");
                }
    }
}

inline std::vector<double> multivar_matvec(const MultivarMonarch& mv, const std::vector<double>& v, FlopCounter* counter = nullptr) {
    if (v.size() != mv.N) throw std::invalid_argument("multivar_matvec: dimension mismatch");
    return monarch_matvec(mv.M, v, counter);
}

inline DenseMatrix<double> multivar_materialize(const MultivarMonarch& mv) { return monarch_materialize(mv.M); }

/// Input entry at multi-index j (every j_a < floor(b/2)) moves to
/// (j_0 + ceil(b/2), ..., j_{p-1} + ceil(b/2)); everything else is zero.
inline std::vector<double> pad_multivar(const std::map<MultiIndex, double>& k, std::size_t b, std::size_t p) {
    const std::size_t h = b / 2, shift = (b + 1) / 2;
    std::vector<double> out(ipow(b, p), 0.0);
    for (const auto& [j, x] : k) {
        if (j.size() != p) throw std::invalid_argument("pad_multivar: multi-index has the wrong number of components");
        MultiIndex t(p);
        for (std::size_t a = 0; a < p; ++a) {
            if (j[a] >= h) throw std::invalid_argument("pad_multivar: component " + std::to_string(a) + " out of range");
            t[a] = j[a] + shift;
        }
        out[flatten(t, b)] = x;
    }
    return out;
}

/// Dense form: k[flatten(j, floor(b/2))] for j in [0, floor(b/2))^p.
inline std::vector<double> pad_multivar(const std::vector<double>& k, std::size_t b, std::size_t p) {
    const std::size_t h = b / 2;
    if (k.size() != ipow(h, p)) throw std::invalid_argument("pad_multivar: input length must be floor(b/2)^p");
    std::map<MultiIndex, double> entries;
    for (std::size_t f = 0; f < k.size(); ++f) entries.emplace(unflatten(f, h, p), k[f]);
    return pad_multivar(entries, b, p);
}

/// M^{-1}((M Pad(k)) .* (M Pad(u))) read back on the grid [0, floor(b/2))^p,
/// flattened with base floor(b/2).
inline std::vector<double> multivar_causal_conv(const MultivarMonarch& mv, const std::vector<double>& k,
                                                const std::vector<double>& u) {
    check_multivar_degrees(mv);
    if (!mv.inverse) throw singular_system("multivar_causal_conv: operator is not invertible");
    const std::size_t h = mv.b / 2;
    if (h == 0) throw std::invalid_argument("multivar_causal_conv: b must be at least 2");
    const std::size_t n = ipow(h, mv.p);
    if (k.size() != n || u.size() != n) throw std::invalid_argument("multivar_causal_conv: signals must have length floor(b/2)^p");
    auto fk = monarch_matvec(mv.M, pad_multivar(k, mv.b, mv.p));
    auto fu = monarch_matvec(mv.M, pad_multivar(u, mv.b, mv.p));
    for (std::size_t i = 0; i < mv.N; ++i) fk[i] *= fu[i];
    auto full = monarch_inverse_matvec(*mv.inverse, fk);
    std::vector<double> out(n);
    for (std::size_t f = 0; f < n; ++f) out[f] = full[flatten(unflatten(f, h, mv.p), mv.b)];
    return out;
}

}  // namespace monarch

#endif
