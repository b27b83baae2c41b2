#ifndef MONARCH_FIELD_CORE_HPP
#define MONARCH_FIELD_CORE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace monarch {

using cplx = std::complex<double>;

/// A length-n vector over the scalar field T (double or cplx).
template <class T>
using Signal = std::vector<T>;

enum class FieldTag : std::uint16_t { real = 0, complex = 1 };

template <class T>
struct field_traits;

template <>
struct field_traits<double> {
    static constexpr FieldTag tag = FieldTag::real;
    static constexpr const char* name = "real";
};

template <>
struct field_traits<cplx> {
    static constexpr FieldTag tag = FieldTag::complex;
    static constexpr const char* name = "complex";
};

template <class T>
concept Field = std::is_same_v<T, double> || std::is_same_v<T, cplx>;

// ---------------------------------------------------------------------------
// Errors

class monarch_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A block of a factor is singular or too ill-conditioned to invert.
class singular_factor : public monarch_error {
  public:
    singular_factor(std::size_t factor, std::size_t block, const std::string& why)
        : monarch_error("singular factor " + std::to_string(factor) + ", block " + std::to_string(block) +
                        ": " + why),
          factor_index(factor), block_index(block) {}
    std::size_t factor_index;
    std::size_t block_index;
};

/// A dense system handed to a solver is singular.
class singular_system : public monarch_error {
  public:
    using monarch_error::monarch_error;
};

/// Coefficients break the zero pattern required for causality.
class mask_violation : public monarch_error {
  public:
    using monarch_error::monarch_error;
};

/// A request exceeds a test-scale size guard.
class resource_limit : public monarch_error {
  public:
    using monarch_error::monarch_error;
};

// ---------------------------------------------------------------------------
// Scalars

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const cplx& x) { return std::abs(x); }

inline double real_part(double x) { return x; }
inline double real_part(const cplx& x) { return x.real(); }

inline double conj_of(double x) { return x; }
inline cplx conj_of(const cplx& x) { return std::conj(x); }

/// omega_N^k with omega_N = exp(2 pi i / N). The exponent is reduced mod N
/// before evaluating so large k keep full accuracy.
inline cplx omega(std::size_t N, long long k) {
    if (N == 0) throw std::invalid_argument("omega: N must be positive");
    long long r = k % static_cast<long long>(N);
    if (r < 0) r += static_cast<long long>(N);
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(N);
    return {std::cos(theta), std::sin(theta)};
}

/// Integer square root when N is a perfect square, otherwise 0.
inline std::size_t exact_sqrt(std::size_t N) {
    auto s = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(N))));
    while (s * s > N) --s;
    while ((s + 1) * (s + 1) <= N) ++s;
    return s * s == N ? s : 0;
}

/// Integer b with b^p == N, or 0 when no such integer exists.
inline std::size_t exact_root(std::size_t N, std::size_t p) {
    if (N == 0 || p == 0) return 0;
    if (p == 1) return N;
    auto b = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(N), 1.0 / static_cast<double>(p))));
    for (std::size_t c = (b > 1 ? b - 1 : 1); c <= b + 1; ++c) {
        std::size_t acc = 1;
        for (std::size_t a = 0; a < p && acc <= N; ++a) acc *= c;
        if (acc == N) return c;
    }
    return 0;
}

inline std::size_t ipow(std::size_t b, std::size_t p) {
    std::size_t acc = 1;
    for (std::size_t a = 0; a < p; ++a) acc *= b;
    return acc;
}

// ---------------------------------------------------------------------------
// Dense matrices (row-major)

template <Field T>
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> entries;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), entries(r * c, T{}) {}

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix I(n, n);
        for (std::size_t i = 0; i < n; ++i) I(i, i) = T{1};
        return I;
    }

    T& operator()(std::size_t i, std::size_t j) { return entries[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }

    std::vector<T> column(std::size_t j) const {
        std::vector<T> c(rows);
        for (std::size_t i = 0; i < rows; ++i) c[i] = (*this)(i, j);
        return c;
    }

    DenseMatrix transpose() const {
        DenseMatrix t(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }
};

template <Field T>
std::vector<T> dense_matvec(const DenseMatrix<T>& A, const std::vector<T>& v) {
    if (v.size() != A.cols) throw std::invalid_argument("dense_matvec: length mismatch");
    std::vector<T> out(A.rows, T{});
    for (std::size_t i = 0; i < A.rows; ++i) {
        T acc{};
        const T* row = &A.entries[i * A.cols];
        for (std::size_t j = 0; j < A.cols; ++j) acc += row[j] * v[j];
        out[i] = acc;
    }
    return out;
}

template <Field T>
DenseMatrix<T> dense_matmul(const DenseMatrix<T>& A, const DenseMatrix<T>& B) {
    if (A.cols != B.rows) throw std::invalid_argument("dense_matmul: inner dimension mismatch");
    DenseMatrix<T> C(A.rows, B.cols);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t k = 0; k < A.cols; ++k) {
            const T a = A(i, k);
            if (a == T{}) continue;
            for (std::size_t j = 0; j < B.cols; ++j) C(i, j) += a * B(k, j);
        }
    return C;
}

/// Largest entrywise |A - B|.
template <Field T>
double max_abs_diff(const DenseMatrix<T>& A, const DenseMatrix<T>& B) {
    if (A.rows != B.rows || A.cols != B.cols) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < A.entries.size(); ++k) m = std::max(m, magnitude(A.entries[k] - B.entries[k]));
    return m;
}

template <Field T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: length mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, magnitude(a[k] - b[k]));
    return m;
}

template <Field T>
double max_abs(const std::vector<T>& a) {
    double m = 0.0;
    for (const auto& x : a) m = std::max(m, magnitude(x));
    return m;
}

// ---------------------------------------------------------------------------
// LU with partial pivoting

template <Field T>
class LUDecomposition {
  public:
    LUDecomposition() = default;

    /// Factors a square matrix. Throws singular_system when a pivot vanishes
    /// or when the 1-norm condition estimate exceeds max_condition.
    explicit LUDecomposition(const DenseMatrix<T>& A, double max_condition = 1e13) : n_(A.rows), lu_(A), piv_(A.rows) {
        if (A.rows != A.cols) throw std::invalid_argument("LU: matrix must be square");
        double anorm = one_norm(A);
        for (std::size_t i = 0; i < n_; ++i) piv_[i] = i;
        for (std::size_t k = 0; k < n_; ++k) {
            std::size_t p = k;
            double best = magnitude(lu_(k, k));
            for (std::size_t i = k + 1; i < n_; ++i) {
                double m = magnitude(lu_(i, k));
                if (m > best) {
                    best = m;
                    p = i;
                }
            }
            if (best == 0.0 || !std::isfinite(best)) throw singular_system("zero pivot in column " + std::to_string(k));
            if (p != k) {
                for (std::size_t j = 0; j < n_; ++j) std::swap(lu_(k, j), lu_(p, j));
                std::swap(piv_[k], piv_[p]);
            }
            const T d = lu_(k, k);
            for (std::size_t i = k + 1; i < n_; ++i) {
                const T f = lu_(i, k) / d;
                lu_(i, k) = f;
                if (f == T{}) continue;
                for (std::size_t j = k + 1; j < n_; ++j) lu_(i, j) -= f * lu_(k, j);
            }
        }
        inverse_ = compute_inverse();
        condition_ = anorm * one_norm(inverse_);
        if (!std::isfinite(condition_) || condition_ > max_condition)
            throw singular_system("condition estimate " + std::to_string(condition_) + " exceeds limit");
    }

    std::size_t size() const { return n_; }
    double condition() const { return condition_; }
    const DenseMatrix<T>& inverse() const { return inverse_; }

    std::vector<T> solve(const std::vector<T>& y) const {
        if (y.size() != n_) throw std::invalid_argument("LU solve: length mismatch");
        std::vector<T> x(n_);
        for (std::size_t i = 0; i < n_; ++i) x[i] = y[piv_[i]];
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
        for (std::size_t ii = n_; ii-- > 0;) {
            for (std::size_t j = ii + 1; j < n_; ++j) x[ii] -= lu_(ii, j) * x[j];
            x[ii] /= lu_(ii, ii);
        }
        return x;
    }

  private:
    static double one_norm(const DenseMatrix<T>& A) {
        double best = 0.0;
        for (std::size_t j = 0; j < A.cols; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < A.rows; ++i) s += magnitude(A(i, j));
            best = std::max(best, s);
        }
        return best;
    }

    DenseMatrix<T> compute_inverse() const {
        DenseMatrix<T> inv(n_, n_);
        std::vector<T> e(n_, T{});
        for (std::size_t j = 0; j < n_; ++j) {
            std::fill(e.begin(), e.end(), T{});
            e[j] = T{1};
            auto col = solve(e);
            for (std::size_t i = 0; i < n_; ++i) inv(i, j) = col[i];
        }
        return inv;
    }

    std::size_t n_ = 0;
    DenseMatrix<T> lu_;
    std::vector<std::size_t> piv_;
    DenseMatrix<T> inverse_;
    double condition_ = 0.0;
};

// ---------------------------------------------------------------------------
// Permutations

/// Explicit permutation of [0, N): source index i lands at map[i].
class IndexPermutation {
  public:
    IndexPermutation() = default;

    explicit IndexPermutation(std::vector<std::size_t> map) : map_(std::move(map)) {
        std::vector<char> seen(map_.size(), 0);
        for (auto m : map_) {
            if (m >= map_.size() || seen[m]) throw std::invalid_argument("IndexPermutation: map is not a bijection");
            seen[m] = 1;
        }
    }

    static IndexPermutation identity(std::size_t N) {
        std::vector<std::size_t> m(N);
        for (std::size_t i = 0; i < N; ++i) m[i] = i;
        return IndexPermutation(std::move(m));
    }

    /// sigma(b,N)(i) = i0*(N/b) + i1 where i = i1*b + i0.
    static IndexPermutation sigma(std::size_t b, std::size_t N) { return block_sigma(b, N, N); }

    /// sigma(b,c) applied independently inside each length-c segment of [0,N).
    static IndexPermutation block_sigma(std::size_t b, std::size_t c, std::size_t N) {
        if (b == 0 || c == 0 || c % b != 0) throw std::invalid_argument("sigma: b must divide the segment size");
        if (N % c != 0) throw std::invalid_argument("sigma: segment size must divide N");
        std::vector<std::size_t> m(N);
        const std::size_t stride = c / b;
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t base = (i / c) * c;
            const std::size_t local = i % c;
            m[i] = base + (local % b) * stride + local / b;
        }
        return IndexPermutation(std::move(m));
    }

    /// Base-b digit reversal on [0, b^p): (d_0,...,d_{p-1}) -> (d_{p-1},...,d_0),
    /// digits written most significant first.
    static IndexPermutation subindex_reversal(std::size_t b, std::size_t p) {
        if (b == 0) throw std::invalid_argument("subindex_reversal: b must be positive");
        const std::size_t N = ipow(b, p);
        std::vector<std::size_t> m(N);
        for (std::size_t i = 0; i < N; ++i) {
            std::size_t x = i, r = 0;
            for (std::size_t a = 0; a < p; ++a) {
                r = r * b + x % b;
                x /= b;
            }
            m[i] = r;
        }
        return IndexPermutation(std::move(m));
    }

    std::size_t size() const { return map_.size(); }
    const std::vector<std::size_t>& map() const { return map_; }
    std::size_t operator[](std::size_t i) const { return map_[i]; }

    IndexPermutation inverse() const {
        std::vector<std::size_t> inv(map_.size());
        for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = i;
        return IndexPermutation(std::move(inv));
    }

    /// The permutation that applies *this first, then next.
    IndexPermutation then(const IndexPermutation& next) const {
        if (next.size() != size()) throw std::invalid_argument("IndexPermutation::then: size mismatch");
        std::vector<std::size_t> m(map_.size());
        for (std::size_t i = 0; i < map_.size(); ++i) m[i] = next.map_[map_[i]];
        return IndexPermutation(std::move(m));
    }

    bool is_identity() const {
        for (std::size_t i = 0; i < map_.size(); ++i)
            if (map_[i] != i) return false;
        return true;
    }

    friend bool operator==(const IndexPermutation&, const IndexPermutation&) = default;

  private:
    std::vector<std::size_t> map_;
};

inline IndexPermutation permutation_sigma(std::size_t b, std::size_t N) {
    if (b == 0 || N % b != 0) throw std::invalid_argument("permutation_sigma: b must divide N");
    return IndexPermutation::sigma(b, N);
}

/// out[p.map[i]] = v[i]
template <class T>
std::vector<T> apply_permutation(const IndexPermutation& p, const std::vector<T>& v) {
    if (v.size() != p.size()) throw std::invalid_argument("apply_permutation: length mismatch");
    std::vector<T> out(v.size());
    const auto& m = p.map();
    for (std::size_t i = 0; i < v.size(); ++i) out[m[i]] = v[i];
    return out;
}

/// Dense form with out = P v, i.e. P[map[i], i] = 1.
template <Field T>
DenseMatrix<T> permutation_matrix(const IndexPermutation& p) {
    DenseMatrix<T> P(p.size(), p.size());
    for (std::size_t i = 0; i < p.size(); ++i) P(p[i], i) = T{1};
    return P;
}

// ---------------------------------------------------------------------------
// Threading knob for block-level parallelism

inline unsigned& thread_setting() {
    static unsigned n = 1;
    return n;
}

/// Number of worker threads block_diag_matvec may use. Results do not depend
/// on this value because blocks are independent.
inline void set_num_threads(unsigned n) { thread_setting() = n == 0 ? 1 : n; }
inline unsigned num_threads() { return thread_setting(); }

/// Counts multiply-accumulates issued by the fast paths. Pass a pointer to
/// collect counts; null disables counting.
struct FlopCounter {
    std::uint64_t block_macs = 0;
    std::uint64_t pointwise_muls = 0;

    /// Real FLOPs under the complex cost model: a MAC is 8, a product is 6.
    std::uint64_t real_flops() const { return 8 * block_macs + 6 * pointwise_muls; }
};

// ---------------------------------------------------------------------------
// Block-diagonal matrices

template <Field T>
struct BlockDiagonalMatrix {
    std::size_t num_blocks = 0;
    std::size_t block_size = 0;
    std::vector<DenseMatrix<T>> blocks;

    BlockDiagonalMatrix() = default;
    BlockDiagonalMatrix(std::size_t nb, std::size_t b) : num_blocks(nb), block_size(b), blocks(nb, DenseMatrix<T>(b, b)) {}

    explicit BlockDiagonalMatrix(std::vector<DenseMatrix<T>> bs) : num_blocks(bs.size()), blocks(std::move(bs)) {
        block_size = blocks.empty() ? 0 : blocks.front().rows;
        for (const auto& B : blocks)
            if (B.rows != block_size || B.cols != block_size)
                throw std::invalid_argument("BlockDiagonalMatrix: blocks must all be b x b");
    }

    static BlockDiagonalMatrix identity(std::size_t nb, std::size_t b) {
        return BlockDiagonalMatrix(std::vector<DenseMatrix<T>>(nb, DenseMatrix<T>::identity(b)));
    }

    std::size_t size() const { return num_blocks * block_size; }
};

template <Field T>
std::vector<T> block_diag_matvec(const BlockDiagonalMatrix<T>& B, const std::vector<T>& v, FlopCounter* counter = nullptr) {
    const std::size_t b = B.block_size;
    if (v.size() != B.num_blocks * b) throw std::invalid_argument("block_diag_matvec: dimension mismatch");
    std::vector<T> out(v.size(), T{});
    auto run = [&](std::size_t k0, std::size_t k1) {
        for (std::size_t k = k0; k < k1; ++k) {
            const T* blk = B.blocks[k].entries.data();
            const T* x = v.data() + k * b;
            T* y = out.data() + k * b;
            for (std::size_t r = 0; r < b; ++r) {
                T acc{};
                const T* row = blk + r * b;
                for (std::size_t c = 0; c < b; ++c) acc += row[c] * x[c];
                y[r] = acc;
            }
        }
    };
    const unsigned nt = std::min<std::size_t>(num_threads(), B.num_blocks);
    if (nt > 1 && v.size() >= 4096) {
        std::vector<std::thread> pool;
        const std::size_t chunk = (B.num_blocks + nt - 1) / nt;
        for (unsigned t = 0; t < nt; ++t) {
            std::size_t k0 = t * chunk, k1 = std::min(B.num_blocks, k0 + chunk);
            if (k0 < k1) pool.emplace_back(run, k0, k1);
        }
        for (auto& th : pool) th.join();
    } else {
        run(0, B.num_blocks);
    }
    if (counter) counter->block_macs += static_cast<std::uint64_t>(B.num_blocks) * b * b;
    return out;
}

template <Field T>
DenseMatrix<T> materialize_blockdiag(const BlockDiagonalMatrix<T>& B) {
    const std::size_t b = B.block_size;
    DenseMatrix<T> D(B.size(), B.size());
    for (std::size_t k = 0; k < B.num_blocks; ++k)
        for (std::size_t r = 0; r < b; ++r)
            for (std::size_t c = 0; c < b; ++c) D(k * b + r, k * b + c) = B.blocks[k](r, c);
    return D;
}

}  // namespace monarch

#endif
