#ifndef MONARCH_M2_LAYER_HPP
#define MONARCH_M2_LAYER_HPP

#include <optional>

#include "monarch/causal_conv.hpp"

namespace monarch {

/// Row t is token t, column c is channel c.
using ActivationTensor = DenseMatrix<cplx>;

enum class Nonlinearity { none, relu, gelu };

inline std::string to_string(Nonlinearity s) {
    switch (s) {
        case Nonlinearity::none: return "none";
        case Nonlinearity::relu: return "relu";
        case Nonlinearity::gelu: return "gelu";
    }
    return "none";
}

inline Nonlinearity parse_nonlinearity(const std::string& name) {
    if (name == "none") return Nonlinearity::none;
    if (name == "relu") return Nonlinearity::relu;
    if (name == "gelu") return Nonlinearity::gelu;
    throw std::invalid_argument("unknown nonlinearity '" + name + "'");
}

struct M2LayerConfig {
    std::size_t N = 0;  // tokens
    std::size_t d = 0;  // channels
    MonarchFactorization<cplx> M1, M2;
    std::optional<CausalMonarchOperator> causal_op;  // replaces M1 and M2 when causal
    MonarchFactorization<cplx> M3, M4;               // d x d
    DenseMatrix<cplx> K1;                            // spectrum_length x d
    Nonlinearity sigma = Nonlinearity::none;
    bool gated = false;
    bool causal = false;
    std::optional<DenseMatrix<cplx>> Wq, Wk, Wv;     // d x d, used when gated
    double layernorm_eps = 1e-5;
};

/// Rows of K1: N for the plain mixer, the padded operator size when causal.
inline std::size_t spectrum_length(const M2LayerConfig& cfg) {
    return cfg.causal && cfg.causal_op ? cfg.causal_op->N : cfg.N;
}

inline void validate(const M2LayerConfig& cfg) {
    if (cfg.N == 0 || cfg.d == 0) throw std::invalid_argument("m2 layer: N and d must be positive");
    if (cfg.causal) {
        if (!cfg.causal_op) throw std::invalid_argument("m2 layer: causal flag requires a causal convolution operator");
        if (cfg.causal_op->n != cfg.N) throw std::invalid_argument("m2 layer: causal operator was built for a different length");
    } else {
        if (cfg.M1.N != cfg.N || cfg.M2.N != cfg.N) throw std::invalid_argument("m2 layer: M1 and M2 must be N x N");
    }
    if (cfg.M3.N != cfg.d || cfg.M4.N != cfg.d) throw std::invalid_argument("m2 layer: M3 and M4 must be d x d");
    if (cfg.K1.rows != spectrum_length(cfg) || cfg.K1.cols != cfg.d)
        throw std::invalid_argument("m2 layer: K1 has shape " + std::to_string(cfg.K1.rows) + "x" + std::to_string(cfg.K1.cols) +
                                    ", expected " + std::to_string(spectrum_length(cfg)) + "x" + std::to_string(cfg.d));
}

namespace detail {

inline void check_shape(const M2LayerConfig& cfg, const ActivationTensor& X, const char* who) {
    if (X.rows != cfg.N || X.cols != cfg.d)
        throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(cfg.N) + "x" + std::to_string(cfg.d) +
                                    " activations, got " + std::to_string(X.rows) + "x" + std::to_string(X.cols));
}

inline double apply_sigma(Nonlinearity s, double x) {
    switch (s) {
        case Nonlinearity::relu: return x > 0.0 ? x : 0.0;
        case Nonlinearity::gelu: return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
        case Nonlinearity::none: break;
    }
    return x;
}

/// Real and imaginary parts pass through sigma independently.
inline cplx apply_sigma(Nonlinearity s, cplx z) { return {apply_sigma(s, z.real()), apply_sigma(s, z.imag())}; }

inline ActivationTensor project(const ActivationTensor& X, const DenseMatrix<cplx>& W, FlopCounter* counter) {
    if (W.rows != X.cols || W.cols != X.cols) throw std::invalid_argument("projection must be d x d");
    if (counter) counter->block_macs += static_cast<std::uint64_t>(X.rows) * X.cols * X.cols;
    return dense_matmul(X, W);
}

}  // namespace detail

/// Per channel: M2 (K1[:,c] .* M1 x_c). In causal mode the channel is padded
/// to the operator size, M1 = M and M2 = M^{-1}, and the first N entries are kept.
inline ActivationTensor sequence_mix(const M2LayerConfig& cfg, const ActivationTensor& X, FlopCounter* counter = nullptr) {
    validate(cfg);
    detail::check_shape(cfg, X, "sequence_mix");
    const std::size_t L = spectrum_length(cfg);
    ActivationTensor out(cfg.N, cfg.d);
    for (std::size_t c = 0; c < cfg.d; ++c) {
        std::vector<cplx> x(L, cplx{});
        for (std::size_t t = 0; t < cfg.N; ++t) x[t] = X(t, c);
        auto f = cfg.causal ? monarch_matvec(cfg.causal_op->M, x, counter) : monarch_matvec(cfg.M1, x, counter);
        for (std::size_t i = 0; i < L; ++i) f[i] *= cfg.K1(i, c);
        if (counter) counter->pointwise_muls += L;
        auto y = cfg.causal ? monarch_inverse_matvec(cfg.causal_op->M_inv, f, counter) : monarch_matvec(cfg.M2, f, counter);
        for (std::size_t t = 0; t < cfg.N; ++t) out(t, c) = y[t];
    }
    return out;
}

/// V .* sequence_mix(Q .* K) with Q = X Wq, K = X Wk, V = X Wv.
inline ActivationTensor gated_sequence_mix(const M2LayerConfig& cfg, const ActivationTensor& X, FlopCounter* counter = nullptr) {
    if (!cfg.Wq || !cfg.Wk || !cfg.Wv) throw std::invalid_argument("gated_sequence_mix: Q, K and V projections must all be set");
    detail::check_shape(cfg, X, "gated_sequence_mix");
    const auto Q = detail::project(X, *cfg.Wq, counter);
    const auto K = detail::project(X, *cfg.Wk, counter);
    const auto V = detail::project(X, *cfg.Wv, counter);
    ActivationTensor QK(cfg.N, cfg.d);
    for (std::size_t i = 0; i < QK.entries.size(); ++i) QK.entries[i] = Q.entries[i] * K.entries[i];
    auto out = sequence_mix(cfg, QK, counter);
    for (std::size_t i = 0; i < out.entries.size(); ++i) out.entries[i] *= V.entries[i];
    if (counter) counter->pointwise_muls += 2 * static_cast<std::uint64_t>(cfg.N) * cfg.d;
    return out;
}

/// Row t of the result is M4 sigma(M3 x_t).
inline ActivationTensor dimension_mix(const M2LayerConfig& cfg, const ActivationTensor& Xt, FlopCounter* counter = nullptr) {
    if (cfg.M3.N != cfg.d || cfg.M4.N != cfg.d) throw std::invalid_argument("dimension_mix: M3 and M4 must be d x d");
    detail::check_shape(cfg, Xt, "dimension_mix");
    ActivationTensor out(cfg.N, cfg.d);
    std::vector<cplx> row(cfg.d);
    for (std::size_t t = 0; t < cfg.N; ++t) {
        for (std::size_t c = 0; c < cfg.d; ++c) row[c] = Xt(t, c);
        auto h = monarch_matvec(cfg.M3, row, counter);
        for (auto& z : h) z = detail::apply_sigma(cfg.sigma, z);
        auto y = monarch_matvec(cfg.M4, h, counter);
        for (std::size_t c = 0; c < cfg.d; ++c) out(t, c) = y[c];
    }
    return out;
}

/// Normalizes each row over channels: mean zero, mean |x - mu|^2 one.
/// A row with zero spread comes out as zeros.
inline ActivationTensor layernorm_rows(const ActivationTensor& X, double eps) {
    ActivationTensor out(X.rows, X.cols);
    const double d = static_cast<double>(X.cols);
    for (std::size_t t = 0; t < X.rows; ++t) {
        cplx mu{};
        for (std::size_t c = 0; c < X.cols; ++c) mu += X(t, c);
        mu /= d;
        double var = 0.0;
        for (std::size_t c = 0; c < X.cols; ++c) var += std::norm(X(t, c) - mu);
        var /= d;
        const double denom = std::sqrt(var + eps);
        for (std::size_t c = 0; c < X.cols; ++c) out(t, c) = var == 0.0 ? cplx{} : (X(t, c) - mu) / denom;
    }
    return out;
}

inline ActivationTensor m2_layer_forward(const M2LayerConfig& cfg, const ActivationTensor& X, FlopCounter* counter = nullptr) {
    validate(cfg);
    const auto Xt = cfg.gated ? gated_sequence_mix(cfg, X, counter) : sequence_mix(cfg, X, counter);
    auto Y = dimension_mix(cfg, Xt, counter);
    for (std::size_t i = 0; i < Y.entries.size(); ++i) Y.entries[i] += Xt.entries[i];
    return layernorm_rows(Y, cfg.layernorm_eps);
}

/// Closed-form count of what m2_layer_forward reports through a FlopCounter.
/// Layernorm, the nonlinearity and the residual add are not counted.
inline FlopCounter layer_flop_count(const M2LayerConfig& cfg) {
    validate(cfg);
    auto macs = [](const MonarchFactorization<cplx>& M) {
        return static_cast<std::uint64_t>(M.p) * (M.N / M.b) * M.b * M.b;
    };
    FlopCounter fc;
    const std::uint64_t N = cfg.N, d = cfg.d;
    const std::uint64_t L = spectrum_length(cfg);
    const std::uint64_t seq = cfg.causal ? 2 * macs(cfg.causal_op->M) : macs(cfg.M1) + macs(cfg.M2);
    fc.block_macs += d * seq;
    fc.pointwise_muls += d * L;
    if (cfg.gated) {
        fc.block_macs += 3 * N * d * d;
        fc.pointwise_muls += 2 * N * d;
    }
    fc.block_macs += N * (macs(cfg.M3) + macs(cfg.M4));
    return fc;
}

// ---------------------------------------------------------------------------
// Kernel helpers

/// Frequency-space K1 for the DFT mixer from time-domain kernels (N x d).
inline DenseMatrix<cplx> kernel_spectrum_dft(const DenseMatrix<cplx>& k) {
    const auto F = monarch_dft(k.rows);
    DenseMatrix<cplx> out(k.rows, k.cols);
    for (std::size_t c = 0; c < k.cols; ++c) {
        auto f = monarch_matvec(F, k.column(c));
        for (std::size_t i = 0; i < k.rows; ++i) out(i, c) = f[i];
    }
    return out;
}

/// Frequency-space K1 for a causal operator from time-domain kernels (n x d):
/// each column is zero-padded to the operator size and multiplied by M.
inline DenseMatrix<cplx> kernel_spectrum_causal(const CausalMonarchOperator& op, const DenseMatrix<cplx>& k) {
    if (k.rows != op.n) throw std::invalid_argument("kernel_spectrum_causal: kernel length must equal n");
    DenseMatrix<cplx> out(op.N, k.cols);
    for (std::size_t c = 0; c < k.cols; ++c) {
        std::vector<cplx> x(op.N, cplx{});
        for (std::size_t t = 0; t < op.n; ++t) x[t] = k(t, c);
        auto f = monarch_matvec(op.M, x);
        for (std::size_t i = 0; i < op.N; ++i) out(i, c) = f[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Seeded construction

struct LayerSpec {
    std::size_t N = 16;
    std::size_t d = 16;
    Nonlinearity sigma = Nonlinearity::relu;
    bool gated = false;
    bool causal = false;
    std::uint64_t seed = 0;
};

inline DenseMatrix<cplx> random_dense(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
    DenseMatrix<cplx> A(rows, cols);
    for (auto& x : A.entries) x = scale * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    return A;
}

/// Order-2 when the size is a perfect square, otherwise a single dense block.
inline MonarchFactorization<cplx> seeded_square_monarch(std::size_t n, std::uint64_t seed) {
    if (exact_sqrt(n) != 0) return random_monarch<cplx>(n, 2, seed);
    return random_monarch<cplx>(n, 1, seed, Recipe::multivar_subindex_reversal);
}

/// Deterministic weights from the seed. The plain mixer uses the DFT pair;
/// the causal mixer uses masked random coefficients. Kernels are real in
/// time, scaled by 1/N.
inline M2LayerConfig make_layer(const LayerSpec& spec) {
    M2LayerConfig cfg;
    cfg.N = spec.N;
    cfg.d = spec.d;
    cfg.sigma = spec.sigma;
    cfg.gated = spec.gated;
    cfg.causal = spec.causal;
    std::mt19937_64 rng(spec.seed);
    auto k = random_dense(spec.N, spec.d, rng, 1.0 / static_cast<double>(spec.N));
    if (spec.causal) {
        cfg.causal_op = build_causal_operator(spec.N, mask_random_coefficients(spec.N, spec.seed + 1));
        cfg.K1 = kernel_spectrum_causal(*cfg.causal_op, k);
    } else {
        cfg.M1 = monarch_dft(spec.N);
        cfg.M2 = monarch_idft(spec.N);
        cfg.K1 = kernel_spectrum_dft(k);
    }
    cfg.M3 = seeded_square_monarch(spec.d, spec.seed + 2);
    cfg.M4 = seeded_square_monarch(spec.d, spec.seed + 3);
    if (spec.gated) {
        const double w = 1.0 / std::sqrt(static_cast<double>(spec.d));
        cfg.Wq = random_dense(spec.d, spec.d, rng, w);
        cfg.Wk = random_dense(spec.d, spec.d, rng, w);
        cfg.Wv = random_dense(spec.d, spec.d, rng, w);
    }
    validate(cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// Heads variant

struct M2HeadsConfig {
    std::size_t N = 0;   // tokens
    std::size_t d = 0;   // channels
    std::size_t d_h = 1; // head dimension
    DenseMatrix<cplx> Wx1, Wx2, Wv, Wo;  // d x d
    CausalMonarchOperator op;            // built for n = N
    DenseMatrix<cplx> K_short1, K_short2, K_short3;  // N x d, time domain
    DenseMatrix<cplx> K_long;            // N x H, one kernel per head
};

namespace detail {

inline ActivationTensor short_conv(const CausalMonarchOperator& op, const ActivationTensor& X, const DenseMatrix<cplx>& K) {
    if (K.rows != X.rows || K.cols != X.cols) throw std::invalid_argument("m2_heads_forward: short kernel must be N x d");
    ActivationTensor out(X.rows, X.cols);
    for (std::size_t c = 0; c < X.cols; ++c) {
        auto y = causal_conv(op, K.column(c), X.column(c));
        for (std::size_t t = 0; t < X.rows; ++t) out(t, c) = y[t];
    }
    return out;
}

}  // namespace detail

/// Projections, short causal convolutions, then per head a long causal
/// convolution of the token-wise outer product X2 V^T, contracted with X1,
/// concatenated and projected by Wo.
inline ActivationTensor m2_heads_forward(const M2HeadsConfig& cfg, const ActivationTensor& u) {
    if (cfg.d_h == 0 || cfg.d % cfg.d_h != 0)
        throw std::invalid_argument("m2_heads_forward: head dimension " + std::to_string(cfg.d_h) + " does not divide d = " +
                                    std::to_string(cfg.d));
    if (u.rows != cfg.N || u.cols != cfg.d) throw std::invalid_argument("m2_heads_forward: input must be N x d");
    if (cfg.op.n != cfg.N) throw std::invalid_argument("m2_heads_forward: causal operator was built for a different length");
    const std::size_t H = cfg.d / cfg.d_h;
    if (cfg.K_long.rows != cfg.N || cfg.K_long.cols != H) throw std::invalid_argument("m2_heads_forward: long kernel must be N x H");

    const auto X1 = detail::short_conv(cfg.op, detail::project(u, cfg.Wx1, nullptr), cfg.K_short1);
    const auto X2 = detail::short_conv(cfg.op, detail::project(u, cfg.Wx2, nullptr), cfg.K_short2);
    const auto V = detail::short_conv(cfg.op, detail::project(u, cfg.Wv, nullptr), cfg.K_short3);

    ActivationTensor O(cfg.N, cfg.d);
    std::vector<cplx> seq(cfg.N);
    for (std::size_t h = 0; h < H; ++h) {
        const auto k = cfg.K_long.column(h);
        const std::size_t base = h * cfg.d_h;
        for (std::size_t i = 0; i < cfg.d_h; ++i)
            for (std::size_t j = 0; j < cfg.d_h; ++j) {
                for (std::size_t t = 0; t < cfg.N; ++t) seq[t] = X2(t, base + i) * V(t, base + j);
                const auto xv = causal_conv(cfg.op, k, seq);
                for (std::size_t t = 0; t < cfg.N; ++t) O(t, base + j) += X1(t, base + i) * xv[t];
            }
    }
    return detail::project(O, cfg.Wo, nullptr);
}

inline constexpr std::size_t kShortTaps = 3;

inline M2HeadsConfig make_heads_layer(std::size_t N, std::size_t d, std::size_t d_h, std::uint64_t seed) {
    if (d_h == 0 || d % d_h != 0) throw std::invalid_argument("make_heads_layer: head dimension must divide d");
    M2HeadsConfig cfg;
    cfg.N = N;
    cfg.d = d;
    cfg.d_h = d_h;
    std::mt19937_64 rng(seed);
    const double w = 1.0 / std::sqrt(static_cast<double>(d));
    cfg.Wx1 = random_dense(d, d, rng, w);
    cfg.Wx2 = random_dense(d, d, rng, w);
    cfg.Wv = random_dense(d, d, rng, w);
    cfg.Wo = random_dense(d, d, rng, w);
    cfg.op = build_causal_operator(N, mask_random_coefficients(N, seed + 1));
    for (auto* K : {&cfg.K_short1, &cfg.K_short2, &cfg.K_short3}) {
        *K = random_dense(N, d, rng);
        for (std::size_t t = kShortTaps; t < N; ++t)
            for (std::size_t c = 0; c < d; ++c) (*K)(t, c) = cplx{};
    }
    cfg.K_long = random_dense(N, d / d_h, rng, 1.0 / static_cast<double>(N));
    return cfg;
}

}  // namespace monarch

#endif
