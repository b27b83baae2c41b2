#ifndef MONARCH_BENCH_HPP
#define MONARCH_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <functional>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "monarch/causal_conv.hpp"
#include "monarch/multivar.hpp"
#include "monarch/oracle.hpp"

namespace monarch::bench {

struct SweepRow {
    std::size_t size = 0;
    std::uint64_t dense_flops = 0;
    std::uint64_t m2_flops = 0;
    double ratio = 0.0;
    double dense_ms = 0.0;
    double m2_ms = 0.0;
};

enum class Format { csv, json };

inline Format parse_format(const std::string& s) {
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    throw std::invalid_argument("unknown format '" + s + "' (expected csv or json)");
}

inline std::string format_double(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline std::string emit_report(const std::vector<SweepRow>& rows, Format format) {
    if (format == Format::csv) {
        std::string out = "size,dense_flops,m2_flops,ratio,dense_ms,m2_ms\n";
        for (const auto& r : rows)
            out += std::to_string(r.size) + "," + std::to_string(r.dense_flops) + "," + std::to_string(r.m2_flops) + "," +
                   format_double(r.ratio) + "," + format_double(r.dense_ms) + "," + format_double(r.m2_ms) + "\n";
        return out;
    }
    nlohmann::ordered_json j;
    j["schema"] = "monarch-bench/1";
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json o;
        o["size"] = r.size;
        o["dense_flops"] = r.dense_flops;
        o["m2_flops"] = r.m2_flops;
        o["ratio"] = r.ratio;
        o["dense_ms"] = r.dense_ms;
        o["m2_ms"] = r.m2_ms;
        j["rows"].push_back(std::move(o));
    }
    return j.dump(2) + "\n";
}

/// Closest perfect square to n; ties go to the smaller one.
inline std::size_t nearest_square(std::size_t n) {
    std::size_t s = 1;
    while ((s + 1) * (s + 1) <= n) ++s;
    const std::size_t lo = s * s, hi = (s + 1) * (s + 1);
    return n - lo <= hi - n ? lo : hi;
}

inline constexpr int kWarmup = 3;
inline constexpr int kMeasured = 10;

/// Median wall time in milliseconds over kMeasured runs after kWarmup runs.
inline double median_ms(const std::function<void()>& fn) {
    for (int i = 0; i < kWarmup; ++i) fn();
    std::vector<double> t;
    for (int i = 0; i < kMeasured; ++i) {
        const auto a = std::chrono::steady_clock::now();
        fn();
        const auto b = std::chrono::steady_clock::now();
        t.push_back(std::chrono::duration<double, std::milli>(b - a).count());
    }
    std::sort(t.begin(), t.end());
    return 0.5 * (t[kMeasured / 2 - 1] + t[kMeasured / 2]);
}

/// Dense matrices beyond this many bytes are timed on a row block and the
/// time is scaled up by N / rows.
inline constexpr std::size_t kDenseByteCap = std::size_t{1} << 27;

inline SweepRow sweep_point(std::size_t N, std::uint64_t seed) {
    if (exact_sqrt(N) == 0) throw std::invalid_argument("sweep: size " + std::to_string(N) + " is not a perfect square");
    SweepRow r;
    r.size = N;
    r.dense_flops = flop_count_dense(N);
    r.m2_flops = flop_count(N, 2, FlopOp::conv);
    r.ratio = static_cast<double>(r.dense_flops) / static_cast<double>(r.m2_flops);

    const auto M = random_monarch<cplx>(N, 2, seed);
    const auto inv = prepare_inverse(M);
    std::mt19937_64 rng(seed + 1);
    std::vector<cplx> k(N), u(N);
    for (auto& x : k) x = draw_scalar<cplx>(rng);
    for (auto& x : u) x = draw_scalar<cplx>(rng);
    r.m2_ms = median_ms([&] {
        auto fk = monarch_matvec(M, k);
        auto fu = monarch_matvec(M, u);
        for (std::size_t i = 0; i < N; ++i) fk[i] *= fu[i];
        volatile auto sink = monarch_inverse_matvec(inv, fk)[0].real();
        (void)sink;
    });

    const std::size_t rows = std::min(N, std::max<std::size_t>(1, kDenseByteCap / (sizeof(cplx) * N)));
    DenseMatrix<cplx> A(rows, N);
    for (auto& x : A.entries) x = draw_scalar<cplx>(rng);
    const double block_ms = median_ms([&] {
        volatile auto sink = dense_matvec(A, u)[0].real();
        (void)sink;
    });
    r.dense_ms = block_ms * static_cast<double>(N) / static_cast<double>(rows);
    return r;
}

// ---------------------------------------------------------------------------
// Verification suites

struct SuiteResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline SuiteResult verify_dft(std::uint64_t) {
    double worst = 0.0;
    for (std::size_t N : {4, 16, 64, 256}) worst = std::max(worst, max_abs_diff(monarch_materialize(monarch_dft(N)), oracle::dft_matrix(N)));
    return {"dft", worst <= 1e-10, "max |monarch_dft - F| = " + format_double(worst)};
}

inline SuiteResult verify_causal(std::uint64_t seed) {
    std::size_t violations = 0;
    double leak = 0.0;
    std::mt19937_64 rng(seed);
    for (std::size_t n : {8, 18, 32})
        for (std::uint64_t t = 0; t < 5; ++t) {
            const auto op = build_causal_operator(n, mask_random_coefficients(n, seed * 1000 + n * 10 + t));
            Signal<cplx> k(n);
            for (auto& x : k) x = draw_scalar<cplx>(rng);
            const auto rep = causality_jacobian_check(op, k, 8, seed + t);
            violations += rep.violations;
            leak = std::max(leak, rep.max_leakage);
        }
    return {"causal", violations == 0, "violations " + std::to_string(violations) + ", max leakage " + format_double(leak)};
}

inline SuiteResult verify_real(std::uint64_t seed) {
    double leak = 0.0;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (auto [n, N] : {std::pair<std::size_t, std::size_t>{4, 16}, {8, 16}, {12, 25}}) {
        auto [L, R] = random_sc_coefficients(N, seed + N);
        const auto op = block_sc_build(L, R);
        std::vector<double> k(n), u(n);
        for (auto& x : k) x = U(rng);
        for (auto& x : u) x = U(rng);
        const auto base = real_causal_conv(op, k, u);
        for (std::size_t j = 0; j < n; ++j) {
            auto v = u;
            v[j] += 1e-3;
            const auto y = real_causal_conv(op, k, v);
            for (std::size_t i = 0; i < j; ++i) leak = std::max(leak, std::abs(y[i] - base[i]));
        }
    }
    return {"real", leak <= 1e-9, "max leakage " + format_double(leak)};
}

inline SuiteResult verify_multivar(std::uint64_t seed) {
    const std::size_t b = 4, p = 2;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<DenseMatrix<double>> axes;
    for (std::size_t a = 0; a < p; ++a) {
        DenseMatrix<double> A(b, b);
        for (std::size_t j = 0; j < b; ++j) {
            for (std::size_t m = 0; m + j + 1 < b; ++m) A(m, j) = U(rng);
            A(b - j - 1, j) = 1.0 + std::abs(U(rng));
        }
        axes.push_back(std::move(A));
    }
    const auto mv = causal_multivar_build(axes);
    const std::size_t h = b / 2, n = ipow(h, p);
    std::vector<double> k(n), u(n);
    for (auto& x : k) x = U(rng);
    for (auto& x : u) x = U(rng);
    const auto base = multivar_causal_conv(mv, k, u);
    double leak = 0.0;
    for (std::size_t f = 0; f < n; ++f) {
        auto v = u;
        v[f] += 1e-3;
        const auto y = multivar_causal_conv(mv, k, v);
        const auto jf = unflatten(f, h, p);
        for (std::size_t g = 0; g < n; ++g)
            if (lex_less(unflatten(g, h, p), jf)) leak = std::max(leak, std::abs(y[g] - base[g]));
    }
    return {"multivar", leak <= 1e-9, "max leakage " + format_double(leak)};
}

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"dft", "causal", "real", "multivar", "all"};
    return names;
}

inline std::vector<SuiteResult> run_suite(const std::string& name, std::uint64_t seed) {
    std::vector<SuiteResult> out;
    if (name == "dft" || name == "all") out.push_back(verify_dft(seed));
    if (name == "causal" || name == "all") out.push_back(verify_causal(seed));
    if (name == "real" || name == "all") out.push_back(verify_real(seed));
    if (name == "multivar" || name == "all") out.push_back(verify_multivar(seed));
    if (out.empty()) throw std::invalid_argument("unknown suite '" + name + "'");
    return out;
}

}  // namespace monarch::bench

#endif
