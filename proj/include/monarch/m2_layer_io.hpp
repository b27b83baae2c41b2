#ifndef MONARCH_M2_LAYER_IO_HPP
#define MONARCH_M2_LAYER_IO_HPP

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "monarch/m2_layer.hpp"

namespace monarch {

// A saved layer is a directory holding layer.json plus one binary blob per
// weight. Monarch weights use the save_monarch format; dense weights use
// "DNS1", u32 rows, u32 cols, then little-endian (re, im) float64 pairs.

inline void save_dense(std::ostream& os, const DenseMatrix<cplx>& A) {
    os.write("DNS1", 4);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(A.rows));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(A.cols));
    for (const auto& x : A.entries) {
        detail::put_le<double>(os, x.real());
        detail::put_le<double>(os, x.imag());
    }
}

inline DenseMatrix<cplx> load_dense(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "DNS1", 4) != 0) throw std::runtime_error("dense file: bad magic");
    const auto rows = detail::get_le<std::uint32_t>(is);
    const auto cols = detail::get_le<std::uint32_t>(is);
    DenseMatrix<cplx> A(rows, cols);
    for (auto& x : A.entries) {
        const double re = detail::get_le<double>(is);
        const double im = detail::get_le<double>(is);
        x = {re, im};
    }
    if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("dense file: trailing bytes");
    return A;
}

namespace detail {

template <class Fn>
void write_blob(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    fn(os);
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

inline std::ifstream open_blob(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return is;
}

}  // namespace detail

inline void save_layer(const M2LayerConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir) {
    validate(cfg);
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["format"] = "m2-layer/1";
    j["N"] = cfg.N;
    j["d"] = cfg.d;
    j["sigma"] = to_string(cfg.sigma);
    j["gated"] = cfg.gated;
    j["causal"] = cfg.causal;
    j["seed"] = seed;
    j["layernorm_eps"] = cfg.layernorm_eps;
    nlohmann::json blobs;
    auto monarch_blob = [&](const char* name, const MonarchFactorization<cplx>& M) {
        const std::string file = std::string(name) + ".mnr";
        detail::write_blob(dir / file, [&](std::ostream& os) { save_monarch(os, M); });
        blobs[name] = file;
    };
    auto dense_blob = [&](const char* name, const DenseMatrix<cplx>& A) {
        const std::string file = std::string(name) + ".dns";
        detail::write_blob(dir / file, [&](std::ostream& os) { save_dense(os, A); });
        blobs[name] = file;
    };
    if (cfg.causal) {
        monarch_blob("causal_M", cfg.causal_op->M);
    } else {
        monarch_blob("M1", cfg.M1);
        monarch_blob("M2", cfg.M2);
    }
    monarch_blob("M3", cfg.M3);
    monarch_blob("M4", cfg.M4);
    dense_blob("K1", cfg.K1);
    if (cfg.Wq) dense_blob("Wq", *cfg.Wq);
    if (cfg.Wk) dense_blob("Wk", *cfg.Wk);
    if (cfg.Wv) dense_blob("Wv", *cfg.Wv);
    j["blobs"] = blobs;
    std::ofstream os(dir / "layer.json");
    os << j.dump(2) << '\n';
}

inline M2LayerConfig load_layer(const std::filesystem::path& dir) {
    std::ifstream js(dir / "layer.json");
    if (!js) throw std::runtime_error("cannot open " + (dir / "layer.json").string());
    const auto j = nlohmann::json::parse(js);
    if (j.value("format", "") != "m2-layer/1") throw std::runtime_error("layer.json: unsupported format");
    M2LayerConfig cfg;
    cfg.N = j.at("N").get<std::size_t>();
    cfg.d = j.at("d").get<std::size_t>();
    cfg.sigma = parse_nonlinearity(j.at("sigma").get<std::string>());
    cfg.gated = j.at("gated").get<bool>();
    cfg.causal = j.at("causal").get<bool>();
    cfg.layernorm_eps = j.at("layernorm_eps").get<double>();
    const auto& blobs = j.at("blobs");
    auto monarch_blob = [&](const char* name) {
        auto is = detail::open_blob(dir / blobs.at(name).get<std::string>());
        return load_monarch<cplx>(is);
    };
    auto dense_blob = [&](const char* name) {
        auto is = detail::open_blob(dir / blobs.at(name).get<std::string>());
        return load_dense(is);
    };
    if (cfg.causal) {
        CausalMonarchOperator op;
        op.n = cfg.N;
        op.M = monarch_blob("causal_M");
        op.N = op.M.N;
        op.M_inv = prepare_inverse(op.M);
        cfg.causal_op = std::move(op);
    } else {
        cfg.M1 = monarch_blob("M1");
        cfg.M2 = monarch_blob("M2");
    }
    cfg.M3 = monarch_blob("M3");
    cfg.M4 = monarch_blob("M4");
    cfg.K1 = dense_blob("K1");
    if (blobs.contains("Wq")) cfg.Wq = dense_blob("Wq");
    if (blobs.contains("Wk")) cfg.Wk = dense_blob("Wk");
    if (blobs.contains("Wv")) cfg.Wv = dense_blob("Wv");
    validate(cfg);
    return cfg;
}

}  // namespace monarch

#endif
