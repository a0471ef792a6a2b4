#include "evo/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "evo/errors.hpp"
#include "evo/rng.hpp"

namespace evo::sim {

ToyEncoderParams ToyEncoderParams::zeros(std::size_t d_in, std::size_t d_out) {
    require(d_in >= 1 && d_out >= 1, ErrorKind::Usage, "encoder dimensions must be positive");
    return ToyEncoderParams{d_in, d_out, std::vector<double>(d_in * d_out, 0.0)};
}

ToyEncoderParams ToyEncoderParams::identity(std::size_t d) {
    auto p = zeros(d, d);
    for (std::size_t i = 0; i < d; ++i) p.at(i, i) = 1.0;
    return p;
}

ToyEncoderParams ToyEncoderParams::random(std::size_t d_in, std::size_t d_out, std::uint32_t seed) {
    auto p = zeros(d_in, d_out);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (double& v : p.projection) v = scale * rng.normal();
    return p;
}

namespace {

TokenMatrix project(const ToyEncoderParams& p, const TokenMatrix& raw) {
    require(raw.dim() == p.d_in, ErrorKind::Usage,
            fmt::format("raw token dimension {} does not match encoder input {}", raw.dim(), p.d_in));
    require(p.projection.size() == p.d_in * p.d_out, ErrorKind::Usage, "projection has wrong size");
    TokenMatrix y(raw.rows(), p.d_out);
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        auto x = raw.row(r);
        auto out = y.row(r);
        for (std::size_t i = 0; i < p.d_in; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            const double* prow = p.projection.data() + i * p.d_out;
            for (std::size_t j = 0; j < p.d_out; ++j) out[j] += xi * prow[j];
        }
    }
    return y;
}

}  // namespace

TokenMatrix toy_encode(const ToyEncoderParams& params, const TokenMatrix& raw) {
    return scoring::l2_normalize(project(params, raw));
}

void toy_encode_backward(const ToyEncoderParams& params, const TokenMatrix& raw, const TokenMatrix& grad_encoded,
                         std::vector<double>& grad) {
    const TokenMatrix y = project(params, raw);
    require(grad_encoded.rows() == y.rows() && grad_encoded.dim() == y.dim(), ErrorKind::Structural,
            "encoded gradient shape mismatch");
    require(grad.size() == params.d_in * params.d_out, ErrorKind::Usage, "gradient buffer has wrong size");
    std::vector<double> gy(params.d_out);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        auto yr = y.row(r);
        auto gr = grad_encoded.row(r);
        const double norm = std::sqrt(scoring::dot(yr, yr));
        if (norm == 0.0) continue;
        // d(y/|y|)/dy applied to g: (g - (g.z) z) / |y|
        double gz = 0.0;
        for (std::size_t j = 0; j < params.d_out; ++j) gz += gr[j] * yr[j] / norm;
        for (std::size_t j = 0; j < params.d_out; ++j) gy[j] = (gr[j] - gz * yr[j] / norm) / norm;
        auto x = raw.row(r);
        for (std::size_t i = 0; i < params.d_in; ++i) {
            if (x[i] == 0.0) continue;
            double* g = grad.data() + i * params.d_out;
            for (std::size_t j = 0; j < params.d_out; ++j) g[j] += x[i] * gy[j];
        }
    }
}

namespace {

void put_le(std::ofstream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    out.write(buf, 8);
}

double get_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const ToyEncoderParams& params, std::int64_t step, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Data, "cannot write checkpoint " + path.string());
    nlohmann::json header{{"format", "evo-checkpoint"}, {"d_in", params.d_in}, {"d_out", params.d_out}, {"step", step}};
    out << header.dump() << '\n';
    for (double v : params.projection) put_le(out, v);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Data, "cannot open checkpoint " + path.string());
    std::string header_line;
    std::getline(in, header_line);
    Checkpoint ck;
    try {
        const auto h = nlohmann::json::parse(header_line);
        require(h.at("format") == "evo-checkpoint", ErrorKind::Parse, "not an evo checkpoint");
        ck.params = ToyEncoderParams::zeros(h.at("d_in").get<std::size_t>(), h.at("d_out").get<std::size_t>());
        ck.step = h.at("step").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad checkpoint header: ") + e.what());
    }
    std::vector<unsigned char> raw(ck.params.projection.size() * 8);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    require(static_cast<std::size_t>(in.gcount()) == raw.size(), ErrorKind::Parse, "truncated checkpoint payload");
    for (std::size_t i = 0; i < ck.params.projection.size(); ++i) ck.params.projection[i] = get_le(raw.data() + 8 * i);
    return ck;
}

}  // namespace evo::sim
