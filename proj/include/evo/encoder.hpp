#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "evo/scoring.hpp"

namespace evo::sim {

using scoring::TokenMatrix;

/// Trainable d_in x d_out projection (row-major) standing in for a backbone.
struct ToyEncoderParams {
    std::size_t d_in = 12;
    std::size_t d_out = 8;
    std::vector<double> projection = std::vector<double>(12 * 8, 0.0);

    double& at(std::size_t i, std::size_t j) { return projection[i * d_out + j]; }
    double at(std::size_t i, std::size_t j) const { return projection[i * d_out + j]; }

    static ToyEncoderParams zeros(std::size_t d_in, std::size_t d_out);
    static ToyEncoderParams identity(std::size_t d);
    /// Entries drawn from N(0, 1/d_in).
    static ToyEncoderParams random(std::size_t d_in, std::size_t d_out, std::uint32_t seed);

    bool operator==(const ToyEncoderParams&) const = default;
};

/// Projects every raw token and L2-normalizes the result. Throws Usage when
/// raw.dim() != d_in.
TokenMatrix toy_encode(const ToyEncoderParams& params, const TokenMatrix& raw);

/// Adds d(loss)/d(projection) to `grad` (d_in * d_out entries) given
/// d(loss)/d(encoded) for the matrix produced by toy_encode(params, raw).
/// Rows whose projection is exactly zero contribute nothing.
void toy_encode_backward(const ToyEncoderParams& params, const TokenMatrix& raw, const TokenMatrix& grad_encoded,
                         std::vector<double>& grad);

/// Header line {"format":"evo-checkpoint","d_in":..,"d_out":..,"step":..}
/// followed by d_in*d_out little-endian float64 values.
void save_checkpoint(const ToyEncoderParams& params, std::int64_t step, const std::filesystem::path& path);

struct Checkpoint {
    ToyEncoderParams params;
    std::int64_t step = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace evo::sim
