#pragma once
//
// quantize.hpp — uniformly dithered scalar quantization.
//
// A quantizer with dynamic range R and bit-budget B covers [-R, R] with the
// M = 2^B point grid q_c = -R + c*Delta (c = 0..M-1, Delta = 2R/(M-1)).
// Dithered rounding maps x in [q_c, q_{c+1}) to q_{c+1} with probability
// (x - q_c)/Delta and to q_c otherwise, which makes the quantizer unbiased
// with per-entry variance at most Delta^2/4. Inputs with |x| > R saturate.
//

#include <cstdint>
#include <vector>

#include "lplr/matrix.hpp"
#include "lplr/rng.hpp"

namespace lplr {

// Stochastic (unbiased) vs round-to-nearest quantization. Dithered is the
// default everywhere; nearest exists because the round-off mode is
// occasionally useful for exact determinism across dither seeds.
enum class Rounding : std::uint8_t { dithered, nearest };

struct QuantizerSpec {
    double dynamic_range = 1.0; // R > 0
    int bits = 8;               // B in [1, 31] so codes fit an int32

    QuantizerSpec() = default;
    QuantizerSpec(double dynamic_range, int bits);

    std::uint32_t levels() const { return 1u << bits; } // M = 2^B
    double resolution() const {                         // Delta = 2R/(M-1)
        return 2.0 * dynamic_range / static_cast<double>(levels() - 1);
    }
    double grid_value(std::uint32_t code) const {
        return -dynamic_range + static_cast<double>(code) * resolution();
    }
};

struct QuantizedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint32_t> codes; // row-major, each < 2^B
    QuantizerSpec spec;

    // Zero-range short-circuit marker: the quantized input was exactly the
    // zero matrix (its measured range was 0, so no grid applies). Codes hold
    // the midpoint placeholder 2^(B-1) with R = 1; dequantize returns exact
    // zeros. Serialization stores a range of 0.0 to round-trip the flag.
    bool all_zero = false;

    std::size_t size() const { return rows * cols; }
    std::size_t payload_bits() const { return size() * static_cast<std::size_t>(spec.bits); }
};

// Quantizes one scalar, drawing the dither from `stream` (exactly one uniform
// per call in dithered mode, none in nearest mode). Throws SaturationError
// when |x| > R. x = +R and x = -R map to the end grid points deterministically.
std::uint32_t quantize_scalar(double x, const QuantizerSpec& spec, rng::Stream& stream,
                              Rounding rounding = Rounding::dithered);

// Entrywise quantization with an independent dither per entry, keyed by
// (seed, row, col) — deterministic and order-independent. Throws
// SaturationError identifying the first saturated entry in row-major order.
QuantizedMatrix quantize_matrix(const Matrix& x, const QuantizerSpec& spec, std::uint64_t seed,
                                Rounding rounding = Rounding::dithered);

// Exact inverse of the grid indexing: entry (i,j) = -R + code * Delta
// (or exact zeros for an all_zero-marked matrix).
Matrix dequantize(const QuantizedMatrix& q);

// Clipped variant: values beyond the clip threshold +-t (= the spec's dynamic
// range) clamp to +-t; inside [-t, t] behaves exactly like quantize_scalar.
// Never saturates.
std::uint32_t quantize_clipped(double x, const QuantizerSpec& spec, rng::Stream& stream,
                               Rounding rounding = Rounding::dithered);

struct SaturationCheck {
    double max_abs = 0.0;
    bool saturated = false;
};

// saturated <=> max_ij |X_ij| > R.
SaturationCheck check_saturation(const Matrix& x, double dynamic_range);

// Midpoint placeholder code used by the zero-range short-circuit.
std::uint32_t midpoint_code(int bits);

} // namespace lplr
