#include "lplr/quantize.hpp"

#include <cmath>
#include <string>

namespace lplr {

namespace {

void require_bits(int bits) {
    if (bits < 1 || bits > 31) {
        throw ArgumentError("quantizer bits must lie in [1, 31], got " + std::to_string(bits));
    }
}

// Core grid rounding given a pre-drawn dither uniform u in [0, 1).
// Cell index k = floor((x + R)/Delta) clamped to [0, M-2]; x is sent to
// q_{k+1} with probability (x - q_k)/Delta. Values that equal a grid point
// bit-for-bit return that point's code for every u, so grid-valued inputs
// survive quantization exactly.
std::uint32_t code_for(double x, const QuantizerSpec& spec, double u, Rounding rounding) {
    const double r_dyn = spec.dynamic_range;
    const std::uint32_t top = spec.levels() - 1;
    const double delta = spec.resolution();

    if (rounding == Rounding::nearest) {
        const double cell = (x + r_dyn) / delta;
        long long code = std::llround(cell);
        if (code < 0) code = 0;
        if (code > static_cast<long long>(top)) code = top;
        return static_cast<std::uint32_t>(code);
    }

    // The interval ends are grid points; send them to their codes outright so
    // x = +-R is deterministic even when the reconstructed top grid value
    // differs from R by a rounding ulp.
    if (x == r_dyn) return top;
    if (x == -r_dyn) return 0;

    double cell = std::floor((x + r_dyn) / delta);
    if (cell < 0.0) cell = 0.0;
    if (cell > static_cast<double>(top - 1)) cell = static_cast<double>(top - 1);
    const std::uint32_t k = static_cast<std::uint32_t>(cell);

    // Exact grid hits are deterministic regardless of the dither draw.
    if (x == spec.grid_value(k)) return k;
    if (x == spec.grid_value(k + 1)) return k + 1;

    double p_up = (x - spec.grid_value(k)) / delta;
    if (p_up < 0.0) p_up = 0.0;
    if (p_up > 1.0) p_up = 1.0;
    return u < p_up ? k + 1 : k;
}

void require_unsaturated(double x, const QuantizerSpec& spec, std::size_t row, std::size_t col) {
    if (std::abs(x) > spec.dynamic_range) {
        throw SaturationError("quantizer input " + std::to_string(x) + " at (" +
                                  std::to_string(row) + ", " + std::to_string(col) +
                                  ") exceeds the dynamic range " +
                                  std::to_string(spec.dynamic_range),
                              x, row, col);
    }
}

} // namespace

QuantizerSpec::QuantizerSpec(double dynamic_range, int bits)
    : dynamic_range(dynamic_range), bits(bits) {
    require_bits(bits);
    if (!(dynamic_range > 0.0) || !std::isfinite(dynamic_range)) {
        throw ArgumentError("quantizer dynamic range must be positive and finite, got " +
                            std::to_string(dynamic_range));
    }
}

std::uint32_t quantize_scalar(double x, const QuantizerSpec& spec, rng::Stream& stream,
                              Rounding rounding) {
    require_unsaturated(x, spec, 0, 0);
    const double u = rounding == Rounding::dithered ? stream.uniform() : 0.0;
    return code_for(x, spec, u, rounding);
}

QuantizedMatrix quantize_matrix(const Matrix& x, const QuantizerSpec& spec, std::uint64_t seed,
                                Rounding rounding) {
    x.validate("quantizer input");
    QuantizedMatrix q;
    q.rows = x.rows;
    q.cols = x.cols;
    q.spec = spec;
    q.codes.resize(x.size());
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double value = x(i, j);
            require_unsaturated(value, spec, i, j);
            const double u =
                rounding == Rounding::dithered ? rng::uniform(seed, i, j) : 0.0;
            q.codes[i * x.cols + j] = code_for(value, spec, u, rounding);
        }
    }
    return q;
}

Matrix dequantize(const QuantizedMatrix& q) {
    if (q.rows == 0 || q.cols == 0 || q.codes.size() != q.rows * q.cols) {
        throw ArgumentError("dequantize: quantized matrix has inconsistent shape");
    }
    Matrix out(q.rows, q.cols);
    if (q.all_zero) return out;
    const std::uint32_t top = q.spec.levels() - 1;
    for (std::size_t idx = 0; idx < q.codes.size(); ++idx) {
        if (q.codes[idx] > top) {
            throw ArgumentError("dequantize: code " + std::to_string(q.codes[idx]) +
                                " out of range for " + std::to_string(q.spec.bits) + " bits");
        }
        out.data[idx] = q.spec.grid_value(q.codes[idx]);
    }
    return out;
}

std::uint32_t quantize_clipped(double x, const QuantizerSpec& spec, rng::Stream& stream,
                               Rounding rounding) {
    if (x > spec.dynamic_range) return spec.levels() - 1;
    if (x < -spec.dynamic_range) return 0;
    const double u = rounding == Rounding::dithered ? stream.uniform() : 0.0;
    return code_for(x, spec, u, rounding);
}

SaturationCheck check_saturation(const Matrix& x, double dynamic_range) {
    SaturationCheck out;
    out.max_abs = max_abs(x);
    out.saturated = out.max_abs > dynamic_range;
    return out;
}

std::uint32_t midpoint_code(int bits) {
    require_bits(bits);
    return 1u << (bits - 1);
}

} // namespace lplr
