#pragma once
//
// io.hpp — file formats and the command-line front end.
//
// Formats:
//   matf  binary matrix: magic "MATF", version u32, rows/cols u64, payload of
//         row-major little-endian f64. Bit-exact round trip.
//   csv   text matrix, one row per line, shortest-round-trip decimals.
//   pgm   binary P5, maxval 255; values map to reals in [0, 255]. Saving
//         rounds to the nearest integer and clamps to [0, 255].
//   lplr  packed factorization: magic "LPLR", version u32, algorithm id u8,
//         n/m/d u64, B/B' u8, R_Q/R_Q' f64, affine flag u8 (+ alpha/beta f64),
//         then the L and R code blocks, each row-major with codes packed
//         LSB-first and zero-padded to a byte boundary.
//
// All integers and floats are little-endian. Loaders fail with IoError
// diagnostics that distinguish malformed headers, truncated payloads, ragged
// CSV rows, version mismatches, and out-of-range codes.
//

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lplr/compress.hpp"
#include "lplr/matrix.hpp"

namespace lplr {

enum class FileFormat : std::uint8_t { matf, csv, pgm };

// Maps "matf" | "csv" | "pgm" (throws ArgumentError otherwise).
FileFormat format_from_name(const std::string& name);

// Picks the format from the path's extension; unknown extensions fall back
// to `fallback`.
FileFormat infer_format(const std::string& path, FileFormat fallback = FileFormat::matf);

void save_matrix(const std::string& path, const Matrix& a, FileFormat format);
Matrix load_matrix(const std::string& path, FileFormat format);

// Convenience overloads using infer_format on the extension.
void save_matrix(const std::string& path, const Matrix& a);
Matrix load_matrix(const std::string& path);

void save_factorization(const std::string& path, const Factorization& f);
Factorization load_factorization(const std::string& path);

// Exact byte size save_factorization will produce for a factorization with
// the given shape/bit parameters (header + packed code blocks + affine pair).
std::size_t factor_file_size(std::size_t n, std::size_t m, std::size_t d, int bits,
                             int bits_second, bool has_affine);

// Command-line entry point (subcommands: compress, decompress, eval, sweep,
// knn, phantom, selftest). Returns 0 on success, 1 on usage errors, 2 on
// runtime failures such as exhausted saturation retries. Output goes to the
// supplied streams so tests can capture it.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

} // namespace lplr
