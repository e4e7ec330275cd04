#include "lplr/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

namespace lplr {

namespace {

// ---------------------------------------------------------------------------
// Little-endian byte plumbing
// ---------------------------------------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

// Sequential reader over a loaded file with truncation diagnostics.
class ByteReader {
public:
    ByteReader(const std::string& bytes, const std::string& what)
        : bytes_(bytes), what_(what) {}

    std::uint8_t u8() { return take(1)[0]; }

    std::uint32_t u32() {
        const std::uint8_t* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        const std::uint8_t* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    const std::uint8_t* block(std::size_t len, const char* label) {
        if (remaining() < len) {
            throw IoError(what_ + ": truncated payload (" + label + " needs " +
                          std::to_string(len) + " bytes, " + std::to_string(remaining()) +
                          " left)");
        }
        const auto* p = reinterpret_cast<const std::uint8_t*>(bytes_.data()) + pos_;
        pos_ += len;
        return p;
    }

    void expect_magic(const char* magic) {
        if (remaining() < 4 || std::memcmp(bytes_.data() + pos_, magic, 4) != 0) {
            throw IoError(what_ + ": malformed header (bad magic, expected '" +
                          std::string(magic) + "')");
        }
        pos_ += 4;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

    void expect_end() {
        if (remaining() != 0) {
            throw IoError(what_ + ": trailing data (" + std::to_string(remaining()) +
                          " bytes past the payload)");
        }
    }

private:
    const std::uint8_t* take(std::size_t len) { return block(len, "field"); }

    const std::string& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed on '" + path + "'");
    return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed on '" + path + "'");
}

// ---------------------------------------------------------------------------
// Code blocks: row-major codes packed LSB-first, zero-padded to a byte.
// ---------------------------------------------------------------------------

std::size_t packed_bytes(std::size_t count, int bits) {
    return (count * static_cast<std::size_t>(bits) + 7) / 8;
}

void pack_codes(std::string& out, const std::vector<std::uint32_t>& codes, int bits) {
    std::uint64_t acc = 0;
    int filled = 0;
    for (std::uint32_t code : codes) {
        acc |= static_cast<std::uint64_t>(code) << filled;
        filled += bits;
        while (filled >= 8) {
            out.push_back(static_cast<char>(acc & 0xFF));
            acc >>= 8;
            filled -= 8;
        }
    }
    if (filled > 0) out.push_back(static_cast<char>(acc & 0xFF));
}

std::vector<std::uint32_t> unpack_codes(const std::uint8_t* bytes, std::size_t count, int bits,
                                        const std::string& what) {
    std::vector<std::uint32_t> codes(count);
    std::uint64_t acc = 0;
    int avail = 0;
    std::size_t pos = 0;
    const std::uint64_t mask = (1ULL << bits) - 1;
    for (std::size_t i = 0; i < count; ++i) {
        while (avail < bits) {
            acc |= static_cast<std::uint64_t>(bytes[pos++]) << avail;
            avail += 8;
        }
        codes[i] = static_cast<std::uint32_t>(acc & mask);
        acc >>= bits;
        avail -= bits;
    }
    if (acc != 0) {
        throw IoError(what + ": corrupted code block (nonzero padding bits)");
    }
    return codes;
}

// ---------------------------------------------------------------------------
// Per-format matrix codecs
// ---------------------------------------------------------------------------

constexpr std::uint32_t kMatrixVersion = 1;
constexpr std::uint32_t kFactorVersion = 1;

std::string encode_matf(const Matrix& a) {
    std::string out;
    out.reserve(28 + a.size() * 8);
    out.append("MATF");
    put_u32(out, kMatrixVersion);
    put_u64(out, a.rows);
    put_u64(out, a.cols);
    for (double v : a.data) put_f64(out, v);
    return out;
}

Matrix decode_matf(const std::string& bytes, const std::string& what) {
    ByteReader reader(bytes, what);
    reader.expect_magic("MATF");
    const std::uint32_t version = reader.u32();
    if (version != kMatrixVersion) {
        throw IoError(what + ": unsupported matrix file version " + std::to_string(version));
    }
    const std::uint64_t rows = reader.u64();
    const std::uint64_t cols = reader.u64();
    if (rows == 0 || cols == 0 || rows > reader.remaining() || cols > reader.remaining()) {
        throw IoError(what + ": malformed header (implausible shape " + std::to_string(rows) +
                      "x" + std::to_string(cols) + ")");
    }
    const std::size_t count = static_cast<std::size_t>(rows * cols);
    const std::uint8_t* payload = reader.block(count * 8, "matrix payload");
    reader.expect_end();
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t raw = 0;
        for (int b = 0; b < 8; ++b) {
            raw |= static_cast<std::uint64_t>(payload[i * 8 + b]) << (8 * b);
        }
        values[i] = std::bit_cast<double>(raw);
    }
    return Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                  std::move(values));
}

// Shortest decimal that parses back to the same double.
void append_shortest(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

std::string encode_csv(const Matrix& a) {
    std::string out;
    out.reserve(a.size() * 8);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) {
            if (j > 0) out.push_back(',');
            append_shortest(out, a(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

Matrix decode_csv(const std::string& text, const std::string& what) {
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t line_start = 0;
    while (line_start < text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::size_t trimmed_end = line_end;
        if (trimmed_end > line_start && text[trimmed_end - 1] == '\r') --trimmed_end;

        if (trimmed_end > line_start) {
            ++rows;
            std::size_t field_count = 0;
            std::size_t pos = line_start;
            while (pos <= trimmed_end) {
                std::size_t comma = text.find(',', pos);
                if (comma == std::string::npos || comma > trimmed_end) comma = trimmed_end;
                double value = 0.0;
                const char* first = text.data() + pos;
                const char* last = text.data() + comma;
                while (first < last && std::isspace(static_cast<unsigned char>(*first))) ++first;
                const auto parsed = std::from_chars(first, last, value);
                if (parsed.ec != std::errc{} ||
                    std::find_if(parsed.ptr, last, [](char c) {
                        return !std::isspace(static_cast<unsigned char>(c));
                    }) != last) {
                    throw IoError(what + ": unparseable number at row " + std::to_string(rows) +
                                  ", field " + std::to_string(field_count + 1));
                }
                values.push_back(value);
                ++field_count;
                pos = comma + 1;
                if (comma == trimmed_end) break;
            }
            if (cols == 0) {
                cols = field_count;
            } else if (field_count != cols) {
                throw IoError(what + ": ragged row " + std::to_string(rows) + " has " +
                              std::to_string(field_count) + " values, expected " +
                              std::to_string(cols));
            }
        }
        line_start = line_end + 1;
    }
    if (rows == 0 || cols == 0) throw IoError(what + ": no numeric rows found");
    return Matrix(rows, cols, std::move(values));
}

std::string encode_pgm(const Matrix& a) {
    std::string out = "P5\n" + std::to_string(a.cols) + " " + std::to_string(a.rows) + "\n255\n";
    out.reserve(out.size() + a.size());
    for (double v : a.data) {
        const double clamped = std::clamp(v, 0.0, 255.0);
        out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::llround(clamped))));
    }
    return out;
}

Matrix decode_pgm(const std::string& bytes, const std::string& what) {
    std::size_t pos = 0;
    auto skip_separators = [&]() {
        while (pos < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&](const char* label) -> std::uint64_t {
        skip_separators();
        std::uint64_t value = 0;
        const auto parsed = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
        if (parsed.ec != std::errc{}) {
            throw IoError(what + ": malformed header (bad " + std::string(label) + ")");
        }
        pos = static_cast<std::size_t>(parsed.ptr - bytes.data());
        return value;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw IoError(what + ": malformed header (not a binary P5 image)");
    }
    pos = 2;
    const std::uint64_t width = read_int("width");
    const std::uint64_t height = read_int("height");
    const std::uint64_t maxval = read_int("maxval");
    if (width == 0 || height == 0) throw IoError(what + ": malformed header (zero dimension)");
    if (maxval != 255) {
        throw IoError(what + ": unsupported maxval " + std::to_string(maxval) +
                      " (only 255 is supported)");
    }
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw IoError(what + ": malformed header (missing separator before pixels)");
    }
    ++pos; // exactly one whitespace byte separates header and pixels

    const std::size_t count = static_cast<std::size_t>(width * height);
    if (bytes.size() - pos < count) {
        throw IoError(what + ": truncated payload (" + std::to_string(count) + " pixels needed, " +
                      std::to_string(bytes.size() - pos) + " bytes left)");
    }
    if (bytes.size() - pos > count) {
        throw IoError(what + ": trailing data past the pixel payload");
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = static_cast<double>(static_cast<std::uint8_t>(bytes[pos + i]));
    }
    return Matrix(static_cast<std::size_t>(height), static_cast<std::size_t>(width),
                  std::move(values));
}

} // namespace

// ---------------------------------------------------------------------------
// Public matrix API
// ---------------------------------------------------------------------------

FileFormat format_from_name(const std::string& name) {
    if (name == "matf") return FileFormat::matf;
    if (name == "csv") return FileFormat::csv;
    if (name == "pgm") return FileFormat::pgm;
    throw ArgumentError("unknown matrix format '" + name + "' (expected matf, csv, or pgm)");
}

FileFormat infer_format(const std::string& path, FileFormat fallback) {
    const std::size_t dot = path.find_last_of('.');
    if (dot == std::string::npos) return fallback;
    const std::string ext = path.substr(dot + 1);
    if (ext == "matf") return FileFormat::matf;
    if (ext == "csv") return FileFormat::csv;
    if (ext == "pgm") return FileFormat::pgm;
    return fallback;
}

void save_matrix(const std::string& path, const Matrix& a, FileFormat format) {
    a.validate("matrix to save");
    switch (format) {
        case FileFormat::matf: write_file(path, encode_matf(a)); return;
        case FileFormat::csv: write_file(path, encode_csv(a)); return;
        case FileFormat::pgm: write_file(path, encode_pgm(a)); return;
    }
    throw ArgumentError("unknown matrix format id");
}

Matrix load_matrix(const std::string& path, FileFormat format) {
    const std::string bytes = read_file(path);
    switch (format) {
        case FileFormat::matf: return decode_matf(bytes, path);
        case FileFormat::csv: return decode_csv(bytes, path);
        case FileFormat::pgm: return decode_pgm(bytes, path);
    }
    throw ArgumentError("unknown matrix format id");
}

void save_matrix(const std::string& path, const Matrix& a) {
    save_matrix(path, a, infer_format(path));
}

Matrix load_matrix(const std::string& path) { return load_matrix(path, infer_format(path)); }

// ---------------------------------------------------------------------------
// Factorization file
// ---------------------------------------------------------------------------

std::size_t factor_file_size(std::size_t n, std::size_t m, std::size_t d, int bits,
                             int bits_second, bool has_affine) {
    return 52 + (has_affine ? 16 : 0) + packed_bytes(n * m, bits) +
           (bits_second > 0 ? packed_bytes(m * d, bits_second) : 0);
}

void save_factorization(const std::string& path, const Factorization& f) {
    const bool naive = f.algorithm == Algorithm::naive;
    if (f.l.codes.size() != f.l.rows * f.l.cols) {
        throw ArgumentError("save_factorization: left factor shape/code mismatch");
    }
    if (!naive) {
        if (f.r.codes.size() != f.r.rows * f.r.cols) {
            throw ArgumentError("save_factorization: right factor shape/code mismatch");
        }
        if (f.l.cols != f.r.rows) {
            throw ArgumentError("save_factorization: factor widths disagree (" +
                                std::to_string(f.l.cols) + " vs " + std::to_string(f.r.rows) +
                                ")");
        }
    }
    if (f.alpha.has_value() != f.beta.has_value()) {
        throw ArgumentError("save_factorization: affine pair must be both present or absent");
    }

    const std::size_t n = f.l.rows;
    const std::size_t d = naive ? f.l.cols : f.r.cols;
    const std::size_t m = naive ? d : f.l.cols;

    std::string out;
    out.reserve(factor_file_size(n, m, d, f.l.spec.bits, naive ? 0 : f.r.spec.bits,
                                 f.alpha.has_value()));
    out.append("LPLR");
    put_u32(out, kFactorVersion);
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(f.algorithm)));
    put_u64(out, n);
    put_u64(out, m);
    put_u64(out, d);
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(f.l.spec.bits)));
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(naive ? 0 : f.r.spec.bits)));
    // A stored range of 0.0 is the zero-matrix marker (the in-memory spec
    // keeps the placeholder range 1).
    put_f64(out, f.l.all_zero ? 0.0 : f.l.spec.dynamic_range);
    put_f64(out, naive ? 0.0 : (f.r.all_zero ? 0.0 : f.r.spec.dynamic_range));
    out.push_back(f.alpha.has_value() ? '\x01' : '\x00');
    if (f.alpha.has_value()) {
        put_f64(out, *f.alpha);
        put_f64(out, *f.beta);
    }
    pack_codes(out, f.l.codes, f.l.spec.bits);
    if (!naive) pack_codes(out, f.r.codes, f.r.spec.bits);
    write_file(path, out);
}

namespace {

QuantizedMatrix decode_factor_block(ByteReader& reader, std::size_t rows, std::size_t cols,
                                    int bits, double stored_range, const std::string& what,
                                    const char* label) {
    QuantizedMatrix q;
    q.rows = rows;
    q.cols = cols;
    q.all_zero = stored_range == 0.0;
    if (!q.all_zero && (!(stored_range > 0.0) || !std::isfinite(stored_range))) {
        throw IoError(what + ": malformed header (bad dynamic range for the " +
                      std::string(label) + " factor)");
    }
    q.spec = QuantizerSpec(q.all_zero ? 1.0 : stored_range, bits);
    const std::uint8_t* block =
        reader.block(packed_bytes(rows * cols, bits), label);
    q.codes = unpack_codes(block, rows * cols, bits, what);
    return q;
}

} // namespace

Factorization load_factorization(const std::string& path) {
    const std::string bytes = read_file(path);
    ByteReader reader(bytes, path);
    reader.expect_magic("LPLR");
    const std::uint32_t version = reader.u32();
    if (version != kFactorVersion) {
        throw IoError(path + ": unsupported factorization file version " +
                      std::to_string(version));
    }
    const std::uint8_t algo_id = reader.u8();
    if (algo_id > 3) {
        throw IoError(path + ": unknown algorithm id " + std::to_string(algo_id));
    }
    const Algorithm algo = static_cast<Algorithm>(algo_id);
    const bool naive = algo == Algorithm::naive;

    const std::uint64_t n = reader.u64();
    const std::uint64_t m = reader.u64();
    const std::uint64_t d = reader.u64();
    const int bits = reader.u8();
    const int bits_second = reader.u8();
    if (n == 0 || m == 0 || d == 0) {
        throw IoError(path + ": malformed header (zero dimension)");
    }
    if (bits < 1 || bits > 31) {
        throw IoError(path + ": malformed header (left bit width " + std::to_string(bits) + ")");
    }
    if (naive ? bits_second != 0 : (bits_second < 1 || bits_second > 31)) {
        throw IoError(path + ": malformed header (right bit width " +
                      std::to_string(bits_second) + ")");
    }
    if (naive && m != d) {
        throw IoError(path + ": malformed header (entrywise payload needs m = d)");
    }
    const double range_left = reader.f64();
    const double range_right = reader.f64();
    const std::uint8_t has_affine = reader.u8();
    if (has_affine > 1) {
        throw IoError(path + ": malformed header (affine flag " + std::to_string(has_affine) +
                      ")");
    }

    Factorization f;
    f.algorithm = algo;
    if (has_affine == 1) {
        const double alpha = reader.f64();
        const double beta = reader.f64();
        if (!std::isfinite(alpha) || !std::isfinite(beta)) {
            throw IoError(path + ": malformed header (non-finite affine pair)");
        }
        f.alpha = alpha;
        f.beta = beta;
    }

    f.l = decode_factor_block(reader, static_cast<std::size_t>(n),
                              static_cast<std::size_t>(naive ? d : m), bits, range_left, path,
                              "left code block");
    if (!naive) {
        f.r = decode_factor_block(reader, static_cast<std::size_t>(m),
                                  static_cast<std::size_t>(d), bits_second, range_right, path,
                                  "right code block");
    }
    reader.expect_end();
    return f;
}

} // namespace lplr
