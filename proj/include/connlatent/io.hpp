#pragma once

#include "connlatent/common.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace connlatent {

inline std::string fmt_double(double v, int precision = 17) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    fields.push_back(current);
    return fields;
}

inline double parse_double(const std::string& token, const std::string& context) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw ParseError("invalid number '" + token + "' " + context);
    }
    return v;
}

inline long parse_long(const std::string& token, const std::string& context) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0') {
        throw ParseError("invalid integer '" + token + "' " + context);
    }
    return v;
}

namespace detail {

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
    std::array<unsigned char, 8> bytes;
    for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes.data()), 8);
}

inline std::uint64_t read_u64_le(std::istream& in) {
    std::array<unsigned char, 8> bytes;
    in.read(reinterpret_cast<char*>(bytes.data()), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

inline void write_f64_le(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64_le(out, bits);
}

inline double read_f64_le(std::istream& in) {
    const std::uint64_t bits = read_u64_le(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void write_f32_le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    std::array<unsigned char, 4> bytes;
    for (int i = 0; i < 4; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes.data()), 4);
}

inline float read_f32_le(std::istream& in) {
    std::array<unsigned char, 4> bytes;
    in.read(reinterpret_cast<char*>(bytes.data()), 4);
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace detail

inline constexpr char kFeatureMatrixMagic[9] = "CONNLAT1";

// Binary feature matrix: 8-byte magic, rows/cols as little-endian u64, then
// row-major little-endian IEEE-754 f32.
inline void write_feature_matrix_binary(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(kFeatureMatrixMagic, 8);
    detail::write_u64_le(out, static_cast<std::uint64_t>(m.rows()));
    detail::write_u64_le(out, static_cast<std::uint64_t>(m.cols()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) detail::write_f32_le(out, static_cast<float>(m(r, c)));
    if (!out) throw DataError("short write to '" + path + "'");
}

inline Matrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    Index cols = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields)
            row.push_back(parse_double(f, "at " + path + " line " + std::to_string(line_no)));
        if (cols < 0) {
            cols = static_cast<Index>(row.size());
        } else if (static_cast<Index>(row.size()) != cols) {
            throw ShapeError(path + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(cols) + " columns, found " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Index>(rows.size()), cols < 0 ? 0 : cols);
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

// Loads a feature matrix, auto-detecting the binary format by its magic and
// falling back to headerless CSV.
inline Matrix read_feature_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    char magic[8] = {};
    in.read(magic, 8);
    if (in.gcount() == 8 && std::memcmp(magic, kFeatureMatrixMagic, 8) == 0) {
        const std::uint64_t rows = detail::read_u64_le(in);
        const std::uint64_t cols = detail::read_u64_le(in);
        Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
        for (Index r = 0; r < m.rows(); ++r)
            for (Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<double>(detail::read_f32_le(in));
        if (!in) throw DataError("truncated feature matrix '" + path + "'");
        return m;
    }
    return read_matrix_csv(path);
}

inline void write_matrix_csv(const std::string& path, const Matrix& m, int precision = 17) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << fmt_double(m(r, c), precision);
        }
        out << '\n';
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace connlatent
