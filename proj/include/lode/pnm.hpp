#pragma once

// Binary PNM primitives shared by the mask (P5, 8-bit), depth (P5, 16-bit
// big-endian) and overlay (P6) readers/writers.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "lode/errors.hpp"

namespace lode::pnm {

struct Header {
    int width = 0;
    int height = 0;
    int maxval = 0;
};

namespace detail {

// Next whitespace-delimited token; '#' starts a comment running to end of
// line. Consumes exactly one whitespace character after the token, so raw
// payload reads can start right after the maxval token.
inline std::string next_token(std::istream& in) {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty())
                break;
            continue;
        }
        token.push_back(static_cast<char>(c));
    }
    if (token.empty())
        throw IoError("malformed PNM header");
    return token;
}

inline int next_int(std::istream& in) {
    const std::string token = next_token(in);
    try {
        std::size_t pos = 0;
        const int value = std::stoi(token, &pos);
        if (pos != token.size())
            throw std::invalid_argument(token);
        return value;
    } catch (const std::exception&) {
        throw IoError("malformed PNM header: expected integer, got '" + token + "'");
    }
}

} // namespace detail

inline Header read_header(std::istream& in, const std::string& expected_magic) {
    const std::string magic = detail::next_token(in);
    if (magic != expected_magic)
        throw IoError("malformed PNM header: expected " + expected_magic + ", got " + magic);
    Header h;
    h.width = detail::next_int(in);
    h.height = detail::next_int(in);
    h.maxval = detail::next_int(in);
    if (h.width <= 0 || h.height <= 0)
        throw IoError("malformed PNM header: non-positive dimensions");
    return h;
}

inline std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t bytes) {
    std::vector<std::uint8_t> buf(bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
        throw IoError("truncated PNM payload");
    return buf;
}

inline void write_header(std::ostream& out, const std::string& magic, int width, int height,
                         int maxval) {
    out << magic << "\n" << width << " " << height << "\n" << maxval << "\n";
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open file for writing: " + path);
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open file: " + path);
    return in;
}

} // namespace lode::pnm
