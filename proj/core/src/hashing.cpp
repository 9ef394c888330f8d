#include "bsdelab/hashing.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

namespace bsdelab {

std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
    std::uint64_t state = kFnvOffsetBasis;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        state = fnv1a64(buf.data(), static_cast<std::size_t>(in.gcount()), state);
    }
    return state;
}

} // namespace bsdelab
