#include "gas/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "gas/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "npy I/O assumes a little-endian host");

namespace gas {

namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::vector<long long> parse_shape(const std::string& header) {
    const auto open = header.find('(');
    const auto close = header.find(')', open);
    if (open == std::string::npos || close == std::string::npos) {
        throw ParseError("npy header missing shape tuple", header);
    }
    std::vector<long long> dims;
    std::string token;
    for (std::size_t i = open + 1; i < close; ++i) {
        const char c = header[i];
        if (c == ',' || c == ' ') {
            if (!token.empty()) {
                dims.push_back(std::stoll(token));
                token.clear();
            }
        } else {
            token.push_back(c);
        }
    }
    if (!token.empty()) dims.push_back(std::stoll(token));
    return dims;
}

}  // namespace

LatentGrid load_latent_npy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open latent file: " + path);

    char magic[6];
    std::uint8_t version[2];
    in.read(magic, 6);
    in.read(reinterpret_cast<char*>(version), 2);
    if (!in || std::memcmp(magic, kMagic, 6) != 0) {
        throw ParseError("not an npy file: " + path, "");
    }
    std::uint32_t header_len = 0;
    if (version[0] == 1) {
        std::uint8_t len16[2];
        in.read(reinterpret_cast<char*>(len16), 2);
        header_len = len16[0] | (std::uint32_t(len16[1]) << 8);
    } else if (version[0] == 2) {
        std::uint8_t len32[4];
        in.read(reinterpret_cast<char*>(len32), 4);
        header_len = len32[0] | (std::uint32_t(len32[1]) << 8) | (std::uint32_t(len32[2]) << 16) |
                     (std::uint32_t(len32[3]) << 24);
    } else {
        throw ParseError("unsupported npy version", "");
    }
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw ParseError("truncated npy header: " + path, header);

    if (header.find("'fortran_order': True") != std::string::npos) {
        throw ParseError("Fortran-ordered npy is not supported", header);
    }
    const bool is_f4 = header.find("'<f4'") != std::string::npos;
    const bool is_f8 = header.find("'<f8'") != std::string::npos;
    if (!is_f4 && !is_f8) {
        throw ParseError("latent npy must be little-endian float32 or float64", header);
    }

    const std::vector<long long> dims = parse_shape(header);
    if (dims.size() != 3 || dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) {
        throw ParseError("latent npy must have shape (channels, height, width)", header);
    }
    const std::size_t count = std::size_t(dims[0]) * std::size_t(dims[1]) * std::size_t(dims[2]);

    std::vector<double> values(count);
    if (is_f4) {
        std::vector<float> raw(count);
        in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(count * sizeof(float)));
        if (!in) throw ParseError("truncated npy payload: " + path, "");
        for (std::size_t i = 0; i < count; ++i) values[i] = double(raw[i]);
    } else {
        in.read(reinterpret_cast<char*>(values.data()), std::streamsize(count * sizeof(double)));
        if (!in) throw ParseError("truncated npy payload: " + path, "");
    }

    LatentGrid grid =
        LatentGrid::from_values(int(dims[0]), int(dims[1]), int(dims[2]), std::move(values));
    if (!grid.all_finite()) {
        throw Error(ErrorCode::invalid_argument, "latent file contains non-finite values: " + path);
    }
    return grid;
}

void save_latent_npy(const std::string& path, const LatentGrid& grid) {
    std::ostringstream dict;
    dict << "{'descr': '<f8', 'fortran_order': False, 'shape': (" << grid.channels() << ", "
         << grid.height() << ", " << grid.width() << "), }";
    std::string header = dict.str();
    const std::size_t unpadded = 6 + 2 + 2 + header.size() + 1;
    const std::size_t padded = (unpadded + 63) / 64 * 64;
    header.append(padded - unpadded, ' ');
    header.push_back('\n');

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::invalid_argument, "cannot write latent file: " + path);
    out.write(kMagic, 6);
    const std::uint8_t version[2] = {1, 0};
    out.write(reinterpret_cast<const char*>(version), 2);
    const std::uint16_t len = std::uint16_t(header.size());
    const std::uint8_t len_bytes[2] = {std::uint8_t(len & 0xff), std::uint8_t(len >> 8)};
    out.write(reinterpret_cast<const char*>(len_bytes), 2);
    out.write(header.data(), std::streamsize(header.size()));
    out.write(reinterpret_cast<const char*>(grid.values().data()),
              std::streamsize(grid.size() * sizeof(double)));
    if (!out) throw Error(ErrorCode::invalid_argument, "failed writing latent file: " + path);
}

}  // namespace gas
