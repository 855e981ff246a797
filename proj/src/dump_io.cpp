#include "kivi/dump_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace kivi {

namespace {

// All fields little-endian; assumes a little-endian host (asserted below).
static_assert(std::endian::native == std::endian::little,
              "dump format reader assumes a little-endian host");

template <typename T>
void read_field(std::ifstream& in, T& value, std::uint64_t offset, const char* what) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw FormatError(std::string("truncated dump file while reading ") + what, offset);
}

}  // namespace

std::vector<Matrix> read_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open dump file " + path, 0);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDumpMagic, 4) != 0) {
        throw FormatError("bad magic, expected \"KVQD\"", 0);
    }
    std::uint32_t version = 0;
    read_field(in, version, 4, "version");
    if (version != kDumpVersion) {
        throw FormatError("unsupported version " + std::to_string(version), 4);
    }
    std::uint8_t dtype = 0;
    read_field(in, dtype, 8, "dtype");
    if (dtype != 0) throw FormatError("unsupported dtype " + std::to_string(dtype), 8);
    std::uint8_t ndim = 0;
    read_field(in, ndim, 9, "ndim");
    if (ndim < 1 || ndim > 3) throw FormatError("ndim must be 1, 2 or 3", 9);

    std::uint64_t dims[3] = {1, 1, 1};
    std::uint64_t offset = 10;
    for (std::uint8_t i = 0; i < ndim; ++i, offset += 8) {
        read_field(in, dims[i], offset, "dims");
    }

    std::uint64_t heads = 1, rows = 1, cols = 1;
    if (ndim == 1) {
        cols = dims[0];
    } else if (ndim == 2) {
        rows = dims[0];
        cols = dims[1];
    } else {
        heads = dims[0];
        rows = dims[1];
        cols = dims[2];
    }

    std::vector<Matrix> out;
    out.reserve(heads);
    for (std::uint64_t h = 0; h < heads; ++h) {
        Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
        const std::uint64_t bytes = rows * cols * 4;
        in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(bytes));
        if (!in) {
            throw FormatError("truncated payload",
                              offset + h * bytes + static_cast<std::uint64_t>(in.gcount()));
        }
        require_finite(m, "read_dump(" + path + ")");
        out.push_back(std::move(m));
    }
    return out;
}

void write_dump(const std::string& path, const std::vector<Matrix>& tensors) {
    if (tensors.empty()) throw UsageError("write_dump: no tensors");
    for (const Matrix& m : tensors) {
        if (m.rows() != tensors[0].rows() || m.cols() != tensors[0].cols()) {
            throw ShapeError("write_dump: tensors in one dump must share a shape");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("write_dump: cannot open " + path);

    out.write(kDumpMagic, 4);
    const std::uint32_t version = kDumpVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint8_t dtype = 0;
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    const std::uint8_t ndim = tensors.size() == 1 ? 2 : 3;
    out.write(reinterpret_cast<const char*>(&ndim), 1);
    std::uint64_t dims[3] = {static_cast<std::uint64_t>(tensors.size()),
                             static_cast<std::uint64_t>(tensors[0].rows()),
                             static_cast<std::uint64_t>(tensors[0].cols())};
    const std::uint64_t* first = tensors.size() == 1 ? dims + 1 : dims;
    out.write(reinterpret_cast<const char*>(first), 8 * ndim);
    for (const Matrix& m : tensors) {
        out.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(m.size() * 4));
    }
    if (!out) throw UsageError("write_dump: write failed for " + path);
}

}  // namespace kivi
