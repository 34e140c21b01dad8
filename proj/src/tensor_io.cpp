#include "dcscan/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace dcscan {

namespace {

// This codebase only targets little-endian hosts; fail loudly otherwise.
bool host_is_little_endian() {
    std::uint32_t x = 1;
    char c;
    std::memcpy(&c, &x, 1);
    return c == 1;
}

}  // namespace

void write_dct1(const std::string& path, const Tensor& t) {
    check_run(host_is_little_endian(), "dct1: big-endian hosts unsupported");
    std::ofstream f(path, std::ios::binary);
    check_run(f.good(), "dct1: cannot open '" + path + "' for writing");
    f.write("DCT1", 4);
    std::uint32_t rank = static_cast<std::uint32_t>(t.rank());
    f.write(reinterpret_cast<const char*>(&rank), 4);
    for (std::size_t e : t.shape()) {
        std::uint32_t v = static_cast<std::uint32_t>(e);
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    check_run(f.good(), "dct1: write failed for '" + path + "'");
}

Tensor read_dct1(const std::string& path) {
    check_run(host_is_little_endian(), "dct1: big-endian hosts unsupported");
    std::ifstream f(path, std::ios::binary);
    check_run(f.good(), "dct1: cannot open '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    check_run(f.gcount() == 4 && std::memcmp(magic, "DCT1", 4) == 0,
              "dct1: bad magic at byte 0 in '" + path + "'");
    std::uint32_t rank = 0;
    f.read(reinterpret_cast<char*>(&rank), 4);
    check_run(f.gcount() == 4, "dct1: truncated rank at byte 4 in '" + path + "'");
    check_run(rank <= 8, "dct1: implausible rank in '" + path + "'");
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        check_run(f.gcount() == 4,
                  "dct1: truncated extent at byte " + std::to_string(8 + 4 * i) + " in '" + path +
                      "'");
        shape[i] = v;
    }
    std::size_t n = shape_numel(shape);
    Buffer data(n);
    f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check_run(static_cast<std::size_t>(f.gcount()) == n * sizeof(double),
              "dct1: truncated payload at byte " + std::to_string(8 + 4 * rank) + " in '" + path +
                  "'");
    return Tensor::from(std::move(shape), std::move(data));
}

}  // namespace dcscan
