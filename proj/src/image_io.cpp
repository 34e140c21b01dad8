#include "dcscan/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

namespace dcscan {

namespace {

void write_p5(const std::string& path, std::size_t h, std::size_t w,
              const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    check_run(f.good(), "pgm: cannot open '" + path + "' for writing");
    f << "P5\n" << w << " " << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    check_run(f.good(), "pgm: write failed for '" + path + "'");
}

struct P5Data {
    std::size_t h, w;
    std::vector<std::uint8_t> bytes;
};

// Minimal P5 reader: '#' comments allowed between header tokens.
P5Data read_p5(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check_run(f.good(), "pgm: cannot open '" + path + "'");
    auto fail = [&](const std::string& what) {
        std::streamoff off = f.tellg();
        check_run(false,
                  "pgm: " + what + " at byte " + std::to_string(off < 0 ? 0 : off) + " in '" +
                      path + "'");
    };
    auto next_token = [&]() -> std::string {
        std::string tok;
        char c;
        while (f.get(c)) {
            if (c == '#') {
                while (f.get(c) && c != '\n') {
                }
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(c);
        }
        return tok;
    };
    if (next_token() != "P5") fail("not a binary PGM (want magic P5)");
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(next_token());
        h = std::stoul(next_token());
        maxval = std::stoul(next_token());
    } catch (const std::exception&) {
        fail("malformed header field");
    }
    if (w == 0 || h == 0) fail("zero extent");
    if (maxval != 255) fail("unsupported maxval (want 255)");
    P5Data d;
    d.h = h;
    d.w = w;
    d.bytes.resize(h * w);
    f.read(reinterpret_cast<char*>(d.bytes.data()), static_cast<std::streamsize>(h * w));
    if (static_cast<std::size_t>(f.gcount()) != h * w) fail("truncated pixel payload");
    return d;
}

}  // namespace

void write_pgm(const std::string& path, const Tensor& img) {
    check_arg(img.rank() == 2, "pgm: image must be [H,W]");
    std::vector<std::uint8_t> bytes(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        double v = std::min(1.0, std::max(0.0, img.at(i)));
        // truncating quantizer: 0.5 -> 127
        bytes[i] = static_cast<std::uint8_t>(std::min(255.0, std::floor(v * 255.0)));
    }
    write_p5(path, img.extent(0), img.extent(1), bytes);
}

Tensor read_pgm(const std::string& path) {
    P5Data d = read_p5(path);
    Tensor img = Tensor::zeros({d.h, d.w});
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data_mut()[i] = static_cast<double>(d.bytes[i]) / 255.0;
    return img;
}

void write_pgm_indexed(const std::string& path, const IntGrid& grid) {
    check_arg(grid.shape.size() == 2, "pgm: grid must be [H,W]");
    std::vector<std::uint8_t> bytes(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        check_arg(grid.v[i] >= 0 && grid.v[i] <= 255, "pgm: class index out of byte range");
        bytes[i] = static_cast<std::uint8_t>(grid.v[i]);
    }
    write_p5(path, grid.shape[0], grid.shape[1], bytes);
}

IntGrid read_pgm_indexed(const std::string& path) {
    P5Data d = read_p5(path);
    IntGrid g = IntGrid::zeros({d.h, d.w});
    for (std::size_t i = 0; i < g.size(); ++i) g.v[i] = d.bytes[i];
    return g;
}

}  // namespace dcscan
