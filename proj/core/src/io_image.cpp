#include "endogede/io_image.hpp"

#include <cmath>
#include <fstream>

namespace endogede {

void write_pfm(const std::string& path, const Tensor& img) {
    int H, W, C;
    if (img.rank() == 2) {
        H = img.dim(0); W = img.dim(1); C = 1;
    } else if (img.rank() == 3 && (img.dim(2) == 1 || img.dim(2) == 3)) {
        H = img.dim(0); W = img.dim(1); C = img.dim(2);
    } else {
        throw ShapeError("pfm expects [H,W], [H,W,1] or [H,W,3], got " + shape_str(img.shape()));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << (C == 3 ? "PF" : "Pf") << "\n" << W << " " << H << "\n" << "-1.0" << "\n";
    const float* p = img.data();
    for (int y = H - 1; y >= 0; --y)
        f.write(reinterpret_cast<const char*>(p + static_cast<long long>(y) * W * C),
                static_cast<std::streamsize>(W * C * sizeof(float)));
    if (!f) throw IoError("write failed: " + path);
}

Tensor read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string tag;
    f >> tag;
    int C;
    if (tag == "PF") C = 3;
    else if (tag == "Pf") C = 1;
    else throw IoError("not a pfm file: " + path);
    int W = 0, H = 0;
    double scale = 0.0;
    f >> W >> H >> scale;
    if (!f || W <= 0 || H <= 0) throw IoError("malformed pfm header: " + path);
    if (scale >= 0) throw IoError("big-endian pfm not supported: " + path);
    f.get();  // single whitespace after scale
    Tensor img(Shape{H, W, C});
    float* p = img.data();
    for (int y = H - 1; y >= 0; --y)
        f.read(reinterpret_cast<char*>(p + static_cast<long long>(y) * W * C),
               static_cast<std::streamsize>(W * C * sizeof(float)));
    if (!f) throw IoError("truncated pfm payload: " + path);
    return img;
}

void write_ppm(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.dim(2) != 3)
        throw ShapeError("ppm expects [H,W,3], got " + shape_str(img.shape()));
    int H = img.dim(0), W = img.dim(1);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "P6\n" << W << " " << H << "\n255\n";
    const float* p = img.data();
    std::vector<unsigned char> row(static_cast<size_t>(W) * 3);
    for (int y = 0; y < H; ++y) {
        for (int i = 0; i < W * 3; ++i) {
            float v = p[y * W * 3 + i];
            v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
            row[static_cast<size_t>(i)] =
                static_cast<unsigned char>(std::lround(v * 255.0f));
        }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("write failed: " + path);
}

Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string tag;
    f >> tag;
    if (tag != "P6") throw IoError("not a binary ppm: " + path);
    int W = 0, H = 0, maxval = 0;
    f >> W >> H >> maxval;
    if (!f || W <= 0 || H <= 0 || maxval != 255) throw IoError("malformed ppm header: " + path);
    f.get();
    std::vector<unsigned char> raw(static_cast<size_t>(W) * H * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw IoError("truncated ppm payload: " + path);
    Tensor img(Shape{H, W, 3});
    float* p = img.data();
    for (size_t i = 0; i < raw.size(); ++i) p[i] = static_cast<float>(raw[i]) / 255.0f;
    return img;
}

} // namespace endogede
