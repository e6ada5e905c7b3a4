#include "endogede/io_npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace endogede {

namespace {

const char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

bool is_little_endian() {
    std::uint16_t v = 1;
    char c;
    std::memcpy(&c, &v, 1);
    return c == 1;
}

} // namespace

void write_npy(const std::string& path, const Tensor& t) {
    if (!is_little_endian()) throw IoError("npy writer requires a little-endian host");
    std::string shape = "(";
    for (size_t i = 0; i < t.shape().size(); ++i) {
        shape += std::to_string(t.shape()[i]);
        if (t.shape().size() == 1 || i + 1 < t.shape().size()) shape += ",";
        if (i + 1 < t.shape().size()) shape += " ";
    }
    shape += ")";
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape + ", }";
    // pad with spaces so magic+version+len+header is a multiple of 64, ending in \n
    size_t base = 6 + 2 + 2;
    size_t total = base + header.size() + 1;
    size_t pad = (64 - total % 64) % 64;
    header.append(pad, ' ');
    header += '\n';

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kMagic, 6);
    f.put('\x01');
    f.put('\x00');
    std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
    f.write(reinterpret_cast<const char*>(&hlen), 2);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!f) throw IoError("write failed: " + path);
}

Tensor read_npy(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, kMagic, 6) != 0) throw IoError("not an npy file: " + path);
    unsigned char ver[2];
    f.read(reinterpret_cast<char*>(ver), 2);
    if (ver[0] != 1) throw IoError("unsupported npy version in " + path);
    std::uint16_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 2);
    std::string header(hlen, '\0');
    f.read(header.data(), hlen);
    if (!f) throw IoError("truncated npy header: " + path);

    auto find_value = [&](const std::string& key) -> std::string {
        size_t k = header.find("'" + key + "'");
        if (k == std::string::npos) throw IoError("npy header missing " + key + ": " + path);
        size_t colon = header.find(':', k);
        return header.substr(colon + 1);
    };

    std::string descr = find_value("descr");
    bool is_f8;
    if (descr.find("'<f4'") != std::string::npos) {
        is_f8 = false;
    } else if (descr.find("'<f8'") != std::string::npos) {
        is_f8 = true;
    } else {
        throw IoError("unsupported npy dtype (want <f4 or <f8): " + path);
    }
    if (find_value("fortran_order").find("False") == std::string::npos)
        throw IoError("fortran-order npy not supported: " + path);

    std::string shp = find_value("shape");
    size_t open = shp.find('('), close = shp.find(')');
    if (open == std::string::npos || close == std::string::npos)
        throw IoError("malformed npy shape: " + path);
    Shape shape;
    std::string inside = shp.substr(open + 1, close - open - 1);
    size_t pos = 0;
    while (pos < inside.size()) {
        while (pos < inside.size() && (inside[pos] == ' ' || inside[pos] == ',')) ++pos;
        if (pos >= inside.size()) break;
        size_t end = pos;
        while (end < inside.size() && isdigit(static_cast<unsigned char>(inside[end]))) ++end;
        if (end == pos) throw IoError("malformed npy shape: " + path);
        shape.push_back(std::stoi(inside.substr(pos, end - pos)));
        pos = end;
    }

    long long n = shape_size(shape);
    std::vector<float> data(static_cast<size_t>(n));
    if (is_f8) {
        std::vector<double> raw(static_cast<size_t>(n));
        f.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size() * sizeof(double)));
        for (size_t i = 0; i < raw.size(); ++i) data[i] = static_cast<float>(raw[i]);
    } else {
        f.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(float)));
    }
    if (!f) throw IoError("truncated npy payload: " + path);
    return Tensor(shape, std::move(data));
}

} // namespace endogede
