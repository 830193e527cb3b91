#include "s3kit/skt.hpp"

#include "s3kit/errors.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

namespace s3kit {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'T', 'E', 'N', 'S', 'R', '\0'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t read_u32_le(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated SKT file: " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::size_t dtype_bytes(const std::string& dtype) {
    if (dtype == "f32") return 4;
    if (dtype == "f64") return 8;
    throw ParseError("unsupported dtype \"" + dtype + "\" (expected f32 or f64)");
}

}  // namespace

std::int64_t TensorFile::element_count() const {
    std::int64_t n = 1;
    for (std::int64_t s : shape) n *= s;
    return n;
}

TensorFile TensorFile::f32(std::vector<std::int64_t> shape, std::vector<double> data) {
    return TensorFile{"f32", std::move(shape), std::move(data), std::nullopt};
}

TensorFile TensorFile::f64(std::vector<std::int64_t> shape, std::vector<double> data) {
    return TensorFile{"f64", std::move(shape), std::move(data), std::nullopt};
}

TensorFile skt_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw ParseError(path + ": bad SKT magic");
    }
    if (read_u32_le(in, "version") != kVersion) throw ParseError(path + ": unsupported version");
    const std::uint32_t header_len = read_u32_le(in, "header length");

    std::string header(header_len, '\0');
    if (!in.read(header.data(), header_len)) throw ParseError(path + ": truncated header");

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": bad header JSON: " + e.what());
    }
    if (!j.contains("dtype") || !j.contains("shape") || !j["dtype"].is_string() ||
        !j["shape"].is_array() || j["shape"].empty()) {
        throw ParseError(path + ": header needs dtype and non-empty shape");
    }

    TensorFile t;
    t.dtype = j["dtype"].get<std::string>();
    const std::size_t elem_bytes = dtype_bytes(t.dtype);
    for (const auto& e : j["shape"]) {
        if (!e.is_number_integer() || e.get<std::int64_t>() < 1) {
            throw ParseError(path + ": shape entries must be positive integers");
        }
        t.shape.push_back(e.get<std::int64_t>());
    }
    t.raw_header = header;

    const std::int64_t n = t.element_count();
    std::vector<char> payload(static_cast<std::size_t>(n) * elem_bytes);
    if (!in.read(payload.data(), static_cast<std::streamsize>(payload.size()))) {
        throw ParseError(path + ": payload shorter than header declares");
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
        throw ParseError(path + ": trailing bytes after payload");
    }

    t.data.resize(static_cast<std::size_t>(n));
    if (t.dtype == "f32") {
        for (std::int64_t i = 0; i < n; ++i) {
            float v;
            std::memcpy(&v, payload.data() + i * 4, 4);
            t.data[static_cast<std::size_t>(i)] = static_cast<double>(v);
        }
    } else {
        std::memcpy(t.data.data(), payload.data(), payload.size());
    }
    return t;
}

void skt_write(const std::string& path, const TensorFile& tensor) {
    if (tensor.shape.empty()) throw IoError("cannot write tensor with empty shape");
    const std::size_t elem_bytes = dtype_bytes(tensor.dtype);
    const std::int64_t n = tensor.element_count();
    if (static_cast<std::int64_t>(tensor.data.size()) != n) {
        throw IoError("payload length does not match shape");
    }

    std::string header;
    if (tensor.raw_header) {
        header = *tensor.raw_header;
    } else {
        header = nlohmann::json{{"dtype", tensor.dtype}, {"shape", tensor.shape}}.dump();
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 8);
    write_u32_le(out, kVersion);
    write_u32_le(out, static_cast<std::uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    if (tensor.dtype == "f32") {
        std::vector<char> payload(static_cast<std::size_t>(n) * elem_bytes);
        for (std::int64_t i = 0; i < n; ++i) {
            float v = static_cast<float>(tensor.data[static_cast<std::size_t>(i)]);
            std::memcpy(payload.data() + i * 4, &v, 4);
        }
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    } else {
        out.write(reinterpret_cast<const char*>(tensor.data.data()),
                  static_cast<std::streamsize>(tensor.data.size() * 8));
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace s3kit
