#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace s3kit {

/// SKT tensor container:
///   magic "SKTENSR\0" | u32 LE version = 1 | u32 LE header_len |
///   UTF-8 JSON header {"dtype":"f32"|"f64","shape":[...]} |
///   raw little-endian payload, row-major (last dimension fastest).
struct TensorFile {
    std::string dtype;  // "f32" or "f64"
    std::vector<std::int64_t> shape;
    std::vector<double> data;  // payload widened to f64

    /// Original header bytes, kept so write(read(f)) reproduces f exactly.
    std::optional<std::string> raw_header;

    std::int64_t element_count() const;

    static TensorFile f32(std::vector<std::int64_t> shape, std::vector<double> data);
    static TensorFile f64(std::vector<std::int64_t> shape, std::vector<double> data);
};

TensorFile skt_read(const std::string& path);
void skt_write(const std::string& path, const TensorFile& tensor);

}  // namespace s3kit
