#pragma once

#include "s3kit/spec.hpp"

#include <optional>
#include <string>
#include <vector>

namespace s3kit {

/// A spec JSON document:
///   {"view":{"shape":[...],"stride":[...]},"block":[...],"scope":[...],
///    "keep":k,"domain":{...}?,"coupling":[{"tensor":"id","permutation":[...]}]?}
/// plus the optional "phys_size" declaring the target tensor size.
/// Domains are either {"offset":[...],"extent":[...]} or
/// {"layout":{"shape":[...],"stride":[...]},"base_offset":n}.
/// All numbers must be integers; floats are rejected.
struct SpecDocument {
    SparsitySpec spec;

    struct CouplingRef {
        std::string tensor;
        std::vector<std::int64_t> permutation;
    };
    std::vector<CouplingRef> coupling;
};

SpecDocument spec_document_from_json(const std::string& text);
SpecDocument spec_document_from_json_file(const std::string& path);
std::string spec_document_to_json(const SpecDocument& doc, int indent = 2);

std::string spec_to_json(const SparsitySpec& spec, int indent = 2);

/// Binds the physical layout a domain spec embeds into (row-major over the
/// target tensor shape). No-op for domain-free specs.
void bind_phys_shape(SparsitySpec& spec, const std::vector<std::int64_t>& tensor_shape);

}  // namespace s3kit
