#include "s3kit/json_io.hpp"

#include "s3kit/errors.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace s3kit {

namespace {

using nlohmann::json;

std::int64_t as_int(const json& j, const std::string& where) {
    if (!j.is_number_integer()) {
        throw ParseError(where + ": expected an integer, got " + j.dump());
    }
    return j.get<std::int64_t>();
}

std::vector<std::int64_t> as_int_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": expected an array");
    std::vector<std::int64_t> out;
    out.reserve(j.size());
    for (const auto& e : j) out.push_back(as_int(e, where));
    return out;
}

Layout layout_from(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("shape") || !j.contains("stride")) {
        throw ParseError(where + ": expected {\"shape\":[...],\"stride\":[...]}");
    }
    try {
        return Layout(as_int_vector(j["shape"], where + ".shape"),
                      as_int_vector(j["stride"], where + ".stride"));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(where + ": " + e.what());
    }
}

json layout_to(const Layout& l) {
    return json{{"shape", l.shape()}, {"stride", l.stride()}};
}

}  // namespace

SpecDocument spec_document_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("spec document must be a JSON object");
    for (const std::string key : {"view", "block", "scope", "keep"}) {
        if (!j.contains(key)) throw ParseError("spec document missing \"" + key + "\"");
    }

    SpecDocument doc{SparsitySpec{layout_from(j["view"], "view"),
                                  as_int_vector(j["block"], "block"),
                                  as_int_vector(j["scope"], "scope"),
                                  as_int(j["keep"], "keep"),
                                  std::nullopt,
                                  std::nullopt,
                                  std::nullopt},
                     {}};

    if (j.contains("phys_size")) {
        doc.spec.declared_phys_size = as_int(j["phys_size"], "phys_size");
    }
    if (j.contains("domain")) {
        const json& d = j["domain"];
        if (d.is_object() && d.contains("offset") && d.contains("extent")) {
            doc.spec.domain = DomainSpec{as_int_vector(d["offset"], "domain.offset"),
                                         as_int_vector(d["extent"], "domain.extent")};
        } else if (d.is_object() && d.contains("layout") && d.contains("base_offset")) {
            doc.spec.domain = GeneralizedDomain{layout_from(d["layout"], "domain.layout"),
                                                as_int(d["base_offset"], "domain.base_offset")};
        } else {
            throw ParseError("domain must carry offset/extent or layout/base_offset");
        }
    }
    if (j.contains("coupling")) {
        if (!j["coupling"].is_array()) throw ParseError("coupling must be an array");
        for (const auto& m : j["coupling"]) {
            if (!m.is_object() || !m.contains("tensor") || !m.contains("permutation") ||
                !m["tensor"].is_string()) {
                throw ParseError("coupling entries need \"tensor\" and \"permutation\"");
            }
            doc.coupling.push_back({m["tensor"].get<std::string>(),
                                    as_int_vector(m["permutation"], "coupling.permutation")});
        }
    }
    return doc;
}

SpecDocument spec_document_from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return spec_document_from_json(buf.str());
}

std::string spec_document_to_json(const SpecDocument& doc, int indent) {
    json j;
    j["view"] = layout_to(doc.spec.view);
    j["block"] = doc.spec.block;
    j["scope"] = doc.spec.scope;
    j["keep"] = doc.spec.keep;
    if (doc.spec.declared_phys_size) j["phys_size"] = *doc.spec.declared_phys_size;
    if (doc.spec.domain) {
        if (const auto* d = std::get_if<DomainSpec>(&*doc.spec.domain)) {
            j["domain"] = json{{"offset", d->offset}, {"extent", d->extent}};
        } else {
            const auto& g = std::get<GeneralizedDomain>(*doc.spec.domain);
            j["domain"] = json{{"layout", layout_to(g.layout)}, {"base_offset", g.base_offset}};
        }
    }
    if (!doc.coupling.empty()) {
        json arr = json::array();
        for (const auto& m : doc.coupling) {
            arr.push_back(json{{"tensor", m.tensor}, {"permutation", m.permutation}});
        }
        j["coupling"] = arr;
    }
    return j.dump(indent);
}

std::string spec_to_json(const SparsitySpec& spec, int indent) {
    return spec_document_to_json(SpecDocument{spec, {}}, indent);
}

void bind_phys_shape(SparsitySpec& spec, const std::vector<std::int64_t>& tensor_shape) {
    if (!spec.domain) {
        spec.declared_phys_size = Layout::row_major(tensor_shape).size();
        return;
    }
    spec.phys = Layout::row_major(tensor_shape);
}

}  // namespace s3kit
