#include "tocomm/nn/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tocomm::nn {
namespace {

constexpr char kMagic[8] = {'N', 'T', 'A', 'R', 'C', 'H', 'V', '1'};

void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void put_f64_le(std::string& out, double d) { put_u64_le(out, std::bit_cast<std::uint64_t>(d)); }

}  // namespace

std::string encode_archive(const ParamStore& params, const nlohmann::json& metadata) {
    nlohmann::json manifest;
    manifest["format_version"] = kArchiveFormatVersion;
    manifest["metadata"] = metadata.is_null() ? nlohmann::json::object() : metadata;
    manifest["tensors"] = nlohmann::json::array();
    std::string blob;
    for (const auto& [name, p] : params) {
        const std::uint64_t offset = blob.size();
        for (double v : p.value.data()) put_f64_le(blob, v);
        manifest["tensors"].push_back({{"name", name},
                                       {"shape", p.value.shape()},
                                       {"dtype", "f64"},
                                       {"offset", offset},
                                       {"length", blob.size() - offset}});
    }
    const std::string text = manifest.dump();
    std::string out(kMagic, sizeof(kMagic));
    put_u64_le(out, text.size());
    out += text;
    out += blob;
    return out;
}

Archive decode_archive(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("archive: bad magic");
    }
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint64_t manifest_len = get_u64_le(raw + 8);
    if (manifest_len > bytes.size() - 16) throw std::runtime_error("archive: truncated manifest");
    const nlohmann::json manifest = nlohmann::json::parse(bytes.substr(16, manifest_len));
    if (manifest.at("format_version").get<int>() != kArchiveFormatVersion) {
        throw std::runtime_error("archive: unsupported format version");
    }
    const std::size_t blob_start = 16 + manifest_len;
    const std::size_t blob_size = bytes.size() - blob_start;

    Archive archive;
    archive.metadata = manifest.value("metadata", nlohmann::json::object());
    for (const auto& entry : manifest.at("tensors")) {
        if (entry.at("dtype").get<std::string>() != "f64") throw std::runtime_error("archive: unsupported dtype");
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        const auto length = entry.at("length").get<std::uint64_t>();
        const std::size_t count = shape_product(shape);
        if (length != count * 8 || offset > blob_size || length > blob_size - offset) {
            throw std::runtime_error("archive: tensor '" + entry.at("name").get<std::string>() + "' out of bounds");
        }
        std::vector<double> values(count);
        for (std::size_t i = 0; i < count; ++i) {
            values[i] = std::bit_cast<double>(get_u64_le(raw + blob_start + offset + 8 * i));
        }
        archive.params.add(entry.at("name").get<std::string>(), Tensor(shape, std::move(values)));
    }
    return archive;
}

void save_archive(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& metadata) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("archive: cannot open " + path.string() + " for writing");
    const std::string bytes = encode_archive(params, metadata);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("archive: write failed for " + path.string());
}

Archive load_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("archive: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return decode_archive(buf.str());
}

}  // namespace tocomm::nn
