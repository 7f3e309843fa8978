#pragma once

// Named tensor archive: the checkpoint container.
//
//   bytes 0..7   magic "NTARCHV1"
//   bytes 8..15  manifest length L, little-endian uint64
//   next L bytes JSON manifest:
//       {"format_version": 1, "metadata": {...},
//        "tensors": [{"name", "shape", "dtype": "f64", "offset", "length"}, ...]}
//   remainder    blob of little-endian IEEE-754 doubles; offsets and lengths
//                are in bytes relative to the start of the blob.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "tocomm/nn/params.hpp"

namespace tocomm::nn {

inline constexpr int kArchiveFormatVersion = 1;

struct Archive {
    ParamStore params;
    nlohmann::json metadata = nlohmann::json::object();
};

std::string encode_archive(const ParamStore& params, const nlohmann::json& metadata);
Archive decode_archive(const std::string& bytes);

void save_archive(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& metadata);
Archive load_archive(const std::filesystem::path& path);

}  // namespace tocomm::nn
