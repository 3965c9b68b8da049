#pragma once

// Versioned model container. Layout (all integers little-endian):
//
//   "STRIATUM"          8 bytes
//   major, minor        u32, u32
//   header_len          u64
//   header              header_len bytes of UTF-8 JSON
//   blobs               float64 little-endian, in header "tensors" order
//   checksum            u64 FNV-1a over every preceding byte
//
// docs/model-format.md describes the header keys.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "striatum/classifiers.hpp"
#include "striatum/error.hpp"

namespace striatum {

inline constexpr std::uint32_t kModelFormatMajor = 1;
inline constexpr std::uint32_t kModelFormatMinor = 0;

class ModelFormatError : public IoError {
public:
    enum class Kind { BadMagic, Version, Truncated, Checksum, BadHeader };
    ModelFormatError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

std::vector<unsigned char> serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::span<const unsigned char> bytes);

/// Writes to a temporary sibling and renames, so a failed save leaves no partial file.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

}  // namespace striatum
