#pragma once

// Minimal NIfTI-1 single-file (.nii, magic "n+1") and header/image pair
// (.hdr/.img, magic "ni1") support for 3-D scalar volumes.
//
// Supported datatypes: uint8 (2), int16 (4), float32 (16). Byte order is
// detected from sizeof_hdr. scl_slope/scl_inter are applied when the slope is
// nonzero. Values are rounded and clamped to [0, 2^15 - 1]; the number of
// clamped voxels is reported in Volume::clamped.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "striatum/error.hpp"

namespace striatum {

struct Volume {
    std::size_t nx = 0, ny = 0, nz = 0;
    std::vector<std::uint16_t> voxels;  // x fastest, then y, then z
    std::string source_id;
    std::size_t clamped = 0;

    Volume() = default;
    Volume(std::size_t x, std::size_t y, std::size_t z, std::uint16_t fill = 0)
        : nx(x), ny(y), nz(z), voxels(x * y * z, fill) {}

    std::uint16_t& at(std::size_t x, std::size_t y, std::size_t z) { return voxels[(z * ny + y) * nx + x]; }
    std::uint16_t at(std::size_t x, std::size_t y, std::size_t z) const { return voxels[(z * ny + y) * nx + x]; }
};

enum class NiftiDatatype : std::int16_t { UInt8 = 2, Int16 = 4, Float32 = 16 };
enum class Endian { Little, Big };

class NiftiError : public IoError {
public:
    enum class Kind { Io, BadHeader, BadMagic, UnsupportedDatatype, BadDimensions, Truncated };
    NiftiError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

Volume read_nifti(const std::filesystem::path& path);

/// Writes a single-file .nii (vox_offset 352). UInt8 requires every voxel <= 255.
void write_nifti(const Volume& volume, const std::filesystem::path& path, NiftiDatatype datatype = NiftiDatatype::Int16,
                 Endian endian = Endian::Little);

}  // namespace striatum
