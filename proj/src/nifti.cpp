#include "striatum/nifti.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "striatum/image.hpp"

namespace striatum {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kSingleFileOffset = 352;

// Field offsets inside the 348-byte header.
constexpr std::size_t kDimOff = 40;
constexpr std::size_t kDatatypeOff = 70;
constexpr std::size_t kBitpixOff = 72;
constexpr std::size_t kPixdimOff = 76;
constexpr std::size_t kVoxOffsetOff = 108;
constexpr std::size_t kSclSlopeOff = 112;
constexpr std::size_t kSclInterOff = 116;
constexpr std::size_t kMagicOff = 344;

template <typename T>
T byteswap(T v) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

constexpr bool host_little = std::endian::native == std::endian::little;

template <typename T>
T load(const unsigned char* p, bool file_little) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return file_little == host_little ? v : byteswap(v);
}

template <typename T>
void store(unsigned char* p, T v, bool file_little) {
    if (file_little != host_little) v = byteswap(v);
    std::memcpy(p, &v, sizeof(T));
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NiftiError(NiftiError::Kind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int bitpix_for(std::int16_t datatype) {
    switch (static_cast<NiftiDatatype>(datatype)) {
        case NiftiDatatype::UInt8: return 8;
        case NiftiDatatype::Int16: return 16;
        case NiftiDatatype::Float32: return 32;
    }
    return 0;
}

}  // namespace

Volume read_nifti(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = slurp(path);
    const std::string where = path.string();
    if (bytes.size() < kHeaderSize)
        throw NiftiError(NiftiError::Kind::Truncated, where + ": file shorter than the 348-byte header");

    bool little;
    const auto raw_size = load<std::int32_t>(bytes.data(), true);
    if (raw_size == 348)
        little = true;
    else if (byteswap(raw_size) == 348)
        little = false;
    else
        throw NiftiError(NiftiError::Kind::BadHeader,
                         where + ": sizeof_hdr is " + std::to_string(raw_size) + " in either byte order, expected 348");

    const unsigned char* h = bytes.data();
    const bool single_file = std::memcmp(h + kMagicOff, "n+1\0", 4) == 0;
    const bool pair_file = std::memcmp(h + kMagicOff, "ni1\0", 4) == 0;
    if (!single_file && !pair_file) throw NiftiError(NiftiError::Kind::BadMagic, where + ": magic is not \"n+1\" or \"ni1\"");

    std::array<std::int16_t, 8> dim{};
    for (std::size_t i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(h + kDimOff + 2 * i, little);
    if (dim[0] < 3 || dim[0] > 7)
        throw NiftiError(NiftiError::Kind::BadDimensions, where + ": dim[0] = " + std::to_string(dim[0]) + ", need a 3-D volume");
    for (int i = 1; i <= 3; ++i)
        if (dim[static_cast<std::size_t>(i)] < 1)
            throw NiftiError(NiftiError::Kind::BadDimensions, where + ": dim[" + std::to_string(i) + "] must be >= 1");
    for (int i = 4; i <= dim[0]; ++i)
        if (dim[static_cast<std::size_t>(i)] > 1)
            throw NiftiError(NiftiError::Kind::BadDimensions, where + ": only 3-D volumes are supported, dim[" +
                                                                  std::to_string(i) + "] = " +
                                                                  std::to_string(dim[static_cast<std::size_t>(i)]));

    const auto datatype = load<std::int16_t>(h + kDatatypeOff, little);
    const int bitpix = bitpix_for(datatype);
    if (bitpix == 0)
        throw NiftiError(NiftiError::Kind::UnsupportedDatatype,
                         where + ": datatype " + std::to_string(datatype) + " unsupported (need uint8, int16 or float32)");
    if (load<std::int16_t>(h + kBitpixOff, little) != bitpix)
        throw NiftiError(NiftiError::Kind::BadHeader, where + ": bitpix disagrees with datatype");

    const float vox_offset_f = load<float>(h + kVoxOffsetOff, little);
    if (!(vox_offset_f >= 0.0f)) throw NiftiError(NiftiError::Kind::BadHeader, where + ": negative vox_offset");
    const auto vox_offset = static_cast<std::size_t>(vox_offset_f);
    const float slope = load<float>(h + kSclSlopeOff, little);
    const float inter = load<float>(h + kSclInterOff, little);
    const bool scaled = slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f);

    Volume v(static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]), static_cast<std::size_t>(dim[3]));
    v.source_id = where;
    const std::size_t n = v.voxels.size();
    const std::size_t elem = static_cast<std::size_t>(bitpix) / 8;

    std::vector<unsigned char> pair_data;
    const unsigned char* data = nullptr;
    std::size_t available = 0;
    if (single_file) {
        if (vox_offset < kHeaderSize) throw NiftiError(NiftiError::Kind::BadHeader, where + ": vox_offset inside the header");
        available = bytes.size() > vox_offset ? bytes.size() - vox_offset : 0;
        data = bytes.data() + std::min(vox_offset, bytes.size());
    } else {
        std::filesystem::path img = path;
        img.replace_extension(".img");
        pair_data = slurp(img);
        available = pair_data.size() > vox_offset ? pair_data.size() - vox_offset : 0;
        data = pair_data.data() + std::min(vox_offset, pair_data.size());
    }
    if (available < n * elem)
        throw NiftiError(NiftiError::Kind::Truncated, where + ": data section holds " + std::to_string(available) +
                                                          " bytes, need " + std::to_string(n * elem));

    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* p = data + i * elem;
        double raw = 0.0;
        switch (static_cast<NiftiDatatype>(datatype)) {
            case NiftiDatatype::UInt8: raw = *p; break;
            case NiftiDatatype::Int16: raw = load<std::int16_t>(p, little); break;
            case NiftiDatatype::Float32: raw = load<float>(p, little); break;
        }
        if (scaled) raw = static_cast<double>(slope) * raw + static_cast<double>(inter);
        double r = std::isfinite(raw) ? std::round(raw) : 0.0;
        if (!std::isfinite(raw) || r < 0.0 || r > kMaxIntensity) {
            ++v.clamped;
            r = std::clamp(r, 0.0, static_cast<double>(kMaxIntensity));
        }
        v.voxels[i] = static_cast<std::uint16_t>(r);
    }
    return v;
}

void write_nifti(const Volume& volume, const std::filesystem::path& path, NiftiDatatype datatype, Endian endian) {
    if (volume.nx == 0 || volume.ny == 0 || volume.nz == 0 || volume.voxels.size() != volume.nx * volume.ny * volume.nz)
        throw InvalidArgument("write_nifti: volume extents do not match voxel count");
    if (volume.nx > 32767 || volume.ny > 32767 || volume.nz > 32767) throw InvalidArgument("write_nifti: extent too large");
    if (datatype == NiftiDatatype::UInt8 &&
        std::any_of(volume.voxels.begin(), volume.voxels.end(), [](std::uint16_t x) { return x > 255; }))
        throw InvalidArgument("write_nifti: uint8 output needs every voxel <= 255");

    const bool little = endian == Endian::Little;
    const int bitpix = bitpix_for(static_cast<std::int16_t>(datatype));
    const std::size_t elem = static_cast<std::size_t>(bitpix) / 8;
    std::vector<unsigned char> buf(kSingleFileOffset + volume.voxels.size() * elem, 0);
    unsigned char* h = buf.data();

    store<std::int32_t>(h, 348, little);
    const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(volume.nx), static_cast<std::int16_t>(volume.ny),
                                          static_cast<std::int16_t>(volume.nz), 1, 1, 1, 1};
    for (std::size_t i = 0; i < 8; ++i) store<std::int16_t>(h + kDimOff + 2 * i, dim[i], little);
    store<std::int16_t>(h + kDatatypeOff, static_cast<std::int16_t>(datatype), little);
    store<std::int16_t>(h + kBitpixOff, static_cast<std::int16_t>(bitpix), little);
    const std::array<float, 8> pixdim{1.0f, 2.0f, 2.0f, 2.0f, 1.0f, 1.0f, 1.0f, 1.0f};  // 2 mm isotropic
    for (std::size_t i = 0; i < 8; ++i) store<float>(h + kPixdimOff + 4 * i, pixdim[i], little);
    store<float>(h + kVoxOffsetOff, static_cast<float>(kSingleFileOffset), little);
    store<float>(h + kSclSlopeOff, 0.0f, little);
    store<float>(h + kSclInterOff, 0.0f, little);
    std::memcpy(h + kMagicOff, "n+1\0", 4);

    unsigned char* d = buf.data() + kSingleFileOffset;
    for (std::size_t i = 0; i < volume.voxels.size(); ++i) {
        const std::uint16_t x = volume.voxels[i];
        switch (datatype) {
            case NiftiDatatype::UInt8: d[i] = static_cast<unsigned char>(x); break;
            case NiftiDatatype::Int16: store<std::int16_t>(d + 2 * i, static_cast<std::int16_t>(x), little); break;
            case NiftiDatatype::Float32: store<float>(d + 4 * i, static_cast<float>(x), little); break;
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace striatum
