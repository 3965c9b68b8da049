#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "striatum/image.hpp"
#include "striatum/nifti.hpp"

namespace striatum {

/// Un-normalized axial image (rows = Y, cols = X). Averages are not integral.
struct RawImage {
    std::size_t rows = 0, cols = 0;
    std::vector<double> values;
};

/// Slice indices are 0-based offsets into the axial (Z) axis; `index_offset`
/// is added to every index (use -1 for 1-based numbering). `flip_rows`
/// reverses the Y axis for exports with the opposite in-plane orientation.
struct SliceOptions {
    int first = 35;
    int last = 48;
    int single = 41;
    int index_offset = 0;
    bool flip_rows = false;
};

/// AverageSlices: arithmetic mean over slices first..last inclusive.
/// SingleSlice: the slice at `single`.
RawImage select_slices(const Volume& volume, PreprocTag mode, const SliceOptions& options = {});

/// Divide by 2^15 - 1. Inputs must already lie in [0, 2^15 - 1].
SliceImage normalize(const RawImage& raw, PreprocTag tag, std::string source_id = {});

struct ManifestRow {
    std::string path;  // relative paths resolve against Manifest::base_dir
    ClassLabel label = ClassLabel::Normal;
    std::string subject_id;
    std::string visit;
};

struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestRow> rows;
};

/// CSV with header `path,label,subject_id,visit`; labels normal|pd|swedd (any case).
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

struct ClassCounts {
    std::size_t normal = 0, pd = 0, swedd = 0;
    friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

ClassCounts count_classes(const std::vector<LabeledSample>& samples);

struct Dataset {
    std::vector<LabeledSample> samples;
    ClassCounts counts;
    std::size_t clamped_voxels = 0;
};

/// read -> select -> normalize per row. SWEDD rows become hold-out. Volumes
/// must be 91 x 109 x 91. Clamping warnings go to `warnings` when non-null.
Dataset load_dataset(const Manifest& manifest, PreprocTag mode, const SliceOptions& options = {},
                     std::ostream* warnings = nullptr);

}  // namespace striatum
