#pragma once

// Synthetic striatal-uptake phantoms. A normal-like image has two mirrored
// "comma" shapes (an elliptical head plus a curved tail) at high intensity on
// a low background; the PD-like variant attenuates the tails by (1 - severity),
// shrinks and rounds the heads, and makes one side weaker. SWEDD-like samples
// use the normal-like geometry.
//
// Every random draw is made in the same order for all classes, so with
// severity 0 a PD-like sample equals the normal-like sample of the same seed.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "striatum/image.hpp"
#include "striatum/ingest.hpp"
#include "striatum/nifti.hpp"

namespace striatum {

enum class PhantomClass { NormalLike, PDLike, SweddLike };
enum class PhantomEmit { Slice, Volume };

ClassLabel label_for(PhantomClass cls);

struct PhantomConfig {
    PhantomClass cls = PhantomClass::NormalLike;
    std::size_t n = 1;
    std::size_t first = 0;  // index of the first sample; samples are first .. first + n - 1
    std::uint64_t seed = 0;
    double noise_sigma = 0.02;  // fraction of 2^15 - 1
    double severity = 0.7;
    PhantomEmit emit = PhantomEmit::Slice;

    void validate() const;
};

struct CommaParams {
    double head_row, head_col;         // ellipse centre
    double head_radius_r, head_radius_c;
    double head_intensity;
    double tail_intensity;
};

struct PhantomSample {
    PhantomClass true_class = PhantomClass::NormalLike;
    std::size_t index = 0;
    RawImage image;               // Slice mode: the peak slice (integers in [0, 32767])
    std::optional<Volume> volume; // Volume mode
    CommaParams left{}, right{};
    double background = 0.0;
    int weaker_side = 0;          // -1 left, +1 right (PD-like asymmetry)
    double asymmetry = 0.0;       // extra attenuation applied to the weaker side
};

/// Per-sample seeds are derive_seed(cfg.seed, index), so a cohort generated in
/// chunks equals one generated at once.
std::vector<PhantomSample> generate(const PhantomConfig& cfg);

/// Volume mode places the pattern on slices 35..48 with a Gaussian profile
/// peaking at 41; other slices hold background only.
inline constexpr int kPhantomFirstSlice = 35;
inline constexpr int kPhantomLastSlice = 48;
inline constexpr int kPhantomPeakSlice = 41;

/// Mask of tail pixels (nominal, un-jittered geometry) used to measure separation.
std::vector<std::uint8_t> tail_mask();

/// Mean raw intensity inside the tail mask.
double tail_mean(const RawImage& image);

/// Slice-mode samples as labeled, normalized images tagged SingleSlice.
std::vector<LabeledSample> to_labeled(const std::vector<PhantomSample>& samples);

/// Write volume-mode samples as int16 NIfTI files and return their manifest rows.
/// File names are `<prefix><class>_<index>.nii`; subject ids `<class>-<index>`.
std::vector<ManifestRow> write_phantom_volumes(const std::vector<PhantomSample>& samples, const std::filesystem::path& out_dir,
                                               const std::string& prefix = "phantom_");

/// write_phantom_volumes plus out_dir/manifest.csv.
Manifest emit_manifest(const std::vector<PhantomSample>& samples, const std::filesystem::path& out_dir,
                       const std::string& prefix = "phantom_");

}  // namespace striatum
