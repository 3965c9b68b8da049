#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace striatum {

inline constexpr std::size_t kVolumeX = 91;
inline constexpr std::size_t kVolumeY = 109;
inline constexpr std::size_t kVolumeZ = 91;
inline constexpr std::size_t kSliceRows = kVolumeY;
inline constexpr std::size_t kSliceCols = kVolumeX;
inline constexpr int kMaxIntensity = 32767;  // 2^15 - 1

enum class ClassLabel { Normal = 0, EarlyPD = 1, SWEDD = 2 };
enum class PreprocTag { AverageSlices, SingleSlice };
enum class CohortRole { TrainEval, Holdout };

std::string_view to_string(ClassLabel label);
std::string_view to_string(PreprocTag tag);
std::string_view to_string(CohortRole role);

/// Case-insensitive; accepts normal / pd / earlypd / swedd.
std::optional<ClassLabel> parse_label(std::string_view text);
/// Accepts average / average_slices / single / single_slice.
std::optional<PreprocTag> parse_preproc(std::string_view text);

/// One normalized axial image, rows = Y, cols = X, every pixel in [0, 1].
struct SliceImage {
    std::size_t rows = kSliceRows;
    std::size_t cols = kSliceCols;
    std::vector<double> pixels;
    PreprocTag preproc = PreprocTag::SingleSlice;
    std::string source_id;

    /// Throws InvalidArgument if the dimensions or the [0, 1] range are violated.
    void validate() const;
};

struct LabeledSample {
    SliceImage image;
    ClassLabel label = ClassLabel::Normal;
    CohortRole role = CohortRole::TrainEval;
};

/// SWEDD rows are always hold-out.
inline CohortRole role_for(ClassLabel label) {
    return label == ClassLabel::SWEDD ? CohortRole::Holdout : CohortRole::TrainEval;
}

}  // namespace striatum
