#include "striatum/image.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "striatum/error.hpp"

namespace striatum {

std::string_view to_string(ClassLabel label) {
    switch (label) {
        case ClassLabel::Normal: return "normal";
        case ClassLabel::EarlyPD: return "pd";
        case ClassLabel::SWEDD: return "swedd";
    }
    return "?";
}

std::string_view to_string(PreprocTag tag) {
    return tag == PreprocTag::AverageSlices ? "average_slices" : "single_slice";
}

std::string_view to_string(CohortRole role) { return role == CohortRole::Holdout ? "holdout" : "train_eval"; }

static std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::optional<ClassLabel> parse_label(std::string_view text) {
    const std::string t = lower(text);
    if (t == "normal") return ClassLabel::Normal;
    if (t == "pd" || t == "earlypd") return ClassLabel::EarlyPD;
    if (t == "swedd") return ClassLabel::SWEDD;
    return std::nullopt;
}

std::optional<PreprocTag> parse_preproc(std::string_view text) {
    const std::string t = lower(text);
    if (t == "average" || t == "average_slices") return PreprocTag::AverageSlices;
    if (t == "single" || t == "single_slice") return PreprocTag::SingleSlice;
    return std::nullopt;
}

void SliceImage::validate() const {
    if (pixels.size() != rows * cols)
        throw InvalidArgument("slice image " + source_id + ": " + std::to_string(pixels.size()) +
                              " pixels for a " + std::to_string(rows) + "x" + std::to_string(cols) + " image");
    for (double p : pixels)
        if (!(p >= 0.0 && p <= 1.0))
            throw InvalidArgument("slice image " + source_id + ": pixel " + std::to_string(p) + " outside [0, 1]");
}

}  // namespace striatum
