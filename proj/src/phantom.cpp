#include "striatum/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "striatum/error.hpp"
#include "striatum/rng.hpp"

namespace striatum {

namespace {

constexpr double kMidCol = 45.0;
constexpr double kPeakSigma = 3.0;  // slices
constexpr std::size_t kCurvePoints = 48;

struct Geometry {
    double background;
    double brain_row, brain_col, brain_rr, brain_rc;
    double head_row, head_offset, head_rr, head_rc;
    double tail_length, tail_width, tail_half_width;
    double head_intensity, tail_intensity;
};

Geometry nominal() {
    return {0.12 * kMaxIntensity, 54.0, 45.0, 48.0, 40.0, 44.0, 9.0, 7.0, 4.5, 20.0, 9.0, 2.8,
            0.85 * kMaxIntensity, 0.78 * kMaxIntensity};
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Side {
    int sign;
    CommaParams comma;
    std::array<std::array<double, 2>, kCurvePoints> curve;
    double tail_half_width;
};

Side make_side(const Geometry& g, int sign, double head_scale_r, double head_scale_c, double head_gain, double tail_gain) {
    Side s{};
    s.sign = sign;
    s.comma.head_row = g.head_row;
    s.comma.head_col = kMidCol + sign * g.head_offset;
    s.comma.head_radius_r = g.head_rr * head_scale_r;
    s.comma.head_radius_c = g.head_rc * head_scale_c;
    s.comma.head_intensity = g.head_intensity * head_gain;
    s.comma.tail_intensity = g.tail_intensity * tail_gain;
    s.tail_half_width = g.tail_half_width;
    const double r0 = g.head_row + 4.0, c0 = s.comma.head_col + sign * 3.0;
    for (std::size_t k = 0; k < kCurvePoints; ++k) {
        const double t = static_cast<double>(k) / (kCurvePoints - 1);
        s.curve[k] = {r0 + g.tail_length * t, c0 + sign * g.tail_width * (t - 0.35 * t * t)};
    }
    return s;
}

// Distance to the sampled tail curve and the curve parameter of the nearest point.
std::pair<double, double> curve_distance(const Side& s, double r, double c) {
    double best = 1e30, best_t = 0.0;
    for (std::size_t k = 0; k < kCurvePoints; ++k) {
        const double dr = r - s.curve[k][0], dc = c - s.curve[k][1];
        const double d = dr * dr + dc * dc;
        if (d < best) {
            best = d;
            best_t = static_cast<double>(k) / (kCurvePoints - 1);
        }
    }
    return {std::sqrt(best), best_t};
}

double head_value(const CommaParams& p, double r, double c) {
    const double dr = (r - p.head_row) / p.head_radius_r, dc = (c - p.head_col) / p.head_radius_c;
    return p.head_intensity * logistic((1.0 - std::sqrt(dr * dr + dc * dc)) / 0.12);
}

double tail_value(const Side& s, double r, double c) {
    const auto [d, t] = curve_distance(s, r, c);
    const double hw = s.tail_half_width * (1.0 - 0.4 * t);
    return s.comma.tail_intensity * logistic((hw - d) / 0.6);
}

double brain_value(const Geometry& g, double r, double c) {
    const double dr = (r - g.brain_row) / g.brain_rr, dc = (c - g.brain_col) / g.brain_rc;
    return g.background * logistic((1.0 - std::sqrt(dr * dr + dc * dc)) / 0.05);
}

struct CleanImage {
    std::vector<double> background;  // brain background alone
    std::vector<double> full;        // background with striatum
};

CleanImage render(const Geometry& g, const Side& left, const Side& right) {
    CleanImage img{std::vector<double>(kSliceRows * kSliceCols), std::vector<double>(kSliceRows * kSliceCols)};
    for (std::size_t r = 0; r < kSliceRows; ++r)
        for (std::size_t c = 0; c < kSliceCols; ++c) {
            const double rr = static_cast<double>(r), cc = static_cast<double>(c);
            const double bg = brain_value(g, rr, cc);
            double v = bg;
            for (const Side* s : {&left, &right}) {
                // Skip the curve search far from the structure.
                if (std::abs(rr - s->comma.head_row) > 40.0 || std::abs(cc - s->comma.head_col) > 25.0) continue;
                v = std::max({v, head_value(s->comma, rr, cc), tail_value(*s, rr, cc)});
            }
            img.background[r * kSliceCols + c] = bg;
            img.full[r * kSliceCols + c] = v;
        }
    return img;
}

std::uint16_t quantize(double v) {
    return static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, static_cast<double>(kMaxIntensity)));
}

const char* class_name(PhantomClass cls) {
    switch (cls) {
        case PhantomClass::NormalLike: return "normal";
        case PhantomClass::PDLike: return "pd";
        case PhantomClass::SweddLike: return "swedd";
    }
    return "?";
}

}  // namespace

ClassLabel label_for(PhantomClass cls) {
    switch (cls) {
        case PhantomClass::NormalLike: return ClassLabel::Normal;
        case PhantomClass::PDLike: return ClassLabel::EarlyPD;
        case PhantomClass::SweddLike: return ClassLabel::SWEDD;
    }
    return ClassLabel::Normal;
}

void PhantomConfig::validate() const {
    if (n < 1) throw InvalidArgument("phantom count must be >= 1");
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be nonnegative");
    if (!(severity >= 0.0 && severity <= 1.0)) throw InvalidArgument("severity must be in [0, 1]");
}

std::vector<PhantomSample> generate(const PhantomConfig& cfg) {
    cfg.validate();
    std::vector<PhantomSample> out;
    out.reserve(cfg.n);
    const double noise_sd = cfg.noise_sigma * kMaxIntensity;
    const bool pd = cfg.cls == PhantomClass::PDLike;
    const double sev = pd ? cfg.severity : 0.0;

    for (std::size_t i = cfg.first; i < cfg.first + cfg.n; ++i) {
        Rng rng(derive_seed(cfg.seed, i));
        auto jitter = [&rng] { return rng.uniform(0.9, 1.1); };

        Geometry g = nominal();
        g.background *= jitter();
        g.head_row *= jitter();
        g.head_offset *= jitter();
        g.head_rr *= jitter();
        g.head_rc *= jitter();
        g.tail_length *= jitter();
        g.tail_width *= jitter();
        g.head_intensity *= jitter();
        g.tail_intensity *= jitter();
        const int weaker = rng.uniform() < 0.5 ? -1 : 1;
        const double asym_u = rng.uniform();

        const double asym = 0.5 * sev * asym_u;
        const double head_r = 1.0 - 0.3 * sev, head_c = 1.0 - 0.1 * sev;
        const double tail_gain = 1.0 - sev;
        auto gains = [&](int side) { return side == weaker ? 1.0 - asym : 1.0; };
        const Side left = make_side(g, -1, head_r, head_c, gains(-1) * (1.0 - 0.2 * sev * asym_u), tail_gain * gains(-1));
        const Side right = make_side(g, +1, head_r, head_c, gains(+1) * (1.0 - 0.2 * sev * asym_u), tail_gain * gains(+1));
        const CleanImage clean = render(g, left, right);

        PhantomSample s;
        s.true_class = cfg.cls;
        s.index = i;
        s.left = left.comma;
        s.right = right.comma;
        s.background = g.background;
        s.weaker_side = weaker;
        s.asymmetry = asym;

        if (cfg.emit == PhantomEmit::Slice) {
            s.image = {kSliceRows, kSliceCols, std::vector<double>(clean.full.size())};
            for (std::size_t p = 0; p < clean.full.size(); ++p)
                s.image.values[p] = quantize(clean.full[p] + (noise_sd > 0.0 ? rng.normal(0.0, noise_sd) : 0.0));
        } else {
            Volume v(kVolumeX, kVolumeY, kVolumeZ);
            for (std::size_t z = 0; z < kVolumeZ; ++z) {
                const int zi = static_cast<int>(z);
                const double w = (zi >= kPhantomFirstSlice && zi <= kPhantomLastSlice)
                                     ? std::exp(-0.5 * std::pow((zi - kPhantomPeakSlice) / kPeakSigma, 2))
                                     : 0.0;
                for (std::size_t y = 0; y < kVolumeY; ++y)
                    for (std::size_t x = 0; x < kVolumeX; ++x) {
                        const std::size_t p = y * kSliceCols + x;
                        const double clean_v = clean.background[p] + w * (clean.full[p] - clean.background[p]);
                        v.at(x, y, z) = quantize(clean_v + (noise_sd > 0.0 ? rng.normal(0.0, noise_sd) : 0.0));
                    }
            }
            char id[64];
            std::snprintf(id, sizeof id, "%s-%04zu", class_name(cfg.cls), i);
            v.source_id = id;
            s.volume = std::move(v);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::uint8_t> tail_mask() {
    const Geometry g = nominal();
    const Side left = make_side(g, -1, 1.0, 1.0, 1.0, 1.0);
    const Side right = make_side(g, +1, 1.0, 1.0, 1.0, 1.0);
    std::vector<std::uint8_t> mask(kSliceRows * kSliceCols, 0);
    for (std::size_t r = 0; r < kSliceRows; ++r)
        for (std::size_t c = 0; c < kSliceCols; ++c) {
            const double rr = static_cast<double>(r), cc = static_cast<double>(c);
            for (const Side* s : {&left, &right}) {
                const double dr = (rr - s->comma.head_row) / s->comma.head_radius_r;
                const double dc = (cc - s->comma.head_col) / s->comma.head_radius_c;
                if (std::sqrt(dr * dr + dc * dc) <= 1.3) continue;
                const auto [d, t] = curve_distance(*s, rr, cc);
                if (t > 0.15 && t < 0.85 && d <= 0.8 * s->tail_half_width * (1.0 - 0.4 * t)) mask[r * kSliceCols + c] = 1;
            }
        }
    return mask;
}

double tail_mean(const RawImage& image) {
    static const std::vector<std::uint8_t> mask = tail_mask();
    if (image.values.size() != mask.size()) throw InvalidArgument("tail_mean needs a 109x91 image");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) {
            sum += image.values[i];
            ++n;
        }
    return sum / static_cast<double>(n);
}

std::vector<LabeledSample> to_labeled(const std::vector<PhantomSample>& samples) {
    std::vector<LabeledSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.image.values.empty()) throw InvalidArgument("to_labeled needs slice-mode phantoms");
        char id[64];
        std::snprintf(id, sizeof id, "%s-%04zu", class_name(s.true_class), s.index);
        LabeledSample l;
        l.image = normalize(s.image, PreprocTag::SingleSlice, id);
        l.label = label_for(s.true_class);
        l.role = role_for(l.label);
        out.push_back(std::move(l));
    }
    return out;
}

std::vector<ManifestRow> write_phantom_volumes(const std::vector<PhantomSample>& samples, const std::filesystem::path& out_dir,
                                               const std::string& prefix) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<ManifestRow> rows;
    for (const auto& s : samples) {
        if (!s.volume) throw InvalidArgument("phantom volumes need volume-mode samples");
        char name[96], subject[64];
        std::snprintf(name, sizeof name, "%s%s_%04zu.nii", prefix.c_str(), class_name(s.true_class), s.index);
        std::snprintf(subject, sizeof subject, "%s-%04zu", class_name(s.true_class), s.index);
        write_nifti(*s.volume, out_dir / name, NiftiDatatype::Int16);
        rows.push_back({name, label_for(s.true_class), subject, "screening"});
    }
    return rows;
}

Manifest emit_manifest(const std::vector<PhantomSample>& samples, const std::filesystem::path& out_dir,
                       const std::string& prefix) {
    Manifest m;
    m.base_dir = out_dir;
    m.rows = write_phantom_volumes(samples, out_dir, prefix);
    write_manifest(m, out_dir / "manifest.csv");
    return m;
}

}  // namespace striatum
