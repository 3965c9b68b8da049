#include "striatum/ingest.hpp"

#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "striatum/error.hpp"

namespace striatum {

RawImage select_slices(const Volume& volume, PreprocTag mode, const SliceOptions& options) {
    const int first = options.first + options.index_offset;
    const int last = options.last + options.index_offset;
    const int single = options.single + options.index_offset;
    const int nz = static_cast<int>(volume.nz);
    auto check = [&](int z, const char* what) {
        if (z < 0 || z >= nz)
            throw InvalidArgument(std::string("slice index ") + what + " = " + std::to_string(z) +
                                  " outside [0, " + std::to_string(nz) + ")");
    };

    int lo = single, hi = single;
    if (mode == PreprocTag::AverageSlices) {
        check(first, "first");
        check(last, "last");
        if (first > last) throw InvalidArgument("slice range is empty");
        lo = first;
        hi = last;
    } else {
        check(single, "single");
    }

    RawImage img{volume.ny, volume.nx, std::vector<double>(volume.ny * volume.nx, 0.0)};
    for (int z = lo; z <= hi; ++z)
        for (std::size_t y = 0; y < volume.ny; ++y) {
            const std::size_t row = options.flip_rows ? volume.ny - 1 - y : y;
            for (std::size_t x = 0; x < volume.nx; ++x)
                img.values[row * volume.nx + x] += volume.at(x, y, static_cast<std::size_t>(z));
        }
    const double count = static_cast<double>(hi - lo + 1);
    if (count > 1)
        for (double& v : img.values) v /= count;
    return img;
}

SliceImage normalize(const RawImage& raw, PreprocTag tag, std::string source_id) {
    SliceImage s;
    s.rows = raw.rows;
    s.cols = raw.cols;
    s.preproc = tag;
    s.source_id = std::move(source_id);
    s.pixels.resize(raw.values.size());
    for (std::size_t i = 0; i < raw.values.size(); ++i) {
        const double v = raw.values[i];
        if (!(v >= 0.0 && v <= kMaxIntensity))
            throw InvalidArgument("normalize: value " + std::to_string(v) + " outside [0, 32767]");
        s.pixels[i] = v / kMaxIntensity;
    }
    return s;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    Manifest m;
    m.base_dir = path.parent_path();
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::set<std::string> paths;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!header_seen) {
            if (f != std::vector<std::string>{"path", "label", "subject_id", "visit"})
                throw InvalidArgument(where + ": header must be path,label,subject_id,visit");
            header_seen = true;
            continue;
        }
        if (f.size() != 4) throw InvalidArgument(where + ": expected 4 fields, got " + std::to_string(f.size()));
        const auto label = parse_label(f[1]);
        if (!label) throw InvalidArgument(where + ": unknown label '" + f[1] + "' (normal, pd, swedd)");
        if (f[0].empty()) throw InvalidArgument(where + ": empty path");
        if (!paths.insert(f[0]).second) throw InvalidArgument(where + ": duplicate path " + f[0]);
        m.rows.push_back({f[0], *label, f[2], f[3]});
    }
    if (!header_seen) throw InvalidArgument(path.string() + ": missing header line");
    return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create manifest " + path.string());
    out << "path,label,subject_id,visit\n";
    for (const auto& r : manifest.rows)
        out << csv_field(r.path) << ',' << to_string(r.label) << ',' << csv_field(r.subject_id) << ','
            << csv_field(r.visit) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

ClassCounts count_classes(const std::vector<LabeledSample>& samples) {
    ClassCounts c;
    for (const auto& s : samples) {
        switch (s.label) {
            case ClassLabel::Normal: ++c.normal; break;
            case ClassLabel::EarlyPD: ++c.pd; break;
            case ClassLabel::SWEDD: ++c.swedd; break;
        }
    }
    return c;
}

Dataset load_dataset(const Manifest& manifest, PreprocTag mode, const SliceOptions& options, std::ostream* warnings) {
    Dataset ds;
    std::set<std::pair<std::string, std::string>> visits;
    for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
        const ManifestRow& row = manifest.rows[i];
        const std::string where = "manifest row " + std::to_string(i + 1) + " (" + row.path + ")";
        if (!visits.emplace(row.subject_id, row.visit).second)
            throw InvalidArgument(where + ": duplicate subject " + row.subject_id + " visit " + row.visit);

        std::filesystem::path p(row.path);
        if (p.is_relative()) p = manifest.base_dir / p;
        if (!std::filesystem::exists(p)) throw IoError(where + ": file not found: " + p.string());

        Volume v;
        try {
            v = read_nifti(p);
        } catch (const NiftiError& e) {
            throw NiftiError(e.kind(), where + ": " + e.what());
        }
        if (v.nx != kVolumeX || v.ny != kVolumeY || v.nz != kVolumeZ)
            throw InvalidArgument(where + ": volume is " + std::to_string(v.nx) + "x" + std::to_string(v.ny) + "x" +
                                  std::to_string(v.nz) + ", expected 91x109x91");
        if (v.clamped > 0) {
            ds.clamped_voxels += v.clamped;
            if (warnings)
                *warnings << "warning: " << row.path << ": " << v.clamped << " voxels clamped to [0, 32767]\n";
        }

        LabeledSample s;
        s.image = normalize(select_slices(v, mode, options), mode, row.subject_id + "/" + row.visit);
        s.label = row.label;
        s.role = role_for(row.label);
        ds.samples.push_back(std::move(s));
    }
    ds.counts = count_classes(ds.samples);
    return ds;
}

}  // namespace striatum
