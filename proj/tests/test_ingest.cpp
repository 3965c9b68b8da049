#include <cstring>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "striatum/error.hpp"
#include "striatum/ingest.hpp"
#include "striatum/rng.hpp"
#include "test_support.hpp"

using namespace striatum;
using testing::TempDir;

namespace {

Volume random_volume(Rng& rng, std::size_t nx, std::size_t ny, std::size_t nz, std::uint16_t max) {
    Volume v(nx, ny, nz);
    for (auto& x : v.voxels) x = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(max) + 1));
    return v;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

template <typename T>
void poke(std::vector<unsigned char>& b, std::size_t off, T v) {
    std::memcpy(b.data() + off, &v, sizeof v);
}

NiftiError::Kind read_error_kind(const std::filesystem::path& p) {
    try {
        read_nifti(p);
    } catch (const NiftiError& e) {
        return e.kind();
    }
    FAIL("read_nifti did not throw");
    return NiftiError::Kind::Io;
}

void write_manifest_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("write then read is voxel-identical for every datatype and byte order") {
    TempDir dir("nifti");
    Rng rng(7);
    for (int trial = 0; trial < 12; ++trial)
        for (auto dt : {NiftiDatatype::UInt8, NiftiDatatype::Int16, NiftiDatatype::Float32})
            for (auto e : {Endian::Little, Endian::Big}) {
                const std::size_t nx = 1 + rng.below(12), ny = 1 + rng.below(12), nz = 1 + rng.below(12);
                const Volume v = random_volume(rng, nx, ny, nz, dt == NiftiDatatype::UInt8 ? 255 : 32767);
                const auto path = dir / "v.nii";
                write_nifti(v, path, dt, e);
                const Volume r = read_nifti(path);
                CHECK(r.nx == nx);
                CHECK(r.ny == ny);
                CHECK(r.nz == nz);
                CHECK(r.voxels == v.voxels);
                CHECK(r.clamped == 0);
            }
}

TEST_CASE("big-endian header is detected from sizeof_hdr") {
    TempDir dir("nifti_be");
    Rng rng(3);
    const Volume v = random_volume(rng, 4, 5, 6, 32767);
    write_nifti(v, dir / "be.nii", NiftiDatatype::Int16, Endian::Big);
    const auto bytes = read_bytes(dir / "be.nii");
    std::int32_t raw;
    std::memcpy(&raw, bytes.data(), 4);
    CHECK(raw == 1543569408);  // 348 byte-swapped, read on a little-endian host
    CHECK(read_nifti(dir / "be.nii").voxels == v.voxels);
}

TEST_CASE("malformed files raise distinct errors") {
    TempDir dir("nifti_bad");
    Rng rng(5);
    const Volume v = random_volume(rng, 3, 3, 3, 1000);
    const auto good = dir / "good.nii";
    write_nifti(v, good);
    const auto base = read_bytes(good);
    const auto bad = dir / "bad.nii";

    auto b = base;
    std::memcpy(b.data() + 344, "XXX\0", 4);
    write_bytes(bad, b);
    CHECK(read_error_kind(bad) == NiftiError::Kind::BadMagic);

    b = base;
    poke<std::int16_t>(b, 70, 64);  // float64
    poke<std::int16_t>(b, 72, 64);
    write_bytes(bad, b);
    CHECK(read_error_kind(bad) == NiftiError::Kind::UnsupportedDatatype);

    b = base;
    b.resize(b.size() - 5);
    write_bytes(bad, b);
    CHECK(read_error_kind(bad) == NiftiError::Kind::Truncated);

    b = base;
    b.resize(100);
    write_bytes(bad, b);
    CHECK(read_error_kind(bad) == NiftiError::Kind::Truncated);

    b = base;
    poke<std::int16_t>(b, 40, 2);  // 2-D
    write_bytes(bad, b);
    CHECK(read_error_kind(bad) == NiftiError::Kind::BadDimensions);

    b = base;
    poke<std::int16_t>(b, 40, 4);
    poke<std::int16_t>(b, 48, 3);  // dim[4] = 3 time points
    write_bytes(bad, b);
    CHECK(read_error_kind(bad) == NiftiError::Kind::BadDimensions);

    b = base;
    poke<std::int32_t>(b, 0, 540);
    write_bytes(bad, b);
    CHECK(read_error_kind(bad) == NiftiError::Kind::BadHeader);

    CHECK(read_error_kind(dir / "missing.nii") == NiftiError::Kind::Io);
}

TEST_CASE("scaling is applied and out-of-range values are clamped and counted") {
    TempDir dir("nifti_scl");
    Volume v(2, 2, 1);
    v.voxels = {10, 20, 30, 40};
    write_nifti(v, dir / "s.nii");
    auto b = read_bytes(dir / "s.nii");
    poke<float>(b, 112, 2.0f);
    poke<float>(b, 116, -25.0f);
    write_bytes(dir / "s.nii", b);
    const Volume r = read_nifti(dir / "s.nii");
    CHECK(r.voxels == std::vector<std::uint16_t>{0, 15, 35, 55});
    CHECK(r.clamped == 1);

    // float32 above 2^15 - 1 clamps
    Volume f(1, 1, 2);
    f.voxels = {100, 200};
    write_nifti(f, dir / "f.nii", NiftiDatatype::Float32);
    b = read_bytes(dir / "f.nii");
    poke<float>(b, 352, 40000.5f);
    write_bytes(dir / "f.nii", b);
    const Volume rf = read_nifti(dir / "f.nii");
    CHECK(rf.voxels == std::vector<std::uint16_t>{32767, 200});
    CHECK(rf.clamped == 1);
}

TEST_CASE("header/image pair with magic ni1") {
    TempDir dir("nifti_pair");
    Rng rng(9);
    const Volume v = random_volume(rng, 3, 4, 5, 32767);
    write_nifti(v, dir / "single.nii");
    const auto b = read_bytes(dir / "single.nii");
    std::vector<unsigned char> hdr(b.begin(), b.begin() + 348);
    std::memcpy(hdr.data() + 344, "ni1\0", 4);
    poke<float>(hdr, 108, 0.0f);
    write_bytes(dir / "pair.hdr", hdr);
    write_bytes(dir / "pair.img", std::vector<unsigned char>(b.begin() + 352, b.end()));
    CHECK(read_nifti(dir / "pair.hdr").voxels == v.voxels);
}

TEST_CASE("uint8 output refuses values above 255") {
    TempDir dir("nifti_u8");
    Volume v(1, 1, 1, 256);
    CHECK_THROWS_AS(write_nifti(v, dir / "x.nii", NiftiDatatype::UInt8), InvalidArgument);
}

TEST_CASE("slice selection identities") {
    SUBCASE("constant volume gives a constant image in both modes") {
        const Volume v(kVolumeX, kVolumeY, kVolumeZ, 1234);
        for (auto mode : {PreprocTag::AverageSlices, PreprocTag::SingleSlice}) {
            const RawImage img = select_slices(v, mode);
            CHECK(img.rows == 109);
            CHECK(img.cols == 91);
            for (double p : img.values) CHECK(p == 1234.0);
        }
    }
    SUBCASE("slice 41 at 100 and zero elsewhere") {
        Volume v(kVolumeX, kVolumeY, kVolumeZ, 0);
        for (std::size_t y = 0; y < v.ny; ++y)
            for (std::size_t x = 0; x < v.nx; ++x) v.at(x, y, 41) = 100;
        for (double p : select_slices(v, PreprocTag::SingleSlice).values) CHECK(p == 100.0);
        for (double p : select_slices(v, PreprocTag::AverageSlices).values) CHECK(p == doctest::Approx(100.0 / 14.0).epsilon(1e-12));
    }
    SUBCASE("average equals the mean of the single slices 35..48") {
        Rng rng(13);
        const Volume v = random_volume(rng, kVolumeX, kVolumeY, kVolumeZ, 32767);
        const RawImage avg = select_slices(v, PreprocTag::AverageSlices);
        std::vector<double> sum(avg.values.size(), 0.0);
        for (int k = 35; k <= 48; ++k) {
            SliceOptions o;
            o.single = k;
            const RawImage s = select_slices(v, PreprocTag::SingleSlice, o);
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += s.values[i];
        }
        for (std::size_t i = 0; i < sum.size(); ++i) CHECK(avg.values[i] == sum[i] / 14.0);
    }
    SUBCASE("rows are Y and columns are X; offset and flip knobs") {
        Volume v(kVolumeX, kVolumeY, kVolumeZ, 0);
        v.at(3, 7, 40) = 9;
        SliceOptions o;
        o.single = 41;
        o.index_offset = -1;  // 1-based slice 41 is index 40
        RawImage img = select_slices(v, PreprocTag::SingleSlice, o);
        CHECK(img.values[7 * 91 + 3] == 9.0);
        o.flip_rows = true;
        img = select_slices(v, PreprocTag::SingleSlice, o);
        CHECK(img.values[(108 - 7) * 91 + 3] == 9.0);
    }
    SUBCASE("out-of-range indices are rejected") {
        const Volume v(kVolumeX, kVolumeY, kVolumeZ, 0);
        SliceOptions o;
        o.single = 91;
        CHECK_THROWS_AS(select_slices(v, PreprocTag::SingleSlice, o), InvalidArgument);
        o = {};
        o.first = 50;
        o.last = 40;
        CHECK_THROWS_AS(select_slices(v, PreprocTag::AverageSlices, o), InvalidArgument);
        o = {};
        o.first = -1;
        CHECK_THROWS_AS(select_slices(v, PreprocTag::AverageSlices, o), InvalidArgument);
    }
}

TEST_CASE("normalize endpoints, midpoint and monotonicity") {
    RawImage raw{1, 4, {0.0, 16384.0, 32767.0, 100.0}};
    const SliceImage s = normalize(raw, PreprocTag::SingleSlice, "x");
    CHECK(s.pixels[0] == 0.0);
    CHECK(s.pixels[2] == 1.0);
    CHECK(s.pixels[1] == doctest::Approx(0.50002).epsilon(1e-5));
    CHECK(s.pixels[1] == 16384.0 / 32767.0);
    double prev = -1.0;
    for (int v = 0; v <= 32767; v += 7) {
        RawImage one{1, 1, {static_cast<double>(v)}};
        const double p = normalize(one, PreprocTag::SingleSlice).pixels[0];
        CHECK(p > prev);
        prev = p;
    }
    raw.values[0] = 32768.0;
    CHECK_THROWS_AS(normalize(raw, PreprocTag::SingleSlice), InvalidArgument);
    raw.values[0] = -1.0;
    CHECK_THROWS_AS(normalize(raw, PreprocTag::SingleSlice), InvalidArgument);
}

TEST_CASE("manifest parsing and errors") {
    TempDir dir("manifest");
    const auto p = dir / "m.csv";

    write_manifest_text(p, "path,label,subject_id,visit\n\"a,b.nii\",PD,s1,bl\nc.nii,Normal,s2,\"v \"\"1\"\"\"\n");
    const Manifest m = read_manifest(p);
    REQUIRE(m.rows.size() == 2);
    CHECK(m.rows[0].path == "a,b.nii");
    CHECK(m.rows[0].label == ClassLabel::EarlyPD);
    CHECK(m.rows[1].visit == "v \"1\"");
    CHECK(m.base_dir == dir.path());

    write_manifest(m, dir / "copy.csv");
    const Manifest again = read_manifest(dir / "copy.csv");
    CHECK(again.rows[0].path == m.rows[0].path);
    CHECK(again.rows[1].visit == m.rows[1].visit);

    write_manifest_text(p, "file,label,subject_id,visit\n");
    CHECK_THROWS_AS(read_manifest(p), InvalidArgument);
    write_manifest_text(p, "path,label,subject_id,visit\na.nii,maybe,s,v\n");
    CHECK_THROWS_AS(read_manifest(p), InvalidArgument);
    write_manifest_text(p, "path,label,subject_id,visit\na.nii,pd,s,v\na.nii,normal,t,v\n");
    CHECK_THROWS_AS(read_manifest(p), InvalidArgument);
    write_manifest_text(p, "path,label,subject_id,visit\na.nii,pd,s\n");
    CHECK_THROWS_AS(read_manifest(p), InvalidArgument);
    CHECK_THROWS_AS(read_manifest(dir / "nope.csv"), IoError);
}

TEST_CASE("load_dataset assigns roles and reports counts") {
    TempDir dir("dataset");
    Rng rng(1);
    Manifest m;
    m.base_dir = dir.path();
    const ClassLabel labels[] = {ClassLabel::Normal, ClassLabel::EarlyPD, ClassLabel::SWEDD};
    for (int i = 0; i < 3; ++i) {
        const std::string name = "v" + std::to_string(i) + ".nii";
        write_nifti(random_volume(rng, kVolumeX, kVolumeY, kVolumeZ, 32767), dir / name);
        m.rows.push_back({name, labels[i], "s" + std::to_string(i), "bl"});
    }
    const Dataset ds = load_dataset(m, PreprocTag::AverageSlices);
    REQUIRE(ds.samples.size() == 3);
    CHECK(ds.counts == ClassCounts{1, 1, 1});
    CHECK(ds.samples[0].role == CohortRole::TrainEval);
    CHECK(ds.samples[1].role == CohortRole::TrainEval);
    CHECK(ds.samples[2].role == CohortRole::Holdout);
    CHECK(ds.samples[2].image.source_id == "s2/bl");
    for (const auto& s : ds.samples) {
        CHECK(s.image.preproc == PreprocTag::AverageSlices);
        for (double px : s.image.pixels) CHECK((px >= 0.0 && px <= 1.0));
    }

    CHECK(load_dataset(Manifest{dir.path(), {}}, PreprocTag::SingleSlice).samples.empty());

    Manifest dup = m;
    dup.rows[1].subject_id = "s0";
    CHECK_THROWS_AS(load_dataset(dup, PreprocTag::SingleSlice), InvalidArgument);

    Manifest missing = m;
    missing.rows[1].path = "gone.nii";
    try {
        load_dataset(missing, PreprocTag::SingleSlice);
        FAIL("expected an error");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        CHECK(std::string(e.what()).find("gone.nii") != std::string::npos);
    }

    write_nifti(Volume(10, 10, 10), dir / "small.nii");
    Manifest small = m;
    small.rows[0].path = "small.nii";
    CHECK_THROWS_AS(load_dataset(small, PreprocTag::SingleSlice), InvalidArgument);
}

TEST_CASE("clamped voxels produce a warning") {
    TempDir dir("clamp");
    Volume v(kVolumeX, kVolumeY, kVolumeZ, 10);
    write_nifti(v, dir / "c.nii", NiftiDatatype::Float32);
    auto b = read_bytes(dir / "c.nii");
    poke<float>(b, 352, -5.0f);
    write_bytes(dir / "c.nii", b);
    std::ostringstream warn;
    const Dataset ds = load_dataset(Manifest{dir.path(), {{"c.nii", ClassLabel::Normal, "s", "v"}}}, PreprocTag::SingleSlice, {}, &warn);
    CHECK(ds.clamped_voxels == 1);
    CHECK(warn.str().find("1 voxels clamped") != std::string::npos);
}
