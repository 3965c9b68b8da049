#include "striatum/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "striatum/json_io.hpp"

namespace striatum {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'T', 'R', 'I', 'A', 'T', 'U', 'M'};
constexpr std::size_t kPreamble = 8 + 4 + 4 + 8;

template <typename T>
void put_le(std::vector<unsigned char>& out, T v) {
    const auto u = std::bit_cast<std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(u >> (8 * i)));
}

template <typename T>
T get_le(const unsigned char* p) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(p[i]) << (8 * i);
    return std::bit_cast<T>(u);
}

struct NamedTensor {
    std::string name;
    Shape shape;
    const double* data;
    std::size_t size;
};

std::vector<NamedTensor> tensors_of(const TrainedModel& m) {
    std::vector<NamedTensor> out;
    if (m.is_network()) {
        for (std::size_t i = 0; i < m.network.layers.size(); ++i) {
            const auto& l = m.network.layers[i];
            if (!l.has_parameters()) continue;
            out.push_back({"layer" + std::to_string(i) + ".weights", l.weights.shape(), l.weights.data().data(), l.weights.size()});
            out.push_back({"layer" + std::to_string(i) + ".bias", l.bias.shape(), l.bias.data().data(), l.bias.size()});
        }
    } else {
        out.push_back({"weights", {m.weights.size()}, m.weights.data(), m.weights.size()});
        out.push_back({"intercept", {1}, &m.intercept, 1});
    }
    return out;
}

json header_of(const TrainedModel& m) {
    json tensors = json::array();
    for (const auto& t : tensors_of(m)) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
    return {
        {"format", "striatum-model"},
        {"spec", to_json(m.spec)},
        {"preproc", to_string(m.preproc)},
        {"rows", m.rows},
        {"cols", m.cols},
        {"meta",
         {{"epochs_run", m.meta.epochs_run},
          {"final_train_loss", m.meta.final_train_loss},
          {"best_validation_loss", m.meta.best_validation_loss},
          {"loss_history", m.meta.loss_history}}},
        {"tensors", tensors},
    };
}

[[noreturn]] void bad_header(const std::string& what) {
    throw ModelFormatError(ModelFormatError::Kind::BadHeader, "model header: " + what);
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<unsigned char> serialize_model(const TrainedModel& model) {
    const std::string header = header_of(model).dump();
    std::vector<unsigned char> out(kMagic, kMagic + 8);
    put_le(out, kModelFormatMajor);
    put_le(out, kModelFormatMinor);
    put_le(out, static_cast<std::uint64_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    for (const auto& t : tensors_of(model))
        for (std::size_t i = 0; i < t.size; ++i) put_le(out, t.data[i]);
    put_le(out, fnv1a64(out));
    return out;
}

TrainedModel deserialize_model(std::span<const unsigned char> bytes) {
    using K = ModelFormatError::Kind;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw ModelFormatError(K::BadMagic, "not a striatum model file (bad magic)");
    if (bytes.size() < kPreamble) throw ModelFormatError(K::Truncated, "model file truncated inside the preamble");
    const auto major = get_le<std::uint32_t>(bytes.data() + 8);
    const auto minor = get_le<std::uint32_t>(bytes.data() + 12);
    if (major != kModelFormatMajor)
        throw ModelFormatError(K::Version, "model format version " + std::to_string(major) + "." + std::to_string(minor) +
                                               " is not supported (this build reads major version " +
                                               std::to_string(kModelFormatMajor) + ")");
    const auto header_len = get_le<std::uint64_t>(bytes.data() + 16);
    if (header_len > bytes.size() - kPreamble) throw ModelFormatError(K::Truncated, "model file truncated inside the header");
    if (bytes.size() < kPreamble + header_len + 8) throw ModelFormatError(K::Truncated, "model file truncated");
    const std::size_t body_end = bytes.size() - 8;
    if (fnv1a64(bytes.first(body_end)) != get_le<std::uint64_t>(bytes.data() + body_end))
        throw ModelFormatError(K::Checksum, "model file checksum mismatch (corrupted or truncated)");

    json h;
    try {
        h = json::parse(bytes.begin() + kPreamble, bytes.begin() + static_cast<std::ptrdiff_t>(kPreamble + header_len));
    } catch (const json::exception& e) {
        bad_header(std::string("invalid JSON: ") + e.what());
    }

    TrainedModel m;
    std::vector<std::pair<std::string, Shape>> manifest;
    try {
        if (h.at("format") != "striatum-model") bad_header("unexpected format tag");
        m.spec = spec_from_json(h.at("spec"));
        const auto pre = parse_preproc(h.at("preproc").get<std::string>());
        if (!pre) bad_header("unknown preproc tag");
        m.preproc = *pre;
        m.rows = h.at("rows").get<std::size_t>();
        m.cols = h.at("cols").get<std::size_t>();
        const auto& meta = h.at("meta");
        m.meta.epochs_run = meta.at("epochs_run").get<std::size_t>();
        m.meta.final_train_loss = meta.at("final_train_loss").get<double>();
        m.meta.best_validation_loss = meta.at("best_validation_loss").get<double>();
        m.meta.loss_history = meta.at("loss_history").get<std::vector<double>>();
        for (const auto& t : h.at("tensors")) manifest.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<Shape>());
    } catch (const json::exception& e) {
        bad_header(e.what());
    } catch (const InvalidArgument& e) {
        bad_header(e.what());
    }

    std::size_t total = 0;
    for (const auto& [name, shape] : manifest) total += shape_size(shape);
    if (body_end - kPreamble - header_len != total * 8)
        throw ModelFormatError(K::Truncated, "model blob section holds " + std::to_string(body_end - kPreamble - header_len) +
                                                 " bytes, header declares " + std::to_string(total * 8));
    const unsigned char* p = bytes.data() + kPreamble + header_len;
    auto read_into = [&](std::span<double> dst) {
        for (double& v : dst) {
            v = get_le<double>(p);
            p += 8;
        }
    };

    if (m.is_network()) {
        ModelSpec skeleton = m.spec;
        try {
            m.network = build_network(skeleton, m.rows, m.cols);
        } catch (const Error& e) {
            bad_header(std::string("cannot rebuild network: ") + e.what());
        }
        std::size_t k = 0;
        for (std::size_t i = 0; i < m.network.layers.size(); ++i) {
            auto& l = m.network.layers[i];
            if (!l.has_parameters()) continue;
            for (Tensor* t : {&l.weights, &l.bias}) {
                if (k >= manifest.size() || manifest[k].second != t->shape())
                    bad_header("tensor " + std::to_string(k) + " does not match the architecture");
                read_into(t->data());
                ++k;
            }
        }
        if (k != manifest.size()) bad_header("extra tensors for this architecture");
    } else {
        if (manifest.size() != 2 || manifest[0].first != "weights" || manifest[1].first != "intercept" ||
            manifest[0].second != Shape{m.rows * m.cols} || manifest[1].second != Shape{1})
            bad_header("linear model needs weights[rows*cols] and intercept[1]");
        m.weights.resize(m.rows * m.cols);
        read_into(m.weights);
        read_into(std::span<double>(&m.intercept, 1));
    }
    return m;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move model into place at " + path.string() + ": " + ec.message());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model " + path.string());
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try {
        return deserialize_model(bytes);
    } catch (const ModelFormatError& e) {
        throw ModelFormatError(e.kind(), path.string() + ": " + e.what());
    }
}

}  // namespace striatum
