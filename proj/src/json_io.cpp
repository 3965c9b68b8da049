#include "striatum/json_io.hpp"

#include "striatum/error.hpp"

namespace striatum {

using nlohmann::json;

namespace {

std::string_view kind_name(LayerDesc::Kind k) {
    switch (k) {
        case LayerDesc::Kind::Conv2D: return "conv2d";
        case LayerDesc::Kind::MaxPool2D: return "maxpool2d";
        case LayerDesc::Kind::Flatten: return "flatten";
        case LayerDesc::Kind::Dense: return "dense";
        case LayerDesc::Kind::Dropout: return "dropout";
    }
    return "?";
}

LayerDesc::Kind parse_kind(const std::string& s) {
    for (auto k : {LayerDesc::Kind::Conv2D, LayerDesc::Kind::MaxPool2D, LayerDesc::Kind::Flatten, LayerDesc::Kind::Dense,
                   LayerDesc::Kind::Dropout})
        if (kind_name(k) == s) return k;
    throw InvalidArgument("unknown layer kind '" + s + "'");
}

}  // namespace

std::string_view to_string(Optimizer opt) { return opt == Optimizer::Adam ? "adam" : "sgd"; }

std::optional<Optimizer> parse_optimizer(std::string_view text) {
    if (text == "adam" || text == "Adam") return Optimizer::Adam;
    if (text == "sgd" || text == "SGD") return Optimizer::SGD;
    return std::nullopt;
}

json to_json(const ModelSpec& spec) {
    json arch = json::array();
    for (const auto& d : spec.architecture)
        arch.push_back({{"kind", kind_name(d.kind)}, {"size", d.size}, {"kernel", d.kernel}, {"rate", d.rate}});
    return {{"family", to_string(spec.family)}, {"architecture", arch}, {"reg_c", spec.reg_c}, {"seed", spec.seed}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    const auto fam = parse_family(j.at("family").get<std::string>());
    if (!fam) throw InvalidArgument("unknown model family '" + j.at("family").get<std::string>() + "'");
    s.family = *fam;
    for (const auto& d : j.at("architecture"))
        s.architecture.push_back({parse_kind(d.at("kind").get<std::string>()), d.at("size").get<std::size_t>(),
                                  d.at("kernel").get<std::size_t>(), d.at("rate").get<double>()});
    s.reg_c = j.at("reg_c").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

json to_json(const TrainConfig& c) {
    return {{"optimizer", to_string(c.optimizer)},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"early_stop_patience", c.early_stop_patience},
            {"validation_fraction", c.validation_fraction},
            {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    const auto opt = parse_optimizer(j.at("optimizer").get<std::string>());
    if (!opt) throw InvalidArgument("unknown optimizer");
    c.optimizer = *opt;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace striatum
