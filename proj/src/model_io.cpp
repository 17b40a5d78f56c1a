#include "smcae/model.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace smcae {

namespace {

static_assert(std::endian::native == std::endian::little, "model container assumes little-endian");

constexpr char kMagic[8] = {'S', 'M', 'C', 'A', 'E', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

using nlohmann::json;

struct BlockWriter {
    std::string payload;
    json blocks = json::array();

    void add(const std::string& name, const double* data, Eigen::Index rows, Eigen::Index cols) {
        blocks.push_back({{"name", name}, {"rows", rows}, {"cols", cols}, {"offset", payload.size()}});
        const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
        payload.append(reinterpret_cast<const char*>(data), bytes);
    }
};

class BlockReader {
public:
    BlockReader(const json& blocks, std::string_view payload) : payload_(payload) {
        for (const auto& b : blocks) index_[b.at("name").get<std::string>()] = b;
    }

    Matrix matrix(const std::string& name) const {
        const auto& b = find(name);
        Matrix m(b.at("rows").get<Eigen::Index>(), b.at("cols").get<Eigen::Index>());
        copy(b, m.data(), m.size());
        return m;
    }

    Vector vector(const std::string& name) const {
        const auto& b = find(name);
        Vector v(b.at("rows").get<Eigen::Index>() * b.at("cols").get<Eigen::Index>());
        copy(b, v.data(), v.size());
        return v;
    }

private:
    const json& find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ParseError("model container lacks block '" + name + "'");
        return it->second;
    }

    void copy(const json& b, double* out, Eigen::Index count) const {
        const auto offset = b.at("offset").get<std::size_t>();
        const auto bytes = static_cast<std::size_t>(count) * sizeof(double);
        if (offset + bytes > payload_.size()) {
            throw ParseError("model block '" + b.at("name").get<std::string>() + "' runs past end of file");
        }
        std::memcpy(out, payload_.data() + offset, bytes);
    }

    std::string_view payload_;
    std::map<std::string, json> index_;
};

json config_to_json(const SmcaeConfig& c) {
    return {{"layer_sizes", c.layer_sizes},
            {"sparsity_target", c.sparsity.target},
            {"sparsity_weight", c.sparsity.weight},
            {"weight_decay", c.sparsity.decay},
            {"gamma", c.gamma},
            {"max_iterations", c.max_iterations},
            {"tolerance", c.tolerance},
            {"memory", c.memory},
            {"fine_tune", c.fine_tune},
            {"rng_seed", c.rng_seed}};
}

SmcaeConfig config_from_json(const json& j) {
    SmcaeConfig c;
    c.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    c.sparsity.target = j.at("sparsity_target").get<double>();
    c.sparsity.weight = j.at("sparsity_weight").get<double>();
    c.sparsity.decay = j.at("weight_decay").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.max_iterations = j.at("max_iterations").get<int>();
    c.tolerance = j.at("tolerance").get<double>();
    c.memory = j.at("memory").get<int>();
    c.fine_tune = j.at("fine_tune").get<bool>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    return c;
}

optim::Status status_from_string(const std::string& s) {
    for (auto st : {optim::Status::converged, optim::Status::gradient_small, optim::Status::max_iterations,
                    optim::Status::line_search_failed}) {
        if (s == optim::to_string(st)) return st;
    }
    throw ParseError("unknown optimizer status '" + s + "'");
}

}  // namespace

std::string serialize_model(const SmcaeModel& model) {
    BlockWriter w;
    json layers = json::array();
    for (std::size_t j = 0; j < model.layers.size(); ++j) {
        const auto& l = model.layers[j];
        const std::string p = "layer" + std::to_string(j + 1) + ".";
        w.add(p + "enc_w", l.enc_w.data(), l.enc_w.rows(), l.enc_w.cols());
        w.add(p + "enc_b", l.enc_b.data(), l.enc_b.size(), 1);
        w.add(p + "left_w", l.left_w.data(), l.left_w.rows(), l.left_w.cols());
        w.add(p + "left_b", l.left_b.data(), l.left_b.size(), 1);
        if (l.has_right()) {
            w.add(p + "right_w", l.right_w.data(), l.right_w.rows(), l.right_w.cols());
            w.add(p + "right_b", l.right_b.data(), l.right_b.size(), 1);
        }
        layers.push_back({{"input_dim", l.input_dim()}, {"hidden_dim", l.hidden_dim()}, {"has_right", l.has_right()}});
    }
    if (model.scaler) {
        w.add("scaler.min", model.scaler->min.data(), model.scaler->min.size(), 1);
        w.add("scaler.max", model.scaler->max.data(), model.scaler->max.size(), 1);
    }
    json log = json::array();
    for (const auto& st : model.training_log) {
        json entries = json::array();
        for (const auto& e : st.entries) entries.push_back({e.iteration, e.total, e.left, e.right});
        log.push_back({{"name", st.name},
                       {"iterations", st.iterations},
                       {"evaluations", st.evaluations},
                       {"status", optim::to_string(st.status)},
                       {"entries", entries}});
    }
    json header = {{"format", "smcae-model"},
                   {"version", kVersion},
                   {"variant", to_string(model.variant)},
                   {"config", config_to_json(model.config)},
                   {"layers", layers},
                   {"blocks", w.blocks},
                   {"training_log", log}};
    if (model.scaler) header["scaler"] = {{"lo", model.scaler->lo}, {"hi", model.scaler->hi}};

    const std::string text = header.dump();
    std::string out(kMagic, sizeof(kMagic));
    const std::uint32_t version = kVersion;
    const std::uint64_t length = text.size();
    out.append(reinterpret_cast<const char*>(&version), sizeof(version));
    out.append(reinterpret_cast<const char*>(&length), sizeof(length));
    out += text;
    out += w.payload;
    return out;
}

SmcaeModel deserialize_model(const std::string& bytes) {
    constexpr std::size_t prefix = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (bytes.size() < prefix || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("not an SMCAE model container");
    }
    std::uint32_t version = 0;
    std::uint64_t length = 0;
    std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
    std::memcpy(&length, bytes.data() + sizeof(kMagic) + sizeof(version), sizeof(length));
    if (version != kVersion) throw ParseError("unsupported model container version " + std::to_string(version));
    if (prefix + length > bytes.size()) throw ParseError("model header truncated");

    const json header = json::parse(bytes.substr(prefix, length));
    const std::string_view payload(bytes.data() + prefix + length, bytes.size() - prefix - length);
    const BlockReader r(header.at("blocks"), payload);

    SmcaeModel m;
    m.variant = parse_variant(header.at("variant").get<std::string>());
    m.config = config_from_json(header.at("config"));
    const auto& layers = header.at("layers");
    for (std::size_t j = 0; j < layers.size(); ++j) {
        const std::string p = "layer" + std::to_string(j + 1) + ".";
        SmcaeLayer l;
        l.enc_w = r.matrix(p + "enc_w");
        l.enc_b = r.vector(p + "enc_b");
        l.left_w = r.matrix(p + "left_w");
        l.left_b = r.vector(p + "left_b");
        if (layers[j].at("has_right").get<bool>()) {
            l.right_w = r.matrix(p + "right_w");
            l.right_b = r.vector(p + "right_b");
        }
        l.validate();
        m.layers.push_back(std::move(l));
    }
    if (header.contains("scaler")) {
        FeatureScaler s;
        s.min = r.vector("scaler.min");
        s.max = r.vector("scaler.max");
        s.lo = header["scaler"].at("lo").get<double>();
        s.hi = header["scaler"].at("hi").get<double>();
        m.scaler = std::move(s);
    }
    for (const auto& st : header.at("training_log")) {
        TrainingStage stage;
        stage.name = st.at("name").get<std::string>();
        stage.iterations = st.at("iterations").get<int>();
        stage.evaluations = st.at("evaluations").get<int>();
        stage.status = status_from_string(st.at("status").get<std::string>());
        for (const auto& e : st.at("entries")) {
            stage.entries.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<double>(),
                                     e.at(3).get<double>()});
        }
        m.training_log.push_back(std::move(stage));
    }
    return m;
}

void save_model(const SmcaeModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const std::string bytes = serialize_model(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing model to '" + path + "'");
}

SmcaeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str());
}

}  // namespace smcae
