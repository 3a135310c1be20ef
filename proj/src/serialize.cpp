#include "koop/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace koop {

namespace {

std::vector<std::uint8_t> doubles_to_le_bytes(const double* data, std::size_t count) {
    std::vector<std::uint8_t> bytes(count * 8);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, data + i, 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    return bytes;
}

std::vector<double> le_bytes_to_doubles(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() % 8 != 0) throw ParseError("float payload size not a multiple of 8", 0);
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        std::memcpy(&values[i], &bits, 8);
    }
    return values;
}

Eigen::Vector3d vector3_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-element array", 0);
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json vector3_to_json(const Eigen::Vector3d& v) { return Json::array({v[0], v[1], v[2]}); }

Json normalization_to_json(const Normalization& n) {
    Json j;
    j["mean"] = vector3_to_json(n.mean);
    j["scale"] = vector3_to_json(n.scale);
    return j;
}

Normalization normalization_from_json(const Json& j) {
    Normalization n;
    n.mean = vector3_from_json(j.at("mean"));
    n.scale = vector3_from_json(j.at("scale"));
    return n;
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = base64_encode(doubles_to_le_bytes(m.data(), static_cast<std::size_t>(m.size())));
    return j;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const std::vector<double> values = le_bytes_to_doubles(base64_decode(j.at("data").get<std::string>()));
    if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
        throw ParseError("matrix payload size does not match rows*cols", 0);
    }
    Eigen::MatrixXd m(rows, cols);
    std::memcpy(m.data(), values.data(), values.size() * sizeof(double));
    return m;
}

Json dictionary_to_json(const Dictionary& dict) {
    Json j;
    j["kind"] = dict.kind();
    j["n_lift"] = dict.lifted_dim();
    if (const auto* poly = dynamic_cast<const PolynomialDictionary*>(&dict)) {
        j["degree"] = poly->degree();
    } else if (const auto* rbf = dynamic_cast<const RbfDictionary*>(&dict)) {
        j["eps"] = rbf->eps();
        j["centers"] = matrix_to_json(rbf->centers());
        j["normalization"] = normalization_to_json(rbf->normalization());
    } else if (const auto* nn = dynamic_cast<const NeuralDictionary*>(&dict)) {
        j["normalization"] = normalization_to_json(nn->normalization());
        Json layers = Json::array();
        const MlpParams& theta = nn->params();
        for (std::size_t l = 0; l < theta.weights.size(); ++l) {
            Json layer;
            layer["weight"] = matrix_to_json(theta.weights[l]);
            layer["bias"] = matrix_to_json(theta.biases[l]);
            layers.push_back(layer);
        }
        j["layers"] = layers;
    } else {
        throw ConfigError("cannot serialize dictionary kind '" + dict.kind() + "'");
    }
    return j;
}

DictionaryPtr dictionary_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "polynomial") {
        return std::make_shared<PolynomialDictionary>(j.at("degree").get<int>());
    }
    if (kind.rfind("rbf_", 0) == 0) {
        const RbfKind rk = rbf_kind_from_name(kind.substr(4));
        return std::make_shared<RbfDictionary>(rk, matrix_from_json(j.at("centers")),
                                               j.at("eps").get<double>(),
                                               normalization_from_json(j.at("normalization")));
    }
    if (kind == "nn") {
        MlpParams theta;
        for (const Json& layer : j.at("layers")) {
            theta.weights.push_back(matrix_from_json(layer.at("weight")));
            const Eigen::MatrixXd b = matrix_from_json(layer.at("bias"));
            theta.biases.push_back(b.col(0));
        }
        return std::make_shared<NeuralDictionary>(std::move(theta),
                                                  normalization_from_json(j.at("normalization")),
                                                  j.at("n_lift").get<int>());
    }
    throw ConfigError("unknown dictionary kind '" + kind + "' in serialized model");
}

Json model_to_json(const KoopmanModel& model) {
    Json j;
    j["format"] = "koopman-model-v1";
    Json dims;
    dims["n"] = 3;
    dims["n_u"] = model.n_inputs();
    dims["n_w"] = model.n_disturbances();
    dims["n_y"] = model.n_outputs();
    dims["n_lift"] = model.n_lift();
    j["dims"] = dims;
    j["A"] = matrix_to_json(model.A);
    j["B"] = matrix_to_json(model.B);
    j["D"] = matrix_to_json(model.D);
    j["E"] = matrix_to_json(model.E);
    j["dictionary"] = dictionary_to_json(*model.dictionary);
    return j;
}

KoopmanModel model_from_json(const Json& j) {
    if (j.value("format", "") != "koopman-model-v1") {
        throw ParseError("unrecognized model format", 0);
    }
    KoopmanModel model;
    model.A = matrix_from_json(j.at("A"));
    model.B = matrix_from_json(j.at("B"));
    model.D = matrix_from_json(j.at("D"));
    model.E = matrix_from_json(j.at("E"));
    model.dictionary = dictionary_from_json(j.at("dictionary"));
    if (model.A.rows() != model.dictionary->lifted_dim()) {
        throw ParseError("model operator size does not match its dictionary", 0);
    }
    return model;
}

void save_model(const std::string& path, const KoopmanModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << model_to_json(model).dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

KoopmanModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError(std::string("invalid model JSON: ") + e.what(), 0);
    }
    return model_from_json(j);
}

}  // namespace koop
