#pragma once

#include <json.hpp>
#include <memory>
#include <string>

#include "koop/dictionary.hpp"
#include "koop/edmd.hpp"
#include "koop/nn_dictionary.hpp"

namespace koop {

using Json = nlohmann::ordered_json;

/// Matrix payloads are {rows, cols, data} with data the base64 of the
/// column-major little-endian 64-bit floats, so round-trips are bit-exact.
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json dictionary_to_json(const Dictionary& dict);
DictionaryPtr dictionary_from_json(const Json& j);

Json model_to_json(const KoopmanModel& model);
KoopmanModel model_from_json(const Json& j);

void save_model(const std::string& path, const KoopmanModel& model);
KoopmanModel load_model(const std::string& path);

}  // namespace koop
