#ifndef SEQLAB_MODELS_SERIALIZE_HPP
#define SEQLAB_MODELS_SERIALIZE_HPP

#include <json.hpp>
#include <string>

#include "seqlab/models/families.hpp"

namespace seqlab::models {

using json = nlohmann::json;

// Versioned model format; doubles round-trip exactly through the shortest
// decimal representation the JSON writer emits.
json model_to_json(const CoreModel& model);
CoreModel model_from_json(const json& j);

json teacher_to_json(const Teacher& teacher);
Teacher teacher_from_json(const json& j);

void save_model(const std::string& path, const Teacher& teacher);
Teacher load_model(const std::string& path);

}  // namespace seqlab::models

#endif  // SEQLAB_MODELS_SERIALIZE_HPP
