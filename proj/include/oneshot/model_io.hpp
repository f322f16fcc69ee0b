#pragma once

#include <string>

#include "oneshot/model.hpp"

namespace oneshot {

// OSM1 model container: magic, version, config JSON, optimizer step, then a
// named tensor table (parameters, Adam moments, batchnorm running stats),
// little-endian float32 payloads. save(load(x)) is byte-identical.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace oneshot
