#include "amfsl/checkpoint.h"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "json.hpp"

namespace amfsl {

using json = nlohmann::json;

std::string checkpoint_json(const ModelParams& params, std::string_view config_json) {
  std::string out = fmt::format("{{\n  \"format_version\": {},\n  \"config\": {},\n  \"tensors\": {{",
                                kCheckpointFormatVersion,
                                config_json.empty() ? "{}" : config_json);
  const auto tensors = params.named_tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, t] = tensors[i];
    out += fmt::format("{}\n    {}: {{\"shape\": [{}], \"values\": [", i ? "," : "",
                       json(name).dump(), fmt::join(t.shape(), ", "));
    const auto v = t.values();
    for (std::size_t j = 0; j < v.size(); ++j)
      out += fmt::format("{}{:.17g}", j ? ", " : "", v[j]);
    out += "]}";
  }
  out += "\n  }\n}\n";
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::string_view config_json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << checkpoint_json(params, config_json);
  if (!out) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

Checkpoint parse_checkpoint(std::string_view text) {
  // Keep document order so tensor order survives the round trip.
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(fmt::format("checkpoint: {}", e.what()));
  }
  Checkpoint ck;
  try {
    ck.format_version = doc.at("format_version").get<int>();
    if (ck.format_version != kCheckpointFormatVersion) {
      throw std::runtime_error(
          fmt::format("checkpoint: unsupported format_version {}", ck.format_version));
    }
    ck.config_json = doc.at("config").dump();
    for (const auto& [name, entry] : doc.at("tensors").items()) {
      auto shape = entry.at("shape").get<Shape>();
      auto values = entry.at("values").get<std::vector<double>>();
      ck.tensors.emplace_back(name, Tensor::from(std::move(shape), std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(fmt::format("checkpoint: {}", e.what()));
  } catch (const ShapeError& e) {
    throw std::runtime_error(fmt::format("checkpoint: {}", e.what()));
  }
  return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(text);
}

void load_params(ModelParams& params, const Checkpoint& checkpoint) {
  auto targets = params.named_tensors();
  if (targets.size() != checkpoint.tensors.size()) {
    throw std::runtime_error(fmt::format("checkpoint has {} tensors, model expects {}",
                                         checkpoint.tensors.size(), targets.size()));
  }
  for (auto& [name, target] : targets) {
    auto it = std::find_if(checkpoint.tensors.begin(), checkpoint.tensors.end(),
                           [&](const NamedTensor& nt) { return nt.first == name; });
    if (it == checkpoint.tensors.end()) {
      throw std::runtime_error(fmt::format("checkpoint lacks tensor '{}'", name));
    }
    if (it->second.shape() != target.shape()) {
      throw std::runtime_error(fmt::format("checkpoint tensor '{}' has shape {}, model expects {}",
                                           name, shape_string(it->second.shape()),
                                           shape_string(target.shape())));
    }
    auto src = it->second.values();
    std::copy(src.begin(), src.end(), target.mutable_values().begin());
  }
}

}  // namespace amfsl
