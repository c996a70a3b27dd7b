#ifndef AMFSL_CHECKPOINT_H_
#define AMFSL_CHECKPOINT_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "amfsl/model.h"

namespace amfsl {

inline constexpr int kCheckpointFormatVersion = 1;

// JSON document:
//   {"format_version": 1, "config": {...},
//    "tensors": {"<dotted.name>": {"shape": [...], "values": [...]}, ...}}
// Tensors appear in ModelParams::named_tensors() order; values carry 17
// significant digits so a reload reproduces every double exactly.
struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  std::string config_json;  // compact JSON object
  std::vector<NamedTensor> tensors;
};

std::string checkpoint_json(const ModelParams& params, std::string_view config_json);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::string_view config_json);

Checkpoint parse_checkpoint(std::string_view text);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into `params`, whose tensor names and shapes must
// match the checkpoint exactly.
void load_params(ModelParams& params, const Checkpoint& checkpoint);

}  // namespace amfsl

#endif  // AMFSL_CHECKPOINT_H_
