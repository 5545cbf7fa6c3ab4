#pragma once

#include <string>

#include <json.hpp>

#include "dkv/koopman.hpp"
#include "dkv/mlp.hpp"

namespace dkv {

inline constexpr const char* kCheckpointFormat = "dkv-koopman-checkpoint";
inline constexpr int kCheckpointVersion = 1;

nlohmann::json network_to_json(const MlpNetwork& net);
MlpNetwork network_from_json(const nlohmann::json& j);

nlohmann::json normalizer_to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::json& j);

/// Layout is documented in docs/checkpoint.md. `train_config` is recorded
/// verbatim when not null.
nlohmann::json checkpoint_to_json(const KoopmanModel& model, const nlohmann::json& train_config = nullptr);
KoopmanModel checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const KoopmanModel& model,
                     const nlohmann::json& train_config = nullptr);
KoopmanModel load_checkpoint(const std::string& path);

}  // namespace dkv
