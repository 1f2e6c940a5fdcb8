#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spv/grad/nn.hpp"

namespace spv::grad {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// "SPVW" container: u16 version, kind tag, JSON metadata, then named
/// float64 tensors, all little-endian.
struct Checkpoint {
    std::string kind;
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
    std::vector<NamedTensor> tensors;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spv::grad
