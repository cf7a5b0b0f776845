#pragma once

#include "mppn/config.hpp"
#include "mppn/forecaster.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace mppn {

// Binary layout, all integers and floats little-endian:
//   "MPPN"  u32 version  u64 config_len  config text (RunConfig::to_text)
//   u64 tensor_count, then per tensor:
//   u32 name_len  name  u32 rank  rank x u64 dims  numel x f64 payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    RunConfig config;
    std::vector<NamedTensor> tensors;

    const Tensor& find(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Throws FormatError naming the byte offset of the first bad field.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace mppn
