#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace spv {

/// Incremental 64-bit FNV-1a; used for reproducibility digests, not security.
class Digest {
public:
    Digest& update(std::string_view bytes);
    Digest& update(const void* data, std::size_t size);
    std::uint64_t value() const { return h_; }
    std::string hex() const;

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string digest_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

}  // namespace spv
