#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace snapdir::digest {

/// Incremental SHA-256.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view bytes);
    /// Lowercase hex digest; the object cannot be updated afterwards.
    std::string hex();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);

/// Throws MissingArtifactError(stage, ...) when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path, const std::string& stage = "");

}  // namespace snapdir::digest
