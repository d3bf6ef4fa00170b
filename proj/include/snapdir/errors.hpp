#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace snapdir {

// Error categories map onto CLI exit codes (see tools/snapdir_cli.cpp).

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataIntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingArtifactError : public std::runtime_error {
public:
    MissingArtifactError(std::string stage, const std::string& what)
        : std::runtime_error(what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace snapdir
