#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace kgap::cli {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

// FNV-1a over a file's bytes, or over (relative name, bytes) of every
// regular file below a directory in sorted order. Formatted "fnv1a64:<hex>".
std::string hash_path(const std::filesystem::path& p);

class RunManifest {
public:
    explicit RunManifest(std::string command);

    void set_config(const std::string& path);
    void add_input(const std::string& role, const std::string& path);
    void add_output(const std::string& path);
    void set_seeds(const std::vector<std::uint64_t>& seeds);
    void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& path) const;

private:
    std::string command_;
    std::string config_;
    nlohmann::json inputs_ = nlohmann::json::object();
    nlohmann::json outputs_ = nlohmann::json::array();
    std::vector<std::uint64_t> seeds_;
    nlohmann::json extra_ = nlohmann::json::object();
    std::chrono::system_clock::time_point started_;
    std::chrono::steady_clock::time_point clock_;
};

}  // namespace kgap::cli
