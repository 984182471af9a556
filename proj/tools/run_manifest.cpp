#include "run_manifest.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <iterator>

#include "kgap/error.hpp"

namespace kgap::cli {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::uint64_t hash_file(const fs::path& p, std::uint64_t h) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IngestError("cannot read " + p.string());
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    }
    return h;
}

}  // namespace

std::string hash_path(const fs::path& p) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(p))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            h = fnv1a64(fs::relative(f, p).generic_string(), h);
            h = hash_file(f, h);
        }
    } else {
        h = hash_file(p, h);
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunManifest::RunManifest(std::string command)
    : command_(std::move(command)), started_(std::chrono::system_clock::now()), clock_(std::chrono::steady_clock::now()) {}

void RunManifest::set_config(const std::string& path) {
    config_ = path;
    if (!path.empty()) add_input("config", path);
}

void RunManifest::add_input(const std::string& role, const std::string& path) {
    inputs_[role] = {{"path", path}, {"hash", hash_path(path)}};
}

void RunManifest::add_output(const std::string& path) { outputs_.push_back(path); }

void RunManifest::set_seeds(const std::vector<std::uint64_t>& seeds) { seeds_ = seeds; }

nlohmann::json RunManifest::to_json() const {
    auto t = std::chrono::system_clock::to_time_t(started_);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();

    nlohmann::json j{{"command", command_},
                     {"config", config_.empty() ? nlohmann::json(nullptr) : nlohmann::json(config_)},
                     {"inputs", inputs_},
                     {"seeds", seeds_},
                     {"outputs", outputs_},
                     {"started_at", stamp},
                     {"wall_clock_seconds", wall}};
    for (auto it = extra_.begin(); it != extra_.end(); ++it) j[it.key()] = it.value();
    return j;
}

void RunManifest::write(const fs::path& path) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IngestError("cannot write manifest " + path.string());
    out << to_json().dump(2) << '\n';
}

}  // namespace kgap::cli
