#include "kgap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace kgap::ad {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
constexpr const char* dtype_name() {
    return sizeof(T) == 4 ? "float32" : "float64";
}

template <typename S, typename T>
void read_payload(std::ifstream& in, std::size_t offset, std::size_t count, Tensor<T>& out,
                  const std::string& name) {
    std::vector<S> buf(count);
    in.seekg(static_cast<std::streamoff>(offset * sizeof(S)));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(S)));
    if (!in) throw IngestError("checkpoint payload truncated at tensor '" + name + "'", 0);
    for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<T>(buf[i]);
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet<T>& params,
                     const CheckpointMetadata& metadata) {
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw IngestError("cannot write " + (dir / "params.bin").string(), 0);

    nlohmann::json tensors = nlohmann::json::array();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        const auto& data = p.value.data();
        bin.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
        tensors.push_back({{"name", p.name},
                           {"shape", {p.value.rows(), p.value.cols()}},
                           {"offset", offset},
                           {"count", data.size()}});
        offset += data.size();
    }
    if (!bin) throw IngestError("failed writing " + (dir / "params.bin").string(), 0);

    nlohmann::json manifest{{"format", "kgap-checkpoint"},
                            {"version", kCheckpointVersion},
                            {"dtype", dtype_name<T>()},
                            {"seed", params.seed()},
                            {"tensors", tensors},
                            {"metadata", metadata}};
    std::ofstream js(dir / "manifest.json", std::ios::trunc);
    if (!js) throw IngestError("cannot write " + (dir / "manifest.json").string(), 0);
    js << manifest.dump(2) << '\n';
}

template <typename T>
ParameterSet<T> load_checkpoint(const std::filesystem::path& dir, CheckpointMetadata* metadata) {
    std::ifstream js(dir / "manifest.json");
    if (!js) throw IngestError("cannot open " + (dir / "manifest.json").string(), 0);
    nlohmann::json manifest;
    try {
        js >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("bad checkpoint manifest: " + std::string(e.what()), 0);
    }
    if (manifest.value("format", "") != "kgap-checkpoint")
        throw ValidationError("not a kgap checkpoint: " + dir.string());
    if (manifest.value("version", 0) != kCheckpointVersion)
        throw ValidationError("unsupported checkpoint version " + manifest["version"].dump());
    const std::string dtype = manifest.value("dtype", "");
    if (dtype != "float32" && dtype != "float64") throw ValidationError("unknown checkpoint dtype '" + dtype + "'");

    std::ifstream bin(dir / "params.bin", std::ios::binary);
    if (!bin) throw IngestError("cannot open " + (dir / "params.bin").string(), 0);

    ParameterSet<T> params(manifest.value("seed", std::uint64_t{0}));
    for (const auto& t : manifest.at("tensors")) {
        const std::string name = t.at("name");
        auto rows = t.at("shape").at(0).get<std::size_t>();
        auto cols = t.at("shape").at(1).get<std::size_t>();
        auto count = t.at("count").get<std::size_t>();
        auto offset = t.at("offset").get<std::size_t>();
        if (rows * cols != count) throw ValidationError("tensor '" + name + "' count does not match shape");
        Tensor<T> value(rows, cols);
        if (dtype == "float32")
            read_payload<float>(bin, offset, count, value, name);
        else
            read_payload<double>(bin, offset, count, value, name);
        params.add(name, std::move(value));
    }
    if (metadata != nullptr) *metadata = manifest.value("metadata", CheckpointMetadata{});
    return params;
}

template void save_checkpoint<float>(const std::filesystem::path&, const ParameterSet<float>&,
                                     const CheckpointMetadata&);
template void save_checkpoint<double>(const std::filesystem::path&, const ParameterSet<double>&,
                                      const CheckpointMetadata&);
template ParameterSet<float> load_checkpoint<float>(const std::filesystem::path&, CheckpointMetadata*);
template ParameterSet<double> load_checkpoint<double>(const std::filesystem::path&, CheckpointMetadata*);

}  // namespace kgap::ad
