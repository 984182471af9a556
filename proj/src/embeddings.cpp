#include "kgap/embeddings.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "kgap/text.hpp"

namespace kgap {

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, ad::Tensor<float> matrix)
    : tokens_(std::move(tokens)), matrix_(std::move(matrix)) {
    if (tokens_.size() != matrix_.rows())
        throw ValidationError("embedding table has " + std::to_string(tokens_.size()) + " tokens but " +
                              std::to_string(matrix_.rows()) + " rows");
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
            throw ValidationError("duplicate embedding token '" + tokens_[i] + "'");
}

EmbeddingTable EmbeddingTable::load(std::istream& in, const std::unordered_set<std::string>* keep) {
    std::vector<std::string> tokens;
    std::vector<float> values;
    std::unordered_set<std::string> seen;
    std::size_t dim = 0;
    std::size_t line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto space = line.find(' ');
        if (space == std::string::npos || space == 0) throw IngestError("malformed vector line", line_no);
        std::string token = line.substr(0, space);

        std::vector<float> row;
        const char* p = line.data() + space;
        const char* end = line.data() + line.size();
        while (p < end) {
            while (p < end && *p == ' ') ++p;
            if (p == end) break;
            float v = 0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc()) throw IngestError("bad number in vector for '" + token + "'", line_no);
            row.push_back(v);
            p = next;
        }
        if (dim == 0) dim = row.size();
        if (row.size() != dim || dim == 0)
            throw IngestError("vector for '" + token + "' has " + std::to_string(row.size()) + " values, expected " +
                                  std::to_string(dim),
                              line_no);
        if (keep != nullptr && !keep->contains(token) && !keep->contains(text::to_lower(token))) continue;
        if (!seen.insert(token).second) continue;  // first occurrence wins
        tokens.push_back(std::move(token));
        values.insert(values.end(), row.begin(), row.end());
    }
    if (in.bad()) throw IngestError("failed reading vectors", line_no);
    std::size_t n = tokens.size();
    return EmbeddingTable(std::move(tokens), ad::Tensor<float>(n, dim, std::move(values)));
}

EmbeddingTable EmbeddingTable::load_file(const std::string& path, const std::unordered_set<std::string>* keep) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    return load(in, keep);
}

int EmbeddingTable::id_of(std::string_view token) const {
    if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
    if (auto it = index_.find(text::to_lower(token)); it != index_.end()) return it->second;
    return -1;
}

std::vector<int> EmbeddingTable::ids_of(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id_of(t));
    return ids;
}

}  // namespace kgap
