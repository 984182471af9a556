#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgap/tensor.hpp"

namespace kgap {

// Word vectors, one row per token. Lookups try the exact token, then its
// lowercase form; anything else is out of vocabulary (id -1, zero vector).
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::vector<std::string> tokens, ad::Tensor<float> matrix);

    // Text format: token followed by `dim` space-separated floats per line.
    // The dimension is taken from the first line. When `keep` is non-null
    // only those tokens (or their lowercase forms) are retained.
    static EmbeddingTable load(std::istream& in, const std::unordered_set<std::string>* keep = nullptr);
    static EmbeddingTable load_file(const std::string& path, const std::unordered_set<std::string>* keep = nullptr);

    std::size_t size() const { return tokens_.size(); }
    std::size_t dim() const { return matrix_.cols(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const ad::Tensor<float>& matrix() const { return matrix_; }

    int id_of(std::string_view token) const;
    std::vector<int> ids_of(const std::vector<std::string>& tokens) const;

    // m x dim rows for the ids; negative ids give zero rows.
    template <typename T>
    ad::Tensor<T> rows(const std::vector<int>& ids) const {
        ad::Tensor<T> out(ids.size(), dim());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0) continue;
            auto src = matrix_.row(static_cast<std::size_t>(ids[i]));
            for (std::size_t j = 0; j < dim(); ++j) out(i, j) = static_cast<T>(src[j]);
        }
        return out;
    }

private:
    std::vector<std::string> tokens_;
    ad::Tensor<float> matrix_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace kgap
