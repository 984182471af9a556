#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kgap/error.hpp"

namespace kgap::ad {

using Rng = std::mt19937_64;

// Dense row-major matrix. Every value in the model is rank 2: sequences are
// m x h, vectors are 1 x h and scalars 1 x 1.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, T fill = T(0)) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor(std::size_t rows, std::size_t cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                 std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<T>> rows) {
        std::size_t r = rows.size();
        std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<T> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("ragged tensor literal");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor(r, c, std::move(data));
    }

    static Tensor scalar(T v) { return Tensor(1, 1, v); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    std::array<std::size_t, 2> shape() const { return {rows_, cols_}; }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_string() const { return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")"; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    T item() const {
        if (size() != 1) throw ContractViolation("item() on non-scalar tensor " + shape_string());
        return data_[0];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor& operator+=(const Tensor& o) {
        if (!same_shape(o)) throw DimensionError("+= shape mismatch " + shape_string() + " vs " + o.shape_string());
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    bool all_finite() const {
        for (auto v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(rows_, cols_, std::move(out));
    }

    bool operator==(const Tensor&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;  // empty (0x0) until zero_grad() or backward() touches it

    bool has_grad() const { return grad.same_shape(value) && value.size() > 0; }
};

// Named, trainable tensors in insertion order. Copies are deep.
template <typename T>
class ParameterSet {
public:
    ParameterSet() = default;
    explicit ParameterSet(std::uint64_t seed) : seed_(seed) {}

    ParameterSet(const ParameterSet& o) : seed_(o.seed_) {
        for (const auto& p : o.params_) params_.push_back(std::make_unique<Parameter<T>>(*p));
    }
    ParameterSet& operator=(const ParameterSet& o) {
        if (this != &o) {
            ParameterSet copy(o);
            *this = std::move(copy);
        }
        return *this;
    }
    ParameterSet(ParameterSet&&) noexcept = default;
    ParameterSet& operator=(ParameterSet&&) noexcept = default;

    Parameter<T>& add(std::string name, Tensor<T> value) {
        if (find(name) != nullptr) throw ContractViolation("duplicate parameter name '" + name + "'");
        params_.push_back(std::make_unique<Parameter<T>>(Parameter<T>{std::move(name), std::move(value), {}}));
        return *params_.back();
    }

    Parameter<T>* find(const std::string& name) {
        for (auto& p : params_)
            if (p->name == name) return p.get();
        return nullptr;
    }
    const Parameter<T>* find(const std::string& name) const {
        for (const auto& p : params_)
            if (p->name == name) return p.get();
        return nullptr;
    }
    Parameter<T>& get(const std::string& name) {
        auto* p = find(name);
        if (p == nullptr) throw ContractViolation("unknown parameter '" + name + "'");
        return *p;
    }
    const Parameter<T>& get(const std::string& name) const {
        auto* p = find(name);
        if (p == nullptr) throw ContractViolation("unknown parameter '" + name + "'");
        return *p;
    }

    std::size_t size() const { return params_.size(); }
    Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
    const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

    std::size_t element_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p->value.size();
        return n;
    }

    void zero_grad() {
        for (auto& p : params_) p->grad = Tensor<T>(p->value.rows(), p->value.cols());
    }

    bool all_finite() const {
        for (const auto& p : params_)
            if (!p->value.all_finite()) return false;
        return true;
    }

    std::uint64_t seed() const { return seed_; }

    template <typename U>
    ParameterSet<U> cast() const {
        ParameterSet<U> out(seed_);
        for (const auto& p : params_) out.add(p->name, p->value.template cast<U>());
        return out;
    }

    // Copies values (not grads) from a set with identical names and shapes.
    template <typename U>
    void assign_values(const ParameterSet<U>& other) {
        if (other.size() != size()) throw ContractViolation("parameter set size mismatch");
        for (std::size_t i = 0; i < size(); ++i) {
            const auto& src = other[i];
            auto& dst = *params_[i];
            if (src.name != dst.name || src.value.shape() != dst.value.shape())
                throw ContractViolation("parameter '" + dst.name + "' does not match '" + src.name + "'");
            dst.value = src.value.template cast<T>();
        }
    }

private:
    std::uint64_t seed_ = 0;
    std::vector<std::unique_ptr<Parameter<T>>> params_;
};

// U(-bound, bound) initialization.
template <typename T>
Tensor<T> uniform_tensor(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> t(rows, cols);
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    return t;
}

}  // namespace kgap::ad
