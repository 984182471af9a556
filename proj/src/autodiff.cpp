#include "kgap/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace kgap::ad {

namespace {

template <typename T>
[[noreturn]] void shape_error(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

void check_axis(int axis) {
    if (axis != 0 && axis != 1) throw DimensionError("axis must be 0 or 1, got " + std::to_string(axis));
}

// Walks the lanes a reduction along `axis` runs over: for axis 1 each row is
// a lane, for axis 0 each column.
struct Lanes {
    std::size_t count;
    std::size_t length;
    std::size_t lane_stride;
    std::size_t step;

    template <typename T>
    Lanes(const Tensor<T>& t, int axis)
        : count(axis == 1 ? t.rows() : t.cols()),
          length(axis == 1 ? t.cols() : t.rows()),
          lane_stride(axis == 1 ? t.cols() : 1),
          step(axis == 1 ? 1 : t.cols()) {}

    std::size_t at(std::size_t lane, std::size_t k) const { return lane * lane_stride + k * step; }
};

template <typename T>
Tensor<T> reduced_shape(const Tensor<T>& t, int axis) {
    return axis == 1 ? Tensor<T>(t.rows(), 1) : Tensor<T>(1, t.cols());
}

enum class Broadcast { same, row, scalar };

template <typename T>
Broadcast broadcast_mode(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.same_shape(b)) return Broadcast::same;
    if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
    shape_error(op, a, b);
}

template <typename T>
std::size_t bindex(Broadcast mode, std::size_t cols, std::size_t i) {
    switch (mode) {
    case Broadcast::same:
        return i;
    case Broadcast::row:
        return i % cols;
    case Broadcast::scalar:
        return 0;
    }
    return 0;
}

template <typename T, typename F, typename D>
Var<T> unary(Var<T> a, F f, D dfdx) {
    auto& tape = *a.tape;
    const auto& x = a.value();
    Tensor<T> y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    auto ai = a.id;
    return tape.push(std::move(y), tape.needs_grad(ai), [ai, dfdx](Tape<T>& t, const Tensor<T>& g) {
        const auto& x = t.value(ai);
        auto& gx = t.grad_of(ai);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(x[i]);
    });
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    const auto& A = a.value();
    const auto& B = b.value();
    if (A.cols() != B.rows()) shape_error("matmul", A, B);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor<T> C(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            T av = A(i, p);
            if (av == T(0)) continue;
            for (std::size_t j = 0; j < n; ++j) C(i, j) += av * B(p, j);
        }
    auto ai = a.id, bi = b.id;
    auto& tape = *a.tape;
    bool needs = tape.needs_grad(ai) || tape.needs_grad(bi);
    return tape.push(std::move(C), needs, [ai, bi, m, k, n](Tape<T>& t, const Tensor<T>& g) {
        const auto& A = t.value(ai);
        const auto& B = t.value(bi);
        if (t.needs_grad(ai)) {
            auto& gA = t.grad_of(ai);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    T gv = g(i, j);
                    if (gv == T(0)) continue;
                    for (std::size_t p = 0; p < k; ++p) gA(i, p) += gv * B(p, j);
                }
        }
        if (t.needs_grad(bi)) {
            auto& gB = t.grad_of(bi);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    T av = A(i, p);
                    if (av == T(0)) continue;
                    for (std::size_t j = 0; j < n; ++j) gB(p, j) += av * g(i, j);
                }
        }
    });
}

template <typename T>
Var<T> transpose(Var<T> a) {
    const auto& A = a.value();
    Tensor<T> out(A.cols(), A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) out(j, i) = A(i, j);
    auto ai = a.id;
    return a.tape->push(std::move(out), a.tape->needs_grad(ai), [ai](Tape<T>& t, const Tensor<T>& g) {
        auto& gA = t.grad_of(ai);
        for (std::size_t i = 0; i < gA.rows(); ++i)
            for (std::size_t j = 0; j < gA.cols(); ++j) gA(i, j) += g(j, i);
    });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    const auto& A = a.value();
    const auto& B = b.value();
    auto mode = broadcast_mode("add", A, B);
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[bindex<T>(mode, A.cols(), i)];
    auto ai = a.id, bi = b.id;
    auto& tape = *a.tape;
    bool needs = tape.needs_grad(ai) || tape.needs_grad(bi);
    std::size_t cols = A.cols();
    return tape.push(std::move(out), needs, [ai, bi, mode, cols](Tape<T>& t, const Tensor<T>& g) {
        if (t.needs_grad(ai)) t.grad_of(ai) += g;
        if (t.needs_grad(bi)) {
            auto& gB = t.grad_of(bi);
            for (std::size_t i = 0; i < g.size(); ++i) gB[bindex<T>(mode, cols, i)] += g[i];
        }
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    const auto& A = a.value();
    const auto& B = b.value();
    auto mode = broadcast_mode("sub", A, B);
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[bindex<T>(mode, A.cols(), i)];
    auto ai = a.id, bi = b.id;
    auto& tape = *a.tape;
    bool needs = tape.needs_grad(ai) || tape.needs_grad(bi);
    std::size_t cols = A.cols();
    return tape.push(std::move(out), needs, [ai, bi, mode, cols](Tape<T>& t, const Tensor<T>& g) {
        if (t.needs_grad(ai)) t.grad_of(ai) += g;
        if (t.needs_grad(bi)) {
            auto& gB = t.grad_of(bi);
            for (std::size_t i = 0; i < g.size(); ++i) gB[bindex<T>(mode, cols, i)] -= g[i];
        }
    });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    const auto& A = a.value();
    const auto& B = b.value();
    auto mode = broadcast_mode("mul", A, B);
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[bindex<T>(mode, A.cols(), i)];
    auto ai = a.id, bi = b.id;
    auto& tape = *a.tape;
    bool needs = tape.needs_grad(ai) || tape.needs_grad(bi);
    std::size_t cols = A.cols();
    return tape.push(std::move(out), needs, [ai, bi, mode, cols](Tape<T>& t, const Tensor<T>& g) {
        const auto& A = t.value(ai);
        const auto& B = t.value(bi);
        if (t.needs_grad(ai)) {
            auto& gA = t.grad_of(ai);
            for (std::size_t i = 0; i < g.size(); ++i) gA[i] += g[i] * B[bindex<T>(mode, cols, i)];
        }
        if (t.needs_grad(bi)) {
            auto& gB = t.grad_of(bi);
            for (std::size_t i = 0; i < g.size(); ++i) gB[bindex<T>(mode, cols, i)] += g[i] * A[i];
        }
    });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
    return unary(a, [factor](T x) { return x * factor; }, [factor](T) { return factor; });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
    check_axis(axis);
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    auto& tape = *parts.front().tape;
    const auto& first = parts.front().value();
    std::size_t rows = 0, cols = 0;
    bool needs = false;
    for (const auto& p : parts) {
        const auto& v = p.value();
        if (axis == 0) {
            if (v.cols() != first.cols()) shape_error("concat(axis=0)", first, v);
            rows += v.rows();
            cols = v.cols();
        } else {
            if (v.rows() != first.rows()) shape_error("concat(axis=1)", first, v);
            cols += v.cols();
            rows = v.rows();
        }
        needs = needs || tape.needs_grad(p.id);
    }
    Tensor<T> out(rows, cols);
    std::vector<std::size_t> ids;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const auto& v = p.value();
        for (std::size_t i = 0; i < v.rows(); ++i)
            for (std::size_t j = 0; j < v.cols(); ++j) {
                if (axis == 0)
                    out(offset + i, j) = v(i, j);
                else
                    out(i, offset + j) = v(i, j);
            }
        offset += axis == 0 ? v.rows() : v.cols();
        ids.push_back(p.id);
    }
    return tape.push(std::move(out), needs, [ids, axis](Tape<T>& t, const Tensor<T>& g) {
        std::size_t offset = 0;
        for (auto id : ids) {
            const auto& v = t.value(id);
            if (t.needs_grad(id)) {
                auto& gv = t.grad_of(id);
                for (std::size_t i = 0; i < v.rows(); ++i)
                    for (std::size_t j = 0; j < v.cols(); ++j) gv(i, j) += axis == 0 ? g(offset + i, j) : g(i, offset + j);
            }
            offset += axis == 0 ? v.rows() : v.cols();
        }
    });
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end) {
    const auto& A = a.value();
    if (begin > end || end > A.rows())
        throw DimensionError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                             A.shape_string());
    Tensor<T> out(end - begin, A.cols());
    std::copy(A.data().begin() + static_cast<std::ptrdiff_t>(begin * A.cols()),
              A.data().begin() + static_cast<std::ptrdiff_t>(end * A.cols()), out.data().begin());
    auto ai = a.id;
    return a.tape->push(std::move(out), a.tape->needs_grad(ai), [ai, begin](Tape<T>& t, const Tensor<T>& g) {
        auto& gA = t.grad_of(ai);
        std::size_t off = begin * gA.cols();
        for (std::size_t i = 0; i < g.size(); ++i) gA[off + i] += g[i];
    });
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end) {
    const auto& A = a.value();
    if (begin > end || end > A.cols())
        throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                             A.shape_string());
    Tensor<T> out(A.rows(), end - begin);
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = A(i, j);
    auto ai = a.id;
    return a.tape->push(std::move(out), a.tape->needs_grad(ai), [ai, begin](Tape<T>& t, const Tensor<T>& g) {
        auto& gA = t.grad_of(ai);
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gA(i, begin + j) += g(i, j);
    });
}

template <typename T>
Var<T> softmax(Var<T> a, int axis) {
    check_axis(axis);
    const auto& x = a.value();
    if (x.size() == 0) throw DimensionError("softmax of empty tensor " + x.shape_string());
    Tensor<T> y(x.rows(), x.cols());
    Lanes lanes(x, axis);
    for (std::size_t l = 0; l < lanes.count; ++l) {
        T mx = x[lanes.at(l, 0)];
        for (std::size_t k = 1; k < lanes.length; ++k) mx = std::max(mx, x[lanes.at(l, k)]);
        T total = 0;
        for (std::size_t k = 0; k < lanes.length; ++k) {
            auto i = lanes.at(l, k);
            y[i] = std::exp(x[i] - mx);
            total += y[i];
        }
        for (std::size_t k = 0; k < lanes.length; ++k) y[lanes.at(l, k)] /= total;
    }
    auto ai = a.id;
    auto& tape = *a.tape;
    Tensor<T> saved = y;
    return tape.push(std::move(y), tape.needs_grad(ai), [ai, axis, y = std::move(saved)](Tape<T>& t, const Tensor<T>& g) {
        auto& gx = t.grad_of(ai);
        Lanes lanes(y, axis);
        for (std::size_t l = 0; l < lanes.count; ++l) {
            T dot = 0;
            for (std::size_t k = 0; k < lanes.length; ++k) dot += g[lanes.at(l, k)] * y[lanes.at(l, k)];
            for (std::size_t k = 0; k < lanes.length; ++k) {
                auto i = lanes.at(l, k);
                gx[i] += y[i] * (g[i] - dot);
            }
        }
    });
}

template <typename T>
Var<T> log_softmax(Var<T> a, int axis) {
    check_axis(axis);
    const auto& x = a.value();
    if (x.size() == 0) throw DimensionError("log_softmax of empty tensor " + x.shape_string());
    Tensor<T> y(x.rows(), x.cols());
    Lanes lanes(x, axis);
    for (std::size_t l = 0; l < lanes.count; ++l) {
        T mx = x[lanes.at(l, 0)];
        for (std::size_t k = 1; k < lanes.length; ++k) mx = std::max(mx, x[lanes.at(l, k)]);
        T total = 0;
        for (std::size_t k = 0; k < lanes.length; ++k) total += std::exp(x[lanes.at(l, k)] - mx);
        T lse = mx + std::log(total);
        for (std::size_t k = 0; k < lanes.length; ++k) y[lanes.at(l, k)] = x[lanes.at(l, k)] - lse;
    }
    auto ai = a.id;
    auto& tape = *a.tape;
    Tensor<T> probs = y;
    for (auto& v : probs.data()) v = std::exp(v);
    return tape.push(std::move(y), tape.needs_grad(ai),
                     [ai, axis, probs = std::move(probs)](Tape<T>& t, const Tensor<T>& g) {
                         auto& gx = t.grad_of(ai);
                         Lanes lanes(g, axis);
                         for (std::size_t l = 0; l < lanes.count; ++l) {
                             T total = 0;
                             for (std::size_t k = 0; k < lanes.length; ++k) total += g[lanes.at(l, k)];
                             for (std::size_t k = 0; k < lanes.length; ++k) {
                                 auto i = lanes.at(l, k);
                                 gx[i] += g[i] - probs[i] * total;
                             }
                         }
                     });
}

template <typename T>
Var<T> max_reduce(Var<T> a, int axis) {
    check_axis(axis);
    const auto& x = a.value();
    if (x.size() == 0) throw DimensionError("max_reduce of empty tensor " + x.shape_string());
    Tensor<T> y = reduced_shape(x, axis);
    Lanes lanes(x, axis);
    std::vector<std::size_t> argmax(lanes.count);
    for (std::size_t l = 0; l < lanes.count; ++l) {
        std::size_t best = lanes.at(l, 0);
        for (std::size_t k = 1; k < lanes.length; ++k)
            if (x[lanes.at(l, k)] > x[best]) best = lanes.at(l, k);
        argmax[l] = best;
        y[l] = x[best];
    }
    auto ai = a.id;
    return a.tape->push(std::move(y), a.tape->needs_grad(ai),
                        [ai, argmax = std::move(argmax)](Tape<T>& t, const Tensor<T>& g) {
                            auto& gx = t.grad_of(ai);
                            for (std::size_t l = 0; l < argmax.size(); ++l) gx[argmax[l]] += g[l];
                        });
}

template <typename T>
Var<T> mean_reduce(Var<T> a, int axis) {
    check_axis(axis);
    const auto& x = a.value();
    if (x.size() == 0) throw DimensionError("mean_reduce of empty tensor " + x.shape_string());
    Tensor<T> y = reduced_shape(x, axis);
    Lanes lanes(x, axis);
    T inv = T(1) / static_cast<T>(lanes.length);
    for (std::size_t l = 0; l < lanes.count; ++l) {
        T total = 0;
        for (std::size_t k = 0; k < lanes.length; ++k) total += x[lanes.at(l, k)];
        y[l] = total * inv;
    }
    auto ai = a.id;
    return a.tape->push(std::move(y), a.tape->needs_grad(ai), [ai, axis, inv](Tape<T>& t, const Tensor<T>& g) {
        auto& gx = t.grad_of(ai);
        Lanes lanes(gx, axis);
        for (std::size_t l = 0; l < lanes.count; ++l)
            for (std::size_t k = 0; k < lanes.length; ++k) gx[lanes.at(l, k)] += g[l] * inv;
    });
}

template <typename T>
Var<T> sum(Var<T> a) {
    const auto& x = a.value();
    T total = 0;
    for (auto v : x.data()) total += v;
    auto ai = a.id;
    return a.tape->push(Tensor<T>::scalar(total), a.tape->needs_grad(ai), [ai](Tape<T>& t, const Tensor<T>& g) {
        auto& gx = t.grad_of(ai);
        for (auto& v : gx.data()) v += g[0];
    });
}

template <typename T>
Var<T> relu(Var<T> a) {
    return unary(a, [](T x) { return x > T(0) ? x : T(0); }, [](T x) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
    auto f = [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        T e = std::exp(x);
        return e / (T(1) + e);
    };
    return unary(a, f, [f](T x) {
        T s = f(x);
        return s * (T(1) - s);
    });
}

template <typename T>
Var<T> tanh(Var<T> a) {
    return unary(a, [](T x) { return std::tanh(x); }, [](T x) {
        T y = std::tanh(x);
        return T(1) - y * y;
    });
}

template <typename T>
Var<T> embedding_lookup(Var<T> table, const std::vector<int>& ids) {
    const auto& E = table.value();
    Tensor<T> out(ids.size(), E.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0) continue;
        if (static_cast<std::size_t>(ids[i]) >= E.rows())
            throw DimensionError("embedding id " + std::to_string(ids[i]) + " out of range for " + E.shape_string());
        auto src = E.row(static_cast<std::size_t>(ids[i]));
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    auto ti = table.id;
    return table.tape->push(std::move(out), table.tape->needs_grad(ti), [ti, ids](Tape<T>& t, const Tensor<T>& g) {
        auto& gE = t.grad_of(ti);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0) continue;
            auto dst = gE.row(static_cast<std::size_t>(ids[i]));
            auto src = g.row(i);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    });
}

template <typename T>
Var<T> pick(Var<T> a, std::size_t row, std::size_t col) {
    const auto& x = a.value();
    if (row >= x.rows() || col >= x.cols())
        throw DimensionError("pick(" + std::to_string(row) + "," + std::to_string(col) + ") out of range for " +
                             x.shape_string());
    auto ai = a.id;
    std::size_t idx = row * x.cols() + col;
    return a.tape->push(Tensor<T>::scalar(x[idx]), a.tape->needs_grad(ai),
                        [ai, idx](Tape<T>& t, const Tensor<T>& g) { t.grad_of(ai)[idx] += g[0]; });
}

template <typename T>
Var<T> bce_with_logits(Var<T> logits, const std::vector<T>& targets, const std::vector<bool>& mask) {
    const auto& x = logits.value();
    if (x.rows() != 1 || x.cols() != targets.size() || mask.size() != targets.size())
        throw DimensionError("bce_with_logits: logits " + x.shape_string() + " vs " + std::to_string(targets.size()) +
                             " targets and " + std::to_string(mask.size()) + " mask entries");
    std::size_t active = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    auto& tape = *logits.tape;
    if (active == 0) return tape.constant(Tensor<T>::scalar(T(0)));

    T total = 0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        if (!mask[k]) continue;
        T v = x[k];
        total += std::max(v, T(0)) - v * targets[k] + std::log1p(std::exp(-std::abs(v)));
    }
    T inv = T(1) / static_cast<T>(active);
    auto li = logits.id;
    return tape.push(Tensor<T>::scalar(total * inv), tape.needs_grad(li),
                     [li, targets, mask, inv](Tape<T>& t, const Tensor<T>& g) {
                         const auto& x = t.value(li);
                         auto& gx = t.grad_of(li);
                         for (std::size_t k = 0; k < targets.size(); ++k) {
                             if (!mask[k]) continue;
                             T v = x[k];
                             T s = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
                             gx[k] += g[0] * (s - targets[k]) * inv;
                         }
                     });
}

template <typename T>
Tensor<T> dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ContractViolation("dropout probability must be in [0, 1)");
    Tensor<T> mask(rows, cols, T(1));
    if (p == 0.0) return mask;
    std::bernoulli_distribution keep(1.0 - p);
    T scale = static_cast<T>(1.0 / (1.0 - p));
    for (auto& v : mask.data()) v = keep(rng) ? scale : T(0);
    return mask;
}

template <typename T>
Var<T> dropout(Var<T> a, double p, bool training, Rng& rng) {
    if (!training || p == 0.0) return a;
    auto mask = a.tape->constant(dropout_mask<T>(a.rows(), a.cols(), p, rng));
    return mul(a, mask);
}

#define KGAP_INSTANTIATE(T)                                                                             \
    template Var<T> matmul(Var<T>, Var<T>);                                                             \
    template Var<T> transpose(Var<T>);                                                                  \
    template Var<T> add(Var<T>, Var<T>);                                                                \
    template Var<T> sub(Var<T>, Var<T>);                                                                \
    template Var<T> mul(Var<T>, Var<T>);                                                                \
    template Var<T> scale(Var<T>, T);                                                                   \
    template Var<T> concat(const std::vector<Var<T>>&, int);                                            \
    template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                                       \
    template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                                       \
    template Var<T> softmax(Var<T>, int);                                                               \
    template Var<T> log_softmax(Var<T>, int);                                                           \
    template Var<T> max_reduce(Var<T>, int);                                                            \
    template Var<T> mean_reduce(Var<T>, int);                                                           \
    template Var<T> sum(Var<T>);                                                                        \
    template Var<T> relu(Var<T>);                                                                       \
    template Var<T> sigmoid(Var<T>);                                                                    \
    template Var<T> tanh(Var<T>);                                                                       \
    template Var<T> embedding_lookup(Var<T>, const std::vector<int>&);                                  \
    template Var<T> pick(Var<T>, std::size_t, std::size_t);                                             \
    template Var<T> bce_with_logits(Var<T>, const std::vector<T>&, const std::vector<bool>&);           \
    template Tensor<T> dropout_mask<T>(std::size_t, std::size_t, double, Rng&);                         \
    template Var<T> dropout(Var<T>, double, bool, Rng&);

KGAP_INSTANTIATE(float)
KGAP_INSTANTIATE(double)

#undef KGAP_INSTANTIATE

}  // namespace kgap::ad
