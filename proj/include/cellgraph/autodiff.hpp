#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "cellgraph/errors.hpp"

namespace cellgraph::ad {

// Dense row-major tensor of 64-bit floats. Gradient storage is allocated
// on first use and has the same shape as the values.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> v, bool rg = false)
        : shape(std::move(s)), values(std::move(v)), requires_grad(rg) {
        if (values.size() != element_count(shape))
            throw ShapeMismatchError("tensor value count does not match shape");
    }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) n *= e;
        return n;
    }

    std::size_t size() const { return values.size(); }
    std::size_t ndim() const { return shape.size(); }
    std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
    void zero_grad() { grad.assign(values.size(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> values,
                             bool requires_grad = false) {
    return std::make_shared<Tensor>(std::move(shape), std::move(values), requires_grad);
}

inline TensorPtr zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    std::size_t n = Tensor::element_count(shape);
    return make_tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

inline TensorPtr scalar(double v) { return make_tensor({1}, {v}); }

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw ShapeMismatchError(std::string(op) + ": operand shapes differ");
}

inline void check_matrix(const Tensor& a, const char* op) {
    if (a.ndim() != 2) throw ShapeMismatchError(std::string(op) + ": expected a 2-d tensor");
}

}  // namespace detail

// Reverse-mode tape. Every primitive computes its forward result eagerly
// and, when any input requires a gradient, records a closure that scatters
// the output gradient back onto the inputs. backward() replays the records
// in reverse; the recording order is a topological order by construction.
//
// Kernels are single threaded on purpose: identical tapes must produce
// bit-identical gradients regardless of scheduling.
class Tape {
public:
    bool grad_enabled = true;

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    void backward(const TensorPtr& loss) {
        if (loss->size() != 1) throw NonScalarLossError("backward: loss must be scalar-shaped");
        loss->ensure_grad();
        loss->grad[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    // ---- elementwise and scalar primitives ----

    TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
        detail::check_same_shape(*a, *b, "add");
        auto out = raw_like(a);
        for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] + b->values[i];
        record_binary(a, b, out, [](Tensor& ga, Tensor& gb, const Tensor& g, bool wa, bool wb) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (wa) ga.grad[i] += g.grad[i];
                if (wb) gb.grad[i] += g.grad[i];
            }
        });
        return out;
    }

    TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
        detail::check_same_shape(*a, *b, "sub");
        auto out = raw_like(a);
        for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] - b->values[i];
        record_binary(a, b, out, [](Tensor& ga, Tensor& gb, const Tensor& g, bool wa, bool wb) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (wa) ga.grad[i] += g.grad[i];
                if (wb) gb.grad[i] -= g.grad[i];
            }
        });
        return out;
    }

    TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
        detail::check_same_shape(*a, *b, "mul");
        auto out = raw_like(a);
        for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] * b->values[i];
        if (should_record({a, b})) {
            auto fn = [a, b, out]() {
                for (std::size_t i = 0; i < out->size(); ++i) {
                    if (a->requires_grad) a->grad[i] += out->grad[i] * b->values[i];
                    if (b->requires_grad) b->grad[i] += out->grad[i] * a->values[i];
                }
            };
            push(out, {a, b}, fn);
        }
        return out;
    }

    TensorPtr scale(const TensorPtr& a, double s) {
        auto out = raw_like(a);
        for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] * s;
        if (should_record({a})) {
            auto fn = [a, out, s]() {
                for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * s;
            };
            push(out, {a}, fn);
        }
        return out;
    }

    TensorPtr relu(const TensorPtr& a) {
        auto out = raw_like(a);
        for (std::size_t i = 0; i < a->size(); ++i)
            out->values[i] = a->values[i] > 0.0 ? a->values[i] : 0.0;
        if (should_record({a})) {
            auto fn = [a, out]() {
                for (std::size_t i = 0; i < out->size(); ++i)
                    if (a->values[i] > 0.0) a->grad[i] += out->grad[i];
            };
            push(out, {a}, fn);
        }
        return out;
    }

    TensorPtr sigmoid(const TensorPtr& a) {
        auto out = raw_like(a);
        for (std::size_t i = 0; i < a->size(); ++i)
            out->values[i] = 1.0 / (1.0 + std::exp(-a->values[i]));
        if (should_record({a})) {
            auto fn = [a, out]() {
                for (std::size_t i = 0; i < out->size(); ++i) {
                    double y = out->values[i];
                    a->grad[i] += out->grad[i] * y * (1.0 - y);
                }
            };
            push(out, {a}, fn);
        }
        return out;
    }

    TensorPtr abs(const TensorPtr& a) {
        auto out = raw_like(a);
        for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = std::fabs(a->values[i]);
        if (should_record({a})) {
            auto fn = [a, out]() {
                for (std::size_t i = 0; i < out->size(); ++i) {
                    double x = a->values[i];
                    double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                    a->grad[i] += out->grad[i] * s;
                }
            };
            push(out, {a}, fn);
        }
        return out;
    }

    // Elementwise smooth-L1 of a residual tensor:
    // 0.5 r^2 / delta for |r| < delta, |r| - 0.5 delta otherwise.
    TensorPtr huber(const TensorPtr& a, double delta) {
        auto out = raw_like(a);
        for (std::size_t i = 0; i < a->size(); ++i) {
            double r = a->values[i];
            out->values[i] =
                std::fabs(r) < delta ? 0.5 * r * r / delta : std::fabs(r) - 0.5 * delta;
        }
        if (should_record({a})) {
            auto fn = [a, out, delta]() {
                for (std::size_t i = 0; i < out->size(); ++i) {
                    double r = a->values[i];
                    double d = std::fabs(r) < delta ? r / delta : (r > 0.0 ? 1.0 : -1.0);
                    a->grad[i] += out->grad[i] * d;
                }
            };
            push(out, {a}, fn);
        }
        return out;
    }

    // ---- matrix primitives ----

    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
        detail::check_matrix(*a, "matmul");
        detail::check_matrix(*b, "matmul");
        if (a->shape[1] != b->shape[0])
            throw ShapeMismatchError("matmul: inner dimensions differ");
        std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
        auto out = raw({m, n});
        matmul_into(a->values.data(), b->values.data(), out->values.data(), m, k, n);
        if (should_record({a, b})) {
            auto fn = [a, b, out, m, k, n]() {
                if (a->requires_grad)  // dA += g * B^T
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) {
                            double g = out->grad[i * n + j];
                            if (g == 0.0) continue;
                            for (std::size_t l = 0; l < k; ++l)
                                a->grad[i * k + l] += g * b->values[l * n + j];
                        }
                if (b->requires_grad)  // dB += A^T * g
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t l = 0; l < k; ++l) {
                            double v = a->values[i * k + l];
                            if (v == 0.0) continue;
                            for (std::size_t j = 0; j < n; ++j)
                                b->grad[l * n + j] += v * out->grad[i * n + j];
                        }
            };
            push(out, {a, b}, fn);
        }
        return out;
    }

    TensorPtr transpose(const TensorPtr& a) {
        detail::check_matrix(*a, "transpose");
        std::size_t m = a->shape[0], n = a->shape[1];
        auto out = raw({n, m});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out->values[j * m + i] = a->values[i * n + j];
        if (should_record({a})) {
            auto fn = [a, out, m, n]() {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        a->grad[i * n + j] += out->grad[j * m + i];
            };
            push(out, {a}, fn);
        }
        return out;
    }

    // Concatenation along the last axis of 2-d tensors with equal row counts.
    TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
        if (parts.empty()) throw ShapeMismatchError("concat: no operands");
        std::size_t m = parts[0]->rows(), total = 0;
        for (const auto& p : parts) {
            detail::check_matrix(*p, "concat");
            if (p->shape[0] != m) throw ShapeMismatchError("concat: row counts differ");
            total += p->shape[1];
        }
        auto out = raw({m, total});
        std::size_t off = 0;
        for (const auto& p : parts) {
            std::size_t c = p->shape[1];
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    out->values[i * total + off + j] = p->values[i * c + j];
            off += c;
        }
        std::vector<TensorPtr> inputs(parts.begin(), parts.end());
        if (should_record(inputs)) {
            auto fn = [parts, out, m, total]() {
                std::size_t off = 0;
                for (const auto& p : parts) {
                    std::size_t c = p->shape[1];
                    if (p->requires_grad)
                        for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t j = 0; j < c; ++j)
                                p->grad[i * c + j] += out->grad[i * total + off + j];
                    off += c;
                }
            };
            push(out, inputs, fn);
        }
        return out;
    }

    // Column slice [start, start+len) of a 2-d tensor.
    TensorPtr slice_cols(const TensorPtr& a, std::size_t start, std::size_t len) {
        detail::check_matrix(*a, "slice");
        std::size_t m = a->shape[0], n = a->shape[1];
        if (start + len > n) throw ShapeMismatchError("slice: range exceeds tensor width");
        auto out = raw({m, len});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < len; ++j)
                out->values[i * len + j] = a->values[i * n + start + j];
        if (should_record({a})) {
            auto fn = [a, out, m, n, start, len]() {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < len; ++j)
                        a->grad[i * n + start + j] += out->grad[i * len + j];
            };
            push(out, {a}, fn);
        }
        return out;
    }

    // Adds a row vector (shape {1, c}) to every row of a {n, c} tensor.
    TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& b) {
        detail::check_matrix(*a, "add_rowvec");
        if (b->size() != a->shape[1])
            throw ShapeMismatchError("add_rowvec: vector length differs from column count");
        std::size_t m = a->shape[0], n = a->shape[1];
        auto out = raw({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out->values[i * n + j] = a->values[i * n + j] + b->values[j];
        if (should_record({a, b})) {
            auto fn = [a, b, out, m, n]() {
                if (a->requires_grad)
                    for (std::size_t i = 0; i < m * n; ++i) a->grad[i] += out->grad[i];
                if (b->requires_grad)
                    for (std::size_t j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < m; ++i) s += out->grad[i * n + j];
                        b->grad[j] += s;
                    }
            };
            push(out, {a, b}, fn);
        }
        return out;
    }

    // ---- reductions ----

    TensorPtr row_sum(const TensorPtr& a) {
        detail::check_matrix(*a, "row_sum");
        std::size_t m = a->shape[0], n = a->shape[1];
        auto out = raw({m, 1});
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a->values[i * n + j];
            out->values[i] = s;
        }
        if (should_record({a})) {
            auto fn = [a, out, m, n]() {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) a->grad[i * n + j] += out->grad[i];
            };
            push(out, {a}, fn);
        }
        return out;
    }

    TensorPtr row_mean(const TensorPtr& a) {
        detail::check_matrix(*a, "row_mean");
        std::size_t m = a->shape[0], n = a->shape[1];
        auto out = raw({m, 1});
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a->values[i * n + j];
            out->values[i] = s / static_cast<double>(n);
        }
        if (should_record({a})) {
            auto fn = [a, out, m, n]() {
                for (std::size_t i = 0; i < m; ++i) {
                    double g = out->grad[i] / static_cast<double>(n);
                    for (std::size_t j = 0; j < n; ++j) a->grad[i * n + j] += g;
                }
            };
            push(out, {a}, fn);
        }
        return out;
    }

    TensorPtr mean_all(const TensorPtr& a) {
        auto out = raw({1});
        double s = 0.0;
        for (double v : a->values) s += v;
        out->values[0] = s / static_cast<double>(a->size());
        if (should_record({a})) {
            auto fn = [a, out]() {
                double g = out->grad[0] / static_cast<double>(a->size());
                for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += g;
            };
            push(out, {a}, fn);
        }
        return out;
    }

    // Numerically stable per-row softmax (row max subtracted).
    TensorPtr row_softmax(const TensorPtr& a) {
        detail::check_matrix(*a, "row_softmax");
        std::size_t m = a->shape[0], n = a->shape[1];
        auto out = raw({m, n});
        for (std::size_t i = 0; i < m; ++i) {
            double mx = a->values[i * n];
            for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a->values[i * n + j]);
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double e = std::exp(a->values[i * n + j] - mx);
                out->values[i * n + j] = e;
                s += e;
            }
            for (std::size_t j = 0; j < n; ++j) out->values[i * n + j] /= s;
        }
        if (should_record({a})) {
            auto fn = [a, out, m, n]() {
                for (std::size_t i = 0; i < m; ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                        dot += out->grad[i * n + j] * out->values[i * n + j];
                    for (std::size_t j = 0; j < n; ++j)
                        a->grad[i * n + j] +=
                            out->values[i * n + j] * (out->grad[i * n + j] - dot);
                }
            };
            push(out, {a}, fn);
        }
        return out;
    }

    // ---- graph kernels ----
    // The propagation rule's weighted neighborhood mean: for each node v,
    //   out[v] = (X[v] + sum_{u != v} A[v,u] X[u]) / (1 + sum_{u != v} A[v,u]).
    // The node itself always enters with weight 1; the diagonal of A is ignored.
    TensorPtr sage_aggregate(const TensorPtr& x, const TensorPtr& adj) {
        detail::check_matrix(*x, "sage_aggregate");
        detail::check_matrix(*adj, "sage_aggregate");
        std::size_t n = x->shape[0], c = x->shape[1];
        if (adj->shape[0] != n || adj->shape[1] != n)
            throw ShapeMismatchError("sage_aggregate: adjacency must be n x n");
        auto out = raw({n, c});
        std::vector<double> denom(n);
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (std::size_t u = 0; u < n; ++u)
                if (u != v) s += adj->values[v * n + u];
            denom[v] = 1.0 + s;
            for (std::size_t j = 0; j < c; ++j) out->values[v * c + j] = x->values[v * c + j];
            for (std::size_t u = 0; u < n; ++u) {
                if (u == v) continue;
                double w = adj->values[v * n + u];
                if (w == 0.0) continue;
                for (std::size_t j = 0; j < c; ++j)
                    out->values[v * c + j] += w * x->values[u * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) out->values[v * c + j] /= denom[v];
        }
        if (should_record({x, adj})) {
            auto fn = [x, adj, out, n, c, denom]() {
                if (x->requires_grad) {
                    for (std::size_t v = 0; v < n; ++v) {
                        double inv = 1.0 / denom[v];
                        for (std::size_t j = 0; j < c; ++j)
                            x->grad[v * c + j] += out->grad[v * c + j] * inv;
                        for (std::size_t u = 0; u < n; ++u) {
                            if (u == v) continue;
                            double w = adj->values[v * n + u] * inv;
                            if (w == 0.0) continue;
                            for (std::size_t j = 0; j < c; ++j)
                                x->grad[u * c + j] += out->grad[v * c + j] * w;
                        }
                    }
                }
                if (adj->requires_grad) {
                    // d out[v,j] / d A[v,u] = (X[u,j] - out[v,j]) / denom[v]
                    for (std::size_t v = 0; v < n; ++v) {
                        double inv = 1.0 / denom[v];
                        for (std::size_t u = 0; u < n; ++u) {
                            if (u == v) continue;
                            double s = 0.0;
                            for (std::size_t j = 0; j < c; ++j)
                                s += out->grad[v * c + j] *
                                     (x->values[u * c + j] - out->values[v * c + j]);
                            adj->grad[v * n + u] += s * inv;
                        }
                    }
                }
            };
            push(out, {x, adj}, fn);
        }
        return out;
    }

    // Adjacency reassignment applied after every block: diagonal becomes
    // 1-p and each row's off-diagonal mass is rescaled to total p. The
    // weighted form distributes p proportionally to the existing entries;
    // the literal form assigns the constant p / rowsum to every
    // off-diagonal slot. Rows with no off-diagonal mass get diagonal 1;
    // rows whose mass has underflowed toward zero (empty soft clusters)
    // count as isolated too, or the 1/s^2 backward would overflow.
    static constexpr double kRenormRowFloor = 1e-12;

    TensorPtr renormalize_adjacency(const TensorPtr& adj, double p, bool weighted = true) {
        detail::check_matrix(*adj, "renormalize_adjacency");
        std::size_t n = adj->shape[0];
        if (adj->shape[1] != n)
            throw ShapeMismatchError("renormalize_adjacency: matrix must be square");
        auto out = raw({n, n});
        std::vector<double> rowsum(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) s += adj->values[i * n + j];
            rowsum[i] = s < kRenormRowFloor ? 0.0 : s;
            if (rowsum[i] == 0.0) {
                for (std::size_t j = 0; j < n; ++j) out->values[i * n + j] = 0.0;
                out->values[i * n + i] = 1.0;
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i)
                    out->values[i * n + j] = 1.0 - p;
                else
                    out->values[i * n + j] =
                        weighted ? p * adj->values[i * n + j] / s : p / s;
            }
        }
        if (should_record({adj})) {
            auto fn = [adj, out, n, p, weighted, rowsum]() {
                for (std::size_t i = 0; i < n; ++i) {
                    double s = rowsum[i];
                    if (s == 0.0) continue;
                    if (weighted) {
                        // d out[i,j]/d A[i,k] = p (delta_jk s - A[i,j]) / s^2
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j)
                            if (j != i) acc += out->grad[i * n + j] * adj->values[i * n + j];
                        for (std::size_t k = 0; k < n; ++k) {
                            if (k == i) continue;
                            adj->grad[i * n + k] +=
                                p * out->grad[i * n + k] / s - p * acc / (s * s);
                        }
                    } else {
                        double gsum = 0.0;
                        for (std::size_t j = 0; j < n; ++j)
                            if (j != i) gsum += out->grad[i * n + j];
                        for (std::size_t k = 0; k < n; ++k) {
                            if (k == i) continue;
                            adj->grad[i * n + k] += -p * gsum / (s * s);
                        }
                    }
                }
            };
            push(out, {adj}, fn);
        }
        return out;
    }

    // Per-channel standardization over the nodes of one patch, with learned
    // scale and shift. Statistics are population statistics of this tensor
    // only; eps keeps the single-node case finite.
    TensorPtr patch_norm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta) {
        detail::check_matrix(*x, "patch_norm");
        std::size_t n = x->shape[0], c = x->shape[1];
        if (gamma->size() != c || beta->size() != c)
            throw ShapeMismatchError("patch_norm: scale/shift length differs from channels");
        constexpr double eps = 1e-5;
        auto out = raw({n, c});
        std::vector<double> mean(c, 0.0), inv_std(c, 0.0), xhat(n * c);
        for (std::size_t j = 0; j < c; ++j) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) m += x->values[i * c + j];
            m /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d = x->values[i * c + j] - m;
                var += d * d;
            }
            var /= static_cast<double>(n);
            mean[j] = m;
            inv_std[j] = 1.0 / std::sqrt(var + eps);
            for (std::size_t i = 0; i < n; ++i) {
                double h = (x->values[i * c + j] - m) * inv_std[j];
                xhat[i * c + j] = h;
                out->values[i * c + j] = h * gamma->values[j] + beta->values[j];
            }
        }
        if (should_record({x, gamma, beta})) {
            auto fn = [x, gamma, beta, out, n, c, inv_std, xhat]() {
                double nn = static_cast<double>(n);
                for (std::size_t j = 0; j < c; ++j) {
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        double g = out->grad[i * c + j];
                        sum_g += g;
                        sum_gx += g * xhat[i * c + j];
                    }
                    if (gamma->requires_grad) gamma->grad[j] += sum_gx;
                    if (beta->requires_grad) beta->grad[j] += sum_g;
                    if (x->requires_grad) {
                        double k = gamma->values[j] * inv_std[j] / nn;
                        for (std::size_t i = 0; i < n; ++i) {
                            double g = out->grad[i * c + j];
                            x->grad[i * c + j] +=
                                k * (nn * g - sum_g - xhat[i * c + j] * sum_gx);
                        }
                    }
                }
            };
            push(out, {x, gamma, beta}, fn);
        }
        return out;
    }

private:
    std::vector<std::function<void()>> nodes_;

    static TensorPtr raw(std::vector<std::size_t> shape) {
        auto t = std::make_shared<Tensor>();
        t->shape = std::move(shape);
        t->values.resize(Tensor::element_count(t->shape));
        return t;
    }
    static TensorPtr raw_like(const TensorPtr& a) { return raw(a->shape); }

    bool should_record(std::initializer_list<TensorPtr> inputs) const {
        if (!grad_enabled) return false;
        for (const auto& t : inputs)
            if (t->requires_grad) return true;
        return false;
    }
    bool should_record(const std::vector<TensorPtr>& inputs) const {
        if (!grad_enabled) return false;
        for (const auto& t : inputs)
            if (t->requires_grad) return true;
        return false;
    }

    void push(const TensorPtr& out, std::vector<TensorPtr> inputs, std::function<void()> fn) {
        out->requires_grad = true;
        for (auto& t : inputs)
            if (t->requires_grad) t->ensure_grad();
        out->ensure_grad();
        nodes_.push_back(std::move(fn));
    }

    template <typename F>
    void record_binary(const TensorPtr& a, const TensorPtr& b, const TensorPtr& out, F&& fn) {
        if (!should_record({a, b})) return;
        auto wrapped = [a, b, out, fn]() {
            fn(*a, *b, *out, a->requires_grad, b->requires_grad);
        };
        push(out, {a, b}, wrapped);
    }

    static void matmul_into(const double* a, const double* b, double* out, std::size_t m,
                            std::size_t k, std::size_t n) {
        std::fill(out, out + m * n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t l = 0; l < k; ++l) {
                double v = a[i * k + l];
                if (v == 0.0) continue;
                const double* brow = b + l * n;
                double* orow = out + i * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += v * brow[j];
            }
    }
};

// Central-difference gradient checker. f must build a scalar loss from x on
// the given tape. Returns the max over coordinates of
// |analytic - numeric| / max(1, |analytic|, |numeric|).
inline double grad_check(const std::function<TensorPtr(Tape&, const TensorPtr&)>& f,
                         const TensorPtr& x, double h = 1e-5) {
    auto probe = make_tensor(x->shape, x->values, true);
    Tape tape;
    auto loss = f(tape, probe);
    tape.backward(loss);
    probe->ensure_grad();
    std::vector<double> analytic = probe->grad;

    double worst = 0.0;
    for (std::size_t i = 0; i < x->size(); ++i) {
        auto eval = [&](double delta) {
            auto xi = make_tensor(x->shape, x->values, false);
            xi->values[i] += delta;
            Tape t;
            t.grad_enabled = false;
            return f(t, xi)->values[0];
        };
        double numeric = (eval(h) - eval(-h)) / (2.0 * h);
        double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(numeric)});
        worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace cellgraph::ad
