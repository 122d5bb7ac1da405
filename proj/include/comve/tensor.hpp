#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace comve {

// Row-major dimensions. An empty shape denotes a scalar.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct TensorStorage;
}

// Dense float64 tensor handle. Copies alias the same storage, so a parameter
// held by a model and the same parameter captured on a tape are one object.
// Use clone() for an independent copy.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor filled(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor vector(std::vector<double> values, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);

    bool defined() const noexcept { return storage_ != nullptr; }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    // Leading/trailing extent of a rank-2 tensor.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;
    double value(std::size_t flat_index) const { return data()[flat_index]; }
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    bool has_grad() const;
    // Empty span when no gradient has been accumulated yet.
    std::span<const double> grad() const;
    // Allocates a zeroed gradient buffer on first use.
    std::span<double> mutable_grad();
    void zero_grad();

    // Deep copy of values (no gradient, no tape history).
    Tensor clone(bool requires_grad = false) const;

    bool same_storage(const Tensor& other) const noexcept { return storage_ == other.storage_; }

private:
    std::shared_ptr<detail::TensorStorage> storage_;
};

// Ordered record of differentiable operations. Nodes are appended as ops run,
// so the recording order is already a topological order of the graph.
class Tape {
public:
    using BackwardFn = std::function<void()>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::string_view op_kind, std::vector<Tensor> inputs, Tensor output,
                BackwardFn backward_fn);

    std::size_t size() const noexcept { return nodes_.size(); }
    std::vector<std::string_view> op_kinds() const;
    bool produced(const Tensor& t) const;
    void clear() { nodes_.clear(); }

    friend void backward(const Tensor& loss, Tape& tape);

private:
    struct Node {
        std::string_view op_kind;
        std::vector<Tensor> inputs;
        Tensor output;
        BackwardFn backward_fn;
    };
    std::vector<Node> nodes_;
};

// Tape that operations on this thread record onto; nullptr when not recording.
Tape* active_tape() noexcept;

// Makes `tape` the active tape for the current thread while in scope.
class TapeGuard {
public:
    explicit TapeGuard(Tape& tape) noexcept;
    ~TapeGuard();
    TapeGuard(const TapeGuard&) = delete;
    TapeGuard& operator=(const TapeGuard&) = delete;

private:
    Tape* previous_;
};

// Accumulates d(loss)/d(leaf) into every grad-requiring leaf reachable from
// `loss`. Leaf gradients add onto whatever is already there; intermediate
// gradients are reset first so a tape can be replayed.
void backward(const Tensor& loss, Tape& tape);

} // namespace comve
