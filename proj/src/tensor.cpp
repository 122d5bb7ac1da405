#include "comve/tensor.hpp"

#include "comve/errors.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <fmt/ranges.h>

namespace comve {

namespace detail {
struct TensorStorage {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
};
} // namespace detail

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    return fmt::format("[{}]", fmt::join(shape, "x"));
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
    }
    if (shape_numel(shape) != values.size()) {
        throw DimensionError(fmt::format("shape {} needs {} values, got {}", shape_to_string(shape),
                                         shape_numel(shape), values.size()));
    }
    storage_ = std::make_shared<detail::TensorStorage>();
    storage_->shape = std::move(shape);
    storage_->data = std::move(values);
    storage_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
    std::vector<double> values(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
    const auto n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
    return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
    if (!storage_) throw ContractError("use of an undefined tensor");
    return storage_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_to_string(shape()));
    return shape()[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_to_string(shape()));
    return shape()[1];
}

std::span<const double> Tensor::data() const {
    if (!storage_) throw ContractError("use of an undefined tensor");
    return storage_->data;
}

std::span<double> Tensor::mutable_data() {
    if (!storage_) throw ContractError("use of an undefined tensor");
    return storage_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
    return storage_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const { return storage_->data[row * cols() + col]; }

bool Tensor::requires_grad() const { return storage_ && storage_->requires_grad; }

bool Tensor::has_grad() const { return storage_ && !storage_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!storage_) throw ContractError("use of an undefined tensor");
    return storage_->grad;
}

std::span<double> Tensor::mutable_grad() {
    if (!storage_) throw ContractError("use of an undefined tensor");
    if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), 0.0);
    return storage_->grad;
}

void Tensor::zero_grad() {
    if (storage_ && !storage_->grad.empty()) std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0);
}

Tensor Tensor::clone(bool requires_grad) const { return Tensor(shape(), storage_->data, requires_grad); }

// ---------------------------------------------------------------------------

namespace {
thread_local Tape* current_tape = nullptr;
}

Tape* active_tape() noexcept { return current_tape; }

TapeGuard::TapeGuard(Tape& tape) noexcept : previous_(current_tape) { current_tape = &tape; }

TapeGuard::~TapeGuard() { current_tape = previous_; }

void Tape::record(std::string_view op_kind, std::vector<Tensor> inputs, Tensor output, BackwardFn backward_fn) {
    nodes_.push_back(Node{op_kind, std::move(inputs), std::move(output), std::move(backward_fn)});
}

std::vector<std::string_view> Tape::op_kinds() const {
    std::vector<std::string_view> kinds;
    kinds.reserve(nodes_.size());
    for (const auto& n : nodes_) kinds.push_back(n.op_kind);
    return kinds;
}

bool Tape::produced(const Tensor& t) const {
    return std::any_of(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.output.same_storage(t); });
}

void backward(const Tensor& loss, Tape& tape) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " +
                            (loss.defined() ? shape_to_string(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward(): loss does not depend on any grad-requiring tensor");
    }
    for (auto& node : tape.nodes_) node.output.zero_grad();

    Tensor seed = loss;
    seed.mutable_grad()[0] += 1.0;

    for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
        if (!it->output.has_grad()) continue;
        it->backward_fn();
    }
}

} // namespace comve
