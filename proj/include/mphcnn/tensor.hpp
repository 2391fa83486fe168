#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mphcnn {

using shape_t = std::vector<std::size_t>;

std::size_t shape_volume(shape_t const& shape);
std::string shape_to_string(shape_t const& shape);

/// Dense row-major array of doubles with an optional gradient slot.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(shape_t shape, double fill = 0.0);
    Tensor(shape_t shape, std::vector<double> data);

    [[nodiscard]] shape_t const& shape() const noexcept { return m_shape; }
    [[nodiscard]] std::size_t size() const noexcept { return m_data.size(); }
    [[nodiscard]] std::size_t rank() const noexcept { return m_shape.size(); }
    [[nodiscard]] bool empty() const noexcept { return m_data.empty(); }

    /// Leading extent, and the product of the remaining extents.
    [[nodiscard]] std::size_t rows() const noexcept;
    [[nodiscard]] std::size_t cols() const noexcept;

    [[nodiscard]] std::span<double> data() noexcept { return m_data; }
    [[nodiscard]] std::span<double const> data() const noexcept { return m_data; }
    [[nodiscard]] std::vector<double> const& values() const noexcept { return m_data; }

    double& operator[](std::size_t i) { return m_data[i]; }
    double operator[](std::size_t i) const { return m_data[i]; }
    double& at(std::size_t r, std::size_t c) { return m_data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return m_data[r * cols() + c]; }

    [[nodiscard]] bool has_grad() const noexcept { return m_has_grad; }
    /// Allocates a zeroed gradient slot if none exists.
    void ensure_grad();
    void zero_grad();
    void drop_grad() noexcept;
    [[nodiscard]] std::span<double> grad();
    [[nodiscard]] std::span<double const> grad() const;

    [[nodiscard]] bool all_finite() const noexcept;

  private:
    shape_t m_shape;
    std::vector<double> m_data;
    std::vector<double> m_grad;
    bool m_has_grad = false;
};

/// Records operations for one forward pass and replays them in reverse.
///
/// Parameters enter the tape by reference: their values are read in place and
/// their gradients accumulate directly into the bound tensor's grad slot, so a
/// mini-batch is simply several tapes backpropagated in turn before one step.
class Tape {
  public:
    struct Var {
        std::uint64_t tape = 0;
        std::size_t index = 0;
    };
    using backward_fn = std::function<void(Tape&, Var self)>;

    Tape();
    Tape(Tape const&) = delete;
    Tape& operator=(Tape const&) = delete;

    /// A value that never receives a gradient.
    Var constant(Tensor value);
    /// Learnable leaf; gradients accumulate into `param.grad()`.
    Var parameter(Tensor& param);
    /// Read-only view of a parameter for scoring; no gradient sink.
    Var parameter(Tensor const& param);

    /// Appends an op result. `backward` runs only when some input needs a gradient.
    Var record(Tensor value, std::vector<Var> const& inputs, backward_fn backward);

    [[nodiscard]] Tensor const& value(Var v) const;
    [[nodiscard]] bool needs_grad(Var v) const;
    /// Gradient buffer for `v`; only valid during backward().
    [[nodiscard]] std::span<double> grad(Var v);
    [[nodiscard]] std::span<double const> grad(Var v) const;

    /// Fills gradients for every recorded node, seeding d(loss) = seed.
    void backward(Var loss, double seed = 1.0);
    void clear();

    [[nodiscard]] std::size_t size() const noexcept { return m_nodes.size(); }

  private:
    struct Node {
        Tensor own;
        Tensor const* external = nullptr;
        Tensor* sink = nullptr;
        std::vector<double> grad;
        backward_fn backward;
        bool needs_grad = false;
    };

    Node& node(Var v);
    Node const& node(Var v) const;

    std::uint64_t m_id;
    std::vector<Node> m_nodes;
};

using Var = Tape::Var;

// Differentiable operations. Masks are 0/1 bytes; 1 marks a real position.

/// Rows of `table` selected by `ids` -> [ids.size() x cols]. Row 0 (PAD) never
/// receives gradient.
Var gather_rows(Tape& tape, Var table, std::span<int const> ids);

/// Same-length 1-D convolution with zero padding: floor((k-1)/2) rows on the
/// left, ceil((k-1)/2) on the right.
/// input [n x C], filters [F x k x C], bias [F] -> [n x F].
Var conv1d_same(Tape& tape, Var input, Var filters, Var bias);

Var relu(Tape& tape, Var x);

/// Zeroes the rows of a matrix whose mask entry is 0.
Var mask_rows(Tape& tape, Var x, std::span<std::uint8_t const> mask);

/// a [n x d], b [m x d] -> a b^T [n x m].
Var matmul_nt(Tape& tape, Var a, Var b);

/// Softmax over the unmasked columns of each row; masked columns are exactly 0.
Var softmax_rows_masked(Tape& tape, Var s, std::span<std::uint8_t const> mask);

enum class pool_kind { max, mean };

/// Row-wise max or mean over unmasked columns -> [n].
Var pool_rows(Tape& tape, Var s, std::span<std::uint8_t const> mask, pool_kind kind);

/// Elementwise product with a constant array of the same size.
Var mul_constant(Tape& tape, Var x, std::span<double const> weights);

/// Elementwise product of two recorded values of identical size.
Var mul(Tape& tape, Var a, Var b);

Var add(Tape& tape, Var a, Var b);

/// Flattens and concatenates.
Var concat(Tape& tape, std::span<Var const> parts);

/// x [D] (any shape of D entries), weight [D x H], bias [H] -> [H].
Var affine(Tape& tape, Var x, Var weight, Var bias);

Var sum(Tape& tape, Var x);

/// -log softmax(logits)[label] for a 1-D logit vector.
Var softmax_nll(Tape& tape, Var logits, std::size_t label);

/// Numerically stable softmax of a plain vector.
std::vector<double> softmax(std::span<double const> logits);

struct SgdConfig {
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
};

struct NamedTensor {
    std::string name;
    Tensor* tensor = nullptr;
};

/// p <- p - lr * grad(p) for every tensor, then zeroes the gradients.
void sgd_step(std::span<NamedTensor const> params, SgdConfig const& config);

/// Central finite-difference gradient of `loss` w.r.t. every entry of `param`.
std::vector<double> finite_difference_gradient(std::function<double()> const& loss,
                                               Tensor& param,
                                               double step = 1e-5);

/// Largest entrywise |a - b| / max(|a|, |b|, floor).
double max_relative_error(std::span<double const> analytic,
                          std::span<double const> numeric,
                          double floor = 1e-6);

}  // namespace mphcnn
