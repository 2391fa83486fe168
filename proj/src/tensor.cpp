#include "mphcnn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mphcnn/error.hpp"

namespace mphcnn {

std::size_t shape_volume(shape_t const& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_to_string(shape_t const& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? " x " : "") << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(shape_t shape, double fill) : m_shape(std::move(shape)), m_data(shape_volume(m_shape), fill) {}

Tensor::Tensor(shape_t shape, std::vector<double> data) : m_shape(std::move(shape)), m_data(std::move(data)) {
    if (shape_volume(m_shape) != m_data.size()) {
        throw dimension_error("tensor shape " + shape_to_string(m_shape) + " does not hold "
                              + std::to_string(m_data.size()) + " values");
    }
}

std::size_t Tensor::rows() const noexcept { return m_shape.empty() ? 1 : m_shape.front(); }

std::size_t Tensor::cols() const noexcept {
    if (m_shape.empty()) {
        return 1;
    }
    return shape_volume(shape_t(m_shape.begin() + 1, m_shape.end()));
}

void Tensor::ensure_grad() {
    if (!m_has_grad) {
        m_grad.assign(m_data.size(), 0.0);
        m_has_grad = true;
    }
}

void Tensor::zero_grad() {
    ensure_grad();
    std::fill(m_grad.begin(), m_grad.end(), 0.0);
}

void Tensor::drop_grad() noexcept {
    m_grad.clear();
    m_grad.shrink_to_fit();
    m_has_grad = false;
}

std::span<double> Tensor::grad() {
    if (!m_has_grad) {
        throw graph_error("tensor has no gradient slot");
    }
    return m_grad;
}

std::span<double const> Tensor::grad() const {
    if (!m_has_grad) {
        throw graph_error("tensor has no gradient slot");
    }
    return m_grad;
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(m_data.begin(), m_data.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t next_tape_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

}  // namespace

Tape::Tape() : m_id(next_tape_id()) {}

Tape::Node& Tape::node(Var v) {
    if (v.tape != m_id || v.index >= m_nodes.size()) {
        throw graph_error("variable was not recorded on this tape");
    }
    return m_nodes[v.index];
}

Tape::Node const& Tape::node(Var v) const {
    if (v.tape != m_id || v.index >= m_nodes.size()) {
        throw graph_error("variable was not recorded on this tape");
    }
    return m_nodes[v.index];
}

Var Tape::constant(Tensor value) {
    Node n;
    n.own = std::move(value);
    m_nodes.push_back(std::move(n));
    return {m_id, m_nodes.size() - 1};
}

Var Tape::parameter(Tensor& param) {
    Node n;
    n.external = &param;
    n.sink = &param;
    n.needs_grad = true;
    m_nodes.push_back(std::move(n));
    return {m_id, m_nodes.size() - 1};
}

Var Tape::parameter(Tensor const& param) {
    Node n;
    n.external = &param;
    m_nodes.push_back(std::move(n));
    return {m_id, m_nodes.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> const& inputs, backward_fn backward) {
    if (!value.all_finite()) {
        throw numeric_error("non-finite value produced in forward pass");
    }
    Node n;
    n.own = std::move(value);
    n.needs_grad = std::any_of(inputs.begin(), inputs.end(), [this](Var v) { return node(v).needs_grad; });
    if (n.needs_grad) {
        n.backward = std::move(backward);
    }
    m_nodes.push_back(std::move(n));
    return {m_id, m_nodes.size() - 1};
}

Tensor const& Tape::value(Var v) const {
    auto const& n = node(v);
    return n.external ? *n.external : n.own;
}

bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

std::span<double> Tape::grad(Var v) {
    auto& n = node(v);
    if (n.sink) {
        n.sink->ensure_grad();
        return n.sink->grad();
    }
    if (n.grad.size() != value(v).size()) {
        n.grad.assign(value(v).size(), 0.0);
    }
    return n.grad;
}

std::span<double const> Tape::grad(Var v) const {
    auto const& n = node(v);
    if (n.sink) {
        return std::as_const(*n.sink).grad();
    }
    return n.grad;
}

void Tape::backward(Var loss, double seed) {
    auto& root = node(loss);
    if ((root.external ? *root.external : root.own).size() != 1) {
        throw graph_error("backward requires a scalar loss");
    }
    for (std::size_t i = 0; i <= loss.index; ++i) {
        auto& n = m_nodes[i];
        if (!n.needs_grad) {
            continue;
        }
        if (n.sink) {
            n.sink->ensure_grad();
        } else {
            n.grad.assign(n.own.size(), 0.0);
        }
    }
    if (!root.needs_grad) {
        return;
    }
    grad(loss)[0] += seed;
    for (std::size_t i = loss.index + 1; i-- > 0;) {
        auto& n = m_nodes[i];
        if (n.needs_grad && n.backward) {
            n.backward(*this, Var{m_id, i});
        }
    }
}

void Tape::clear() {
    m_nodes.clear();
    m_id = next_tape_id();
}

// ---------------------------------------------------------------------------

namespace {

void require_rank(Tensor const& t, std::size_t rank, char const* op, char const* what) {
    if (t.rank() != rank) {
        throw dimension_error(std::string(op) + ": " + what + " must have rank " + std::to_string(rank)
                              + ", got " + shape_to_string(t.shape()));
    }
}

void require_mask(std::size_t extent, std::size_t mask_size, char const* op, char const* axis) {
    if (extent != mask_size) {
        throw dimension_error(std::string(op) + ": mask length " + std::to_string(mask_size)
                              + " does not match " + axis + " extent " + std::to_string(extent));
    }
}

std::size_t count_unmasked(std::span<std::uint8_t const> mask) {
    return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
}

}  // namespace

Var gather_rows(Tape& tape, Var table, std::span<int const> ids) {
    auto const& t = tape.value(table);
    require_rank(t, 2, "gather_rows", "table");
    std::size_t const width = t.cols();
    Tensor out({ids.size(), width});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto const id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= t.rows()) {
            throw dimension_error("gather_rows: id " + std::to_string(id) + " outside table of "
                                  + std::to_string(t.rows()) + " rows");
        }
        auto const src = t.data().subspan(static_cast<std::size_t>(id) * width, width);
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * width));
    }
    return tape.record(std::move(out), {table},
                       [table, idx = std::vector<int>(ids.begin(), ids.end()), width](Tape& tp, Var self) {
                           auto const g = tp.grad(self);
                           auto gt = tp.grad(table);
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                               if (idx[i] == 0) {
                                   continue;
                               }
                               auto const base = static_cast<std::size_t>(idx[i]) * width;
                               for (std::size_t c = 0; c < width; ++c) {
                                   gt[base + c] += g[i * width + c];
                               }
                           }
                       });
}

Var conv1d_same(Tape& tape, Var input, Var filters, Var bias) {
    auto const& x = tape.value(input);
    auto const& w = tape.value(filters);
    auto const& b = tape.value(bias);
    require_rank(x, 2, "conv1d_same", "input");
    require_rank(w, 3, "conv1d_same", "filters");
    require_rank(b, 1, "conv1d_same", "bias");
    std::size_t const n = x.shape()[0];
    std::size_t const channels = x.shape()[1];
    std::size_t const nf = w.shape()[0];
    std::size_t const k = w.shape()[1];
    if (n == 0 || k == 0) {
        throw dimension_error("conv1d_same: input length and filter width must be positive");
    }
    if (w.shape()[2] != channels) {
        throw dimension_error("conv1d_same: filter channel axis (" + std::to_string(w.shape()[2])
                              + ") does not match input channel axis (" + std::to_string(channels) + ")");
    }
    if (b.size() != nf) {
        throw dimension_error("conv1d_same: bias axis (" + std::to_string(b.size())
                              + ") does not match filter count axis (" + std::to_string(nf) + ")");
    }
    auto const left = static_cast<std::ptrdiff_t>((k - 1) / 2);

    Tensor out({n, nf});
    auto const xd = x.data();
    auto const wd = w.data();
    auto od = out.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < nf; ++f) {
            double acc = b[f];
            for (std::size_t t = 0; t < k; ++t) {
                auto const row = static_cast<std::ptrdiff_t>(i) - left + static_cast<std::ptrdiff_t>(t);
                if (row < 0 || row >= static_cast<std::ptrdiff_t>(n)) {
                    continue;
                }
                auto const* xr = xd.data() + static_cast<std::size_t>(row) * channels;
                auto const* wr = wd.data() + (f * k + t) * channels;
                for (std::size_t c = 0; c < channels; ++c) {
                    acc += wr[c] * xr[c];
                }
            }
            od[i * nf + f] = acc;
        }
    }
    return tape.record(std::move(out), {input, filters, bias},
                       [input, filters, bias, n, channels, nf, k, left](Tape& tp, Var self) {
                           auto const g = tp.grad(self);
                           auto const xd = tp.value(input).data();
                           auto const wd = tp.value(filters).data();
                           bool const gx_on = tp.needs_grad(input);
                           bool const gw_on = tp.needs_grad(filters);
                           std::span<double> gx = gx_on ? tp.grad(input) : std::span<double>{};
                           std::span<double> gw = gw_on ? tp.grad(filters) : std::span<double>{};
                           if (tp.needs_grad(bias)) {
                               auto gb = tp.grad(bias);
                               for (std::size_t i = 0; i < n; ++i) {
                                   for (std::size_t f = 0; f < nf; ++f) {
                                       gb[f] += g[i * nf + f];
                                   }
                               }
                           }
                           if (!gx_on && !gw_on) {
                               return;
                           }
                           for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t t = 0; t < k; ++t) {
                                   auto const row = static_cast<std::ptrdiff_t>(i) - left
                                                    + static_cast<std::ptrdiff_t>(t);
                                   if (row < 0 || row >= static_cast<std::ptrdiff_t>(n)) {
                                       continue;
                                   }
                                   auto const r = static_cast<std::size_t>(row) * channels;
                                   for (std::size_t f = 0; f < nf; ++f) {
                                       double const go = g[i * nf + f];
                                       if (go == 0.0) {
                                           continue;
                                       }
                                       auto const wo = (f * k + t) * channels;
                                       if (gx_on) {
                                           for (std::size_t c = 0; c < channels; ++c) {
                                               gx[r + c] += go * wd[wo + c];
                                           }
                                       }
                                       if (gw_on) {
                                           for (std::size_t c = 0; c < channels; ++c) {
                                               gw[wo + c] += go * xd[r + c];
                                           }
                                       }
                                   }
                               }
                           }
                       });
}

Var relu(Tape& tape, Var x) {
    auto const& in = tape.value(x);
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = in[i] > 0.0 ? in[i] : 0.0;
    }
    return tape.record(std::move(out), {x}, [x](Tape& tp, Var self) {
        auto const g = tp.grad(self);
        auto const v = tp.value(x).data();
        auto gx = tp.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (v[i] > 0.0) {
                gx[i] += g[i];
            }
        }
    });
}

Var mask_rows(Tape& tape, Var x, std::span<std::uint8_t const> mask) {
    auto const& in = tape.value(x);
    require_mask(in.rows(), mask.size(), "mask_rows", "row");
    std::size_t const width = in.cols();
    Tensor out(in.shape());
    for (std::size_t r = 0; r < in.rows(); ++r) {
        if (!mask[r]) {
            continue;
        }
        for (std::size_t c = 0; c < width; ++c) {
            out[r * width + c] = in[r * width + c];
        }
    }
    return tape.record(std::move(out), {x},
                       [x, m = std::vector<std::uint8_t>(mask.begin(), mask.end()), width](Tape& tp, Var self) {
                           auto const g = tp.grad(self);
                           auto gx = tp.grad(x);
                           for (std::size_t r = 0; r < m.size(); ++r) {
                               if (!m[r]) {
                                   continue;
                               }
                               for (std::size_t c = 0; c < width; ++c) {
                                   gx[r * width + c] += g[r * width + c];
                               }
                           }
                       });
}

Var matmul_nt(Tape& tape, Var a, Var b) {
    auto const& av = tape.value(a);
    auto const& bv = tape.value(b);
    require_rank(av, 2, "matmul_nt", "left operand");
    require_rank(bv, 2, "matmul_nt", "right operand");
    std::size_t const n = av.shape()[0];
    std::size_t const m = bv.shape()[0];
    std::size_t const d = av.shape()[1];
    if (bv.shape()[1] != d) {
        throw dimension_error("matmul_nt: inner axis of left operand (" + std::to_string(d)
                              + ") does not match inner axis of right operand ("
                              + std::to_string(bv.shape()[1]) + ")");
    }
    Tensor out({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        auto const* ar = av.data().data() + i * d;
        for (std::size_t j = 0; j < m; ++j) {
            auto const* br = bv.data().data() + j * d;
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                acc += ar[c] * br[c];
            }
            out[i * m + j] = acc;
        }
    }
    return tape.record(std::move(out), {a, b}, [a, b, n, m, d](Tape& tp, Var self) {
        auto const g = tp.grad(self);
        auto const ad = tp.value(a).data();
        auto const bd = tp.value(b).data();
        if (tp.needs_grad(a)) {
            auto ga = tp.grad(a);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    double const gij = g[i * m + j];
                    for (std::size_t c = 0; c < d; ++c) {
                        ga[i * d + c] += gij * bd[j * d + c];
                    }
                }
            }
        }
        if (tp.needs_grad(b)) {
            auto gb = tp.grad(b);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    double const gij = g[i * m + j];
                    for (std::size_t c = 0; c < d; ++c) {
                        gb[j * d + c] += gij * ad[i * d + c];
                    }
                }
            }
        }
    });
}

Var softmax_rows_masked(Tape& tape, Var s, std::span<std::uint8_t const> mask) {
    auto const& in = tape.value(s);
    require_rank(in, 2, "softmax_rows_masked", "input");
    std::size_t const n = in.shape()[0];
    std::size_t const m = in.shape()[1];
    require_mask(m, mask.size(), "softmax_rows_masked", "column");
    if (count_unmasked(mask) == 0) {
        throw degenerate_document_error("softmax_rows_masked: document mask selects no positions");
    }
    Tensor out({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            if (mask[j]) {
                hi = std::max(hi, in[i * m + j]);
            }
        }
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (mask[j]) {
                out[i * m + j] = std::exp(in[i * m + j] - hi);
                z += out[i * m + j];
            }
        }
        for (std::size_t j = 0; j < m; ++j) {
            out[i * m + j] /= z;
        }
    }
    return tape.record(std::move(out), {s}, [s, n, m](Tape& tp, Var self) {
        auto const g = tp.grad(self);
        auto const y = tp.value(self).data();
        auto gs = tp.grad(s);
        // Masked outputs are 0, so including them in the row dot product is harmless.
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                dot += y[i * m + j] * g[i * m + j];
            }
            for (std::size_t j = 0; j < m; ++j) {
                gs[i * m + j] += y[i * m + j] * (g[i * m + j] - dot);
            }
        }
    });
}

Var pool_rows(Tape& tape, Var s, std::span<std::uint8_t const> mask, pool_kind kind) {
    auto const& in = tape.value(s);
    require_rank(in, 2, "pool_rows", "input");
    std::size_t const n = in.shape()[0];
    std::size_t const m = in.shape()[1];
    require_mask(m, mask.size(), "pool_rows", "column");
    std::size_t const active = count_unmasked(mask);
    if (active == 0) {
        throw degenerate_document_error("pool_rows: document mask selects no positions");
    }
    Tensor out({n});
    if (kind == pool_kind::max) {
        std::vector<std::size_t> arg(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < m; ++j) {
                if (mask[j] && in[i * m + j] > best) {
                    best = in[i * m + j];
                    arg[i] = j;
                }
            }
            out[i] = best;
        }
        return tape.record(std::move(out), {s}, [s, m, arg = std::move(arg)](Tape& tp, Var self) {
            auto const g = tp.grad(self);
            auto gs = tp.grad(s);
            for (std::size_t i = 0; i < arg.size(); ++i) {
                gs[i * m + arg[i]] += g[i];
            }
        });
    }
    auto const inv = 1.0 / static_cast<double>(active);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (mask[j]) {
                acc += in[i * m + j];
            }
        }
        out[i] = acc * inv;
    }
    return tape.record(std::move(out), {s},
                       [s, n, m, inv, msk = std::vector<std::uint8_t>(mask.begin(), mask.end())](Tape& tp, Var self) {
                           auto const g = tp.grad(self);
                           auto gs = tp.grad(s);
                           for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t j = 0; j < m; ++j) {
                                   if (msk[j]) {
                                       gs[i * m + j] += g[i] * inv;
                                   }
                               }
                           }
                       });
}

Var mul_constant(Tape& tape, Var x, std::span<double const> weights) {
    auto const& in = tape.value(x);
    if (weights.size() != in.size()) {
        throw dimension_error("mul_constant: weight count " + std::to_string(weights.size())
                              + " does not match operand size " + std::to_string(in.size()));
    }
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = in[i] * weights[i];
    }
    return tape.record(std::move(out), {x},
                       [x, w = std::vector<double>(weights.begin(), weights.end())](Tape& tp, Var self) {
                           auto const g = tp.grad(self);
                           auto gx = tp.grad(x);
                           for (std::size_t i = 0; i < w.size(); ++i) {
                               gx[i] += g[i] * w[i];
                           }
                       });
}

Var mul(Tape& tape, Var a, Var b) {
    auto const& av = tape.value(a);
    auto const& bv = tape.value(b);
    if (av.size() != bv.size()) {
        throw dimension_error("mul: operand sizes " + shape_to_string(av.shape()) + " and "
                              + shape_to_string(bv.shape()) + " differ");
    }
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = av[i] * bv[i];
    }
    return tape.record(std::move(out), {a, b}, [a, b](Tape& tp, Var self) {
        auto const g = tp.grad(self);
        auto const ad = tp.value(a).data();
        auto const bd = tp.value(b).data();
        if (tp.needs_grad(a)) {
            auto ga = tp.grad(a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * bd[i];
            }
        }
        if (tp.needs_grad(b)) {
            auto gb = tp.grad(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] += g[i] * ad[i];
            }
        }
    });
}

Var add(Tape& tape, Var a, Var b) {
    auto const& av = tape.value(a);
    auto const& bv = tape.value(b);
    if (av.size() != bv.size()) {
        throw dimension_error("add: operand sizes " + shape_to_string(av.shape()) + " and "
                              + shape_to_string(bv.shape()) + " differ");
    }
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = av[i] + bv[i];
    }
    return tape.record(std::move(out), {a, b}, [a, b](Tape& tp, Var self) {
        auto const g = tp.grad(self);
        for (Var v : {a, b}) {
            if (tp.needs_grad(v)) {
                auto gv = tp.grad(v);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gv[i] += g[i];
                }
            }
        }
    });
}

Var concat(Tape& tape, std::span<Var const> parts) {
    std::size_t total = 0;
    for (Var v : parts) {
        total += tape.value(v).size();
    }
    Tensor out({total});
    std::size_t offset = 0;
    for (Var v : parts) {
        auto const src = tape.value(v).data();
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
        offset += src.size();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return tape.record(std::move(out), inputs, [inputs](Tape& tp, Var self) {
        auto const g = tp.grad(self);
        std::size_t offset = 0;
        for (Var v : inputs) {
            std::size_t const len = tp.value(v).size();
            if (tp.needs_grad(v)) {
                auto gv = tp.grad(v);
                for (std::size_t i = 0; i < len; ++i) {
                    gv[i] += g[offset + i];
                }
            }
            offset += len;
        }
    });
}

Var affine(Tape& tape, Var x, Var weight, Var bias) {
    auto const& xv = tape.value(x);
    auto const& wv = tape.value(weight);
    auto const& bv = tape.value(bias);
    require_rank(wv, 2, "affine", "weight");
    std::size_t const d = wv.shape()[0];
    std::size_t const h = wv.shape()[1];
    if (xv.size() != d) {
        throw dimension_error("affine: input size " + std::to_string(xv.size()) + " does not match weight input axis "
                              + std::to_string(d));
    }
    if (bv.size() != h) {
        throw dimension_error("affine: bias size " + std::to_string(bv.size()) + " does not match weight output axis "
                              + std::to_string(h));
    }
    Tensor out({h});
    for (std::size_t j = 0; j < h; ++j) {
        out[j] = bv[j];
    }
    for (std::size_t i = 0; i < d; ++i) {
        double const xi = xv[i];
        if (xi == 0.0) {
            continue;
        }
        auto const* wr = wv.data().data() + i * h;
        for (std::size_t j = 0; j < h; ++j) {
            out[j] += xi * wr[j];
        }
    }
    return tape.record(std::move(out), {x, weight, bias}, [x, weight, bias, d, h](Tape& tp, Var self) {
        auto const g = tp.grad(self);
        auto const xd = tp.value(x).data();
        auto const wd = tp.value(weight).data();
        if (tp.needs_grad(bias)) {
            auto gb = tp.grad(bias);
            for (std::size_t j = 0; j < h; ++j) {
                gb[j] += g[j];
            }
        }
        if (tp.needs_grad(weight)) {
            auto gw = tp.grad(weight);
            for (std::size_t i = 0; i < d; ++i) {
                if (xd[i] == 0.0) {
                    continue;
                }
                for (std::size_t j = 0; j < h; ++j) {
                    gw[i * h + j] += xd[i] * g[j];
                }
            }
        }
        if (tp.needs_grad(x)) {
            auto gx = tp.grad(x);
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < h; ++j) {
                    acc += wd[i * h + j] * g[j];
                }
                gx[i] += acc;
            }
        }
    });
}

Var sum(Tape& tape, Var x) {
    auto const& in = tape.value(x);
    Tensor out({1});
    out[0] = std::accumulate(in.data().begin(), in.data().end(), 0.0);
    return tape.record(std::move(out), {x}, [x](Tape& tp, Var self) {
        double const g = tp.grad(self)[0];
        for (auto& v : tp.grad(x)) {
            v += g;
        }
    });
}

std::vector<double> softmax(std::span<double const> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) {
        return out;
    }
    double const hi = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - hi);
        z += out[i];
    }
    for (auto& v : out) {
        v /= z;
    }
    return out;
}

Var softmax_nll(Tape& tape, Var logits, std::size_t label) {
    auto const& in = tape.value(logits);
    if (label >= in.size()) {
        throw dimension_error("softmax_nll: label " + std::to_string(label) + " outside " + std::to_string(in.size())
                              + " classes");
    }
    double const hi = *std::max_element(in.data().begin(), in.data().end());
    double z = 0.0;
    for (double v : in.data()) {
        z += std::exp(v - hi);
    }
    Tensor out({1});
    out[0] = -(in[label] - hi - std::log(z));
    return tape.record(std::move(out), {logits}, [logits, label](Tape& tp, Var self) {
        double const g = tp.grad(self)[0];
        auto const p = softmax(tp.value(logits).data());
        auto gl = tp.grad(logits);
        for (std::size_t i = 0; i < p.size(); ++i) {
            gl[i] += g * (p[i] - (i == label ? 1.0 : 0.0));
        }
    });
}

// ---------------------------------------------------------------------------

void sgd_step(std::span<NamedTensor const> params, SgdConfig const& config) {
    if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
        throw optimizer_error("learning rate must be a non-negative finite number");
    }
    for (auto const& p : params) {
        if (!p.tensor->has_grad()) {
            throw optimizer_error("parameter '" + p.name + "' has no gradient");
        }
    }
    for (auto const& p : params) {
        auto data = p.tensor->data();
        auto g = p.tensor->grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw numeric_error("non-finite gradient in parameter '" + p.name + "'");
            }
            data[i] -= config.learning_rate * g[i];
        }
        p.tensor->zero_grad();
    }
}

std::vector<double> finite_difference_gradient(std::function<double()> const& loss, Tensor& param, double step) {
    std::vector<double> out(param.size());
    auto data = param.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        double const saved = data[i];
        data[i] = saved + step;
        double const up = loss();
        data[i] = saved - step;
        double const down = loss();
        data[i] = saved;
        out[i] = (up - down) / (2.0 * step);
    }
    return out;
}

double max_relative_error(std::span<double const> analytic, std::span<double const> numeric, double floor) {
    if (analytic.size() != numeric.size()) {
        throw dimension_error("max_relative_error: gradient sizes differ");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double const scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
    }
    return worst;
}

}  // namespace mphcnn
