#include "tocomm/nn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "tocomm/nn/functions.hpp"
#include "tocomm/nn/kernels.hpp"

namespace tocomm::nn {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
    }
}

Tensor matrix_like(const Tensor& t) { return Tensor::matrix(t.rows(), t.cols()); }

}  // namespace

Var Tape::record(Tensor value, std::string_view op, std::vector<Var> inputs,
                 std::function<void(Tape&, const Tensor&)> backprop) {
    if (!value.all_finite()) throw NonFiniteError("non-finite value produced by " + std::string(op));
    Node n;
    n.value = std::move(value);
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return needs_grad(v); });
    if (n.requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id >= nodes_.size()) throw std::out_of_range("tape: invalid variable handle");
    return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Tensor Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.param) return n.param->grad;
    if (n.grad.size() == n.value.size()) return n.grad;
    return Tensor(n.value.shape(), 0.0);
}

Tensor& Tape::grad_slot(Var v) {
    Node& n = nodes_[v.id];
    if (n.param) return n.param->grad;
    if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
}

Var Tape::constant(Tensor value) {
    if (!value.all_finite()) throw NonFiniteError("non-finite constant");
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::parameter(ParamStore& store, std::string_view name) {
    Parameter& p = store.get(name);
    Node n;
    n.value = p.value;
    n.requires_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::linear(Var x, Var w, Var b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (wv.rank() != 2) throw std::invalid_argument("linear: weight must be a matrix, got " + shape_string(wv.shape()));
    const std::size_t out = wv.shape()[0];
    const std::size_t in = wv.shape()[1];
    if (xv.cols() != in || bv.size() != out) {
        throw std::invalid_argument("linear: shapes x" + shape_string(xv.shape()) + " W" + shape_string(wv.shape()) +
                                    " b" + shape_string(bv.shape()) + " do not conform");
    }
    const std::size_t rows = xv.rows();
    Tensor y = Tensor::matrix(rows, out);
    kernels::active().gemm_nt(xv.raw(), wv.raw(), bv.raw(), y.raw(), rows, in, out);
    return record(std::move(y), "linear", {x, w, b}, [x, w, b, rows, in, out](Tape& t, const Tensor& g) {
        const auto& k = kernels::active();
        if (t.needs_grad(x)) k.gemm_nn_acc(g.raw(), t.value(w).raw(), t.grad_slot(x).raw(), rows, in, out);
        if (t.needs_grad(w)) k.gemm_tn_acc(g.raw(), t.value(x).raw(), t.grad_slot(w).raw(), rows, in, out);
        if (t.needs_grad(b)) {
            double* gb = t.grad_slot(b).raw();
            for (std::size_t m = 0; m < rows; ++m) {
                for (std::size_t o = 0; o < out; ++o) gb[o] += g[m * out + o];
            }
        }
    });
}

Var Tape::relu(Var x) {
    const Tensor& xv = value(x);
    Tensor y = matrix_like(xv);
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return record(std::move(y), "relu", {x}, [x](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        Tensor& gx = t.grad_slot(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv[i] > 0.0) gx[i] += g[i];
        }
    });
}

Var Tape::softplus(Var x) {
    const Tensor& xv = value(x);
    Tensor y = matrix_like(xv);
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = nn::softplus(xv[i]);
    return record(std::move(y), "softplus", {x}, [x](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        Tensor& gx = t.grad_slot(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * nn::sigmoid(xv[i]);
    });
}

Var Tape::tanh(Var x) {
    const Tensor& xv = value(x);
    Tensor y = matrix_like(xv);
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = std::tanh(xv[i]);
    Var out = record(std::move(y), "tanh", {x}, {});
    if (needs_grad(x)) {
        nodes_[out.id].backprop = [x, out](Tape& t, const Tensor& g) {
            const Tensor& yv = t.value(out);
            Tensor& gx = t.grad_slot(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - yv[i] * yv[i]);
        };
    }
    return out;
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "add");
    Tensor y = matrix_like(av);
    for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] + bv[i];
    return record(std::move(y), "add", {a, b}, [a, b](Tape& t, const Tensor& g) {
        for (Var v : {a, b}) {
            if (!t.needs_grad(v)) continue;
            Tensor& gv = t.grad_slot(v);
            for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "mul");
    Tensor y = matrix_like(av);
    for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] * bv[i];
    return record(std::move(y), "mul", {a, b}, [a, b](Tape& t, const Tensor& g) {
        if (t.needs_grad(a)) {
            const Tensor& bv = t.value(b);
            Tensor& ga = t.grad_slot(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.needs_grad(b)) {
            const Tensor& av = t.value(a);
            Tensor& gb = t.grad_slot(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var Tape::scale(Var a, double factor) {
    const Tensor& av = value(a);
    Tensor y = matrix_like(av);
    for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] * factor;
    return record(std::move(y), "scale", {a}, [a, factor](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_slot(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
}

Var Tape::add_scalar(Var a, double offset) {
    const Tensor& av = value(a);
    Tensor y = matrix_like(av);
    for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] + offset;
    return record(std::move(y), "add_scalar", {a}, [a](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_slot(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var Tape::mul_rows(Var x, Var col) {
    const Tensor& xv = value(x);
    const Tensor& cv = value(col);
    if (cv.size() != xv.rows()) {
        throw std::invalid_argument("mul_rows: column " + shape_string(cv.shape()) + " vs rows of " +
                                    shape_string(xv.shape()));
    }
    const std::size_t rows = xv.rows();
    const std::size_t cols = xv.cols();
    Tensor y = matrix_like(xv);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = xv[r * cols + c] * cv[r];
    }
    return record(std::move(y), "mul_rows", {x, col}, [x, col, rows, cols](Tape& t, const Tensor& g) {
        if (t.needs_grad(x)) {
            const Tensor& cv = t.value(col);
            Tensor& gx = t.grad_slot(x);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r * cols + c] * cv[r];
            }
        }
        if (t.needs_grad(col)) {
            const Tensor& xv = t.value(x);
            Tensor& gc = t.grad_slot(col);
            for (std::size_t r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < cols; ++c) acc += g[r * cols + c] * xv[r * cols + c];
                gc[r] += acc;
            }
        }
    });
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    std::vector<Tensor> values;
    values.reserve(parts.size());
    for (Var p : parts) values.push_back(value(p));
    Tensor y = nn::concat_cols(values);
    std::vector<Var> inputs(parts.begin(), parts.end());
    return record(std::move(y), "concat_cols", inputs, [inputs](Tape& t, const Tensor& g) {
        const std::size_t rows = g.rows();
        const std::size_t total = g.cols();
        std::size_t offset = 0;
        for (Var p : inputs) {
            const std::size_t w = t.value(p).cols();
            if (t.needs_grad(p)) {
                Tensor& gp = t.grad_slot(p);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * total + offset + c];
                }
            }
            offset += w;
        }
    });
}

Var Tape::slice_cols(Var x, std::size_t begin, std::size_t count) {
    Tensor y = nn::slice_cols(value(x), begin, count);
    return record(std::move(y), "slice_cols", {x}, [x, begin, count](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_slot(x);
        const std::size_t w = gx.cols();
        for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < count; ++c) gx[r * w + begin + c] += g[r * count + c];
        }
    });
}

Var Tape::row_sum(Var x) {
    const Tensor& xv = value(x);
    const std::size_t rows = xv.rows();
    const std::size_t cols = xv.cols();
    Tensor y = Tensor::matrix(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += xv[r * cols + c];
        y[r] = acc;
    }
    return record(std::move(y), "row_sum", {x}, [x, rows, cols](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_slot(x);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r];
        }
    });
}

Var Tape::sum(Var x) {
    const Tensor& xv = value(x);
    double acc = 0.0;
    for (double v : xv.data()) acc += v;
    return record(Tensor::scalar(acc), "sum", {x}, [x](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_slot(x);
        for (double& v : gx.data()) v += g[0];
    });
}

Var Tape::mean(Var x) {
    const Tensor& xv = value(x);
    if (xv.empty()) throw std::invalid_argument("mean: empty input");
    double acc = 0.0;
    for (double v : xv.data()) acc += v;
    const double n = static_cast<double>(xv.size());
    return record(Tensor::scalar(acc / n), "mean", {x}, [x, n](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_slot(x);
        for (double& v : gx.data()) v += g[0] / n;
    });
}

Var Tape::cross_entropy(Var logits, std::span<const std::uint32_t> labels) {
    const Tensor& lv = value(logits);
    const std::size_t rows = lv.rows();
    const std::size_t classes = lv.cols();
    if (labels.size() != rows) throw std::invalid_argument("cross_entropy: label count does not match rows");
    Tensor y = Tensor::matrix(rows, 1);
    Tensor probs = Tensor::matrix(rows, classes);
    for (std::size_t r = 0; r < rows; ++r) {
        if (labels[r] >= classes) {
            throw std::out_of_range("cross_entropy: label " + std::to_string(labels[r]) + " outside [0, " +
                                    std::to_string(classes) + ")");
        }
        const auto row = lv.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
        const double lse = mx + std::log(z);
        y[r] = lse - row[labels[r]];
        for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(row[c] - lse);
    }
    std::vector<std::uint32_t> lab(labels.begin(), labels.end());
    return record(std::move(y), "cross_entropy", {logits},
                  [logits, rows, classes, lab = std::move(lab), probs = std::move(probs)](Tape& t, const Tensor& g) {
                      Tensor& gl = t.grad_slot(logits);
                      for (std::size_t r = 0; r < rows; ++r) {
                          for (std::size_t c = 0; c < classes; ++c) {
                              const double target = c == lab[r] ? 1.0 : 0.0;
                              gl[r * classes + c] += g[r] * (probs[r * classes + c] - target);
                          }
                      }
                  });
}

Var Tape::kl_std_normal(Var mu, Var sigma) {
    const Tensor& mv = value(mu);
    const Tensor& sv = value(sigma);
    require_same_shape(mv, sv, "kl_std_normal");
    const std::size_t rows = mv.rows();
    const std::size_t cols = mv.cols();
    Tensor y = Tensor::matrix(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double m = mv[r * cols + c];
            const double s = sv[r * cols + c];
            if (!(s > 0.0)) throw std::domain_error("kl_std_normal: sigma must be positive");
            acc += (m * m + s * s - 1.0) / 2.0 - std::log(s);
        }
        y[r] = acc;
    }
    return record(std::move(y), "kl_std_normal", {mu, sigma}, [mu, sigma, rows, cols](Tape& t, const Tensor& g) {
        if (t.needs_grad(mu)) {
            const Tensor& mv = t.value(mu);
            Tensor& gm = t.grad_slot(mu);
            for (std::size_t i = 0; i < rows * cols; ++i) gm[i] += g[i / cols] * mv[i];
        }
        if (t.needs_grad(sigma)) {
            const Tensor& sv = t.value(sigma);
            Tensor& gs = t.grad_slot(sigma);
            for (std::size_t i = 0; i < rows * cols; ++i) gs[i] += g[i / cols] * (sv[i] - 1.0 / sv[i]);
        }
    });
}

Var Tape::surrogate(Var x, Tensor forward_value, SurrogateGrad backward, std::string_view op_name) {
    const Tensor& xv = value(x);
    if (forward_value.size() != xv.size()) {
        throw std::invalid_argument(std::string(op_name) + ": forward value shape does not match input");
    }
    forward_value = forward_value.reshaped({xv.rows(), xv.cols()});
    return record(std::move(forward_value), op_name, {x}, [x, backward = std::move(backward)](Tape& t, const Tensor& g) {
        Tensor gx = backward(g, t.value(x));
        Tensor& slot = t.grad_slot(x);
        if (gx.size() != slot.size()) throw std::logic_error("surrogate gradient has the wrong size");
        for (std::size_t i = 0; i < gx.size(); ++i) slot[i] += gx[i];
    });
}

void Tape::backward(Var root) {
    if (nodes_.empty() || !root.valid()) throw std::logic_error("backward: nothing has been recorded");
    if (differentiated_) throw std::logic_error("backward: tape already differentiated");
    const Node& r = node(root);
    if (r.value.size() != 1) {
        throw std::invalid_argument("backward: root must be a scalar, got " + shape_string(r.value.shape()));
    }
    if (!std::isfinite(r.value[0])) throw NonFiniteError("backward: non-finite loss");
    differentiated_ = true;
    if (!r.requires_grad) return;
    grad_slot(root)[0] += 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backprop) continue;
        if (n.grad.size() != n.value.size()) continue;  // unreached
        n.backprop(*this, n.grad);
    }
}

}  // namespace tocomm::nn
