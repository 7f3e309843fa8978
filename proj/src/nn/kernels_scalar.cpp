#include "tocomm/nn/kernels.hpp"

#include <cmath>

namespace tocomm::nn::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt_scalar(const double* x, const double* w, const double* bias, double* y,
                    std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t m = 0; m < rows; ++m) {
        const double* xr = x + m * in;
        double* yr = y + m * out;
        for (std::size_t o = 0; o < out; ++o) {
            yr[o] = dot_scalar(xr, w + o * in, in) + (bias ? bias[o] : 0.0);
        }
    }
}

void gemm_nn_acc_scalar(const double* dy, const double* w, double* dx,
                        std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t m = 0; m < rows; ++m) {
        double* dxr = dx + m * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double g = dy[m * out + o];
            if (g != 0.0) axpy_scalar(g, w + o * in, dxr, in);
        }
    }
}

void gemm_tn_acc_scalar(const double* dy, const double* x, double* dw,
                        std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t o = 0; o < out; ++o) {
        double* dwr = dw + o * in;
        for (std::size_t m = 0; m < rows; ++m) {
            const double g = dy[m * out + o];
            if (g != 0.0) axpy_scalar(g, x + m * in, dwr, in);
        }
    }
}

void adam_step_scalar(double* param, double* grad, double* m, double* v, std::size_t n,
                      const AdamHyper& h) {
    const double step = h.learning_rate / h.bias_correction1;
    const double inv_bc2 = 1.0 / h.bias_correction2;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * (g * g);
        param[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + h.epsilon);
        grad[i] = 0.0;
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{Isa::scalar,       dot_scalar,         axpy_scalar,
                               gemm_nt_scalar,    gemm_nn_acc_scalar, gemm_tn_acc_scalar,
                               adam_step_scalar};
    return t;
}

}  // namespace tocomm::nn::kernels
