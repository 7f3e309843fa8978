#pragma once

// Dense arithmetic kernels with a scalar reference implementation and an
// AVX2+FMA variant. The variant is chosen once at startup from the CPU's
// feature bits; TOCOMM_KERNELS=scalar (or select()) forces the reference path.
//
// All matrices are row-major and densely packed.

#include <cstddef>
#include <span>
#include <string_view>

namespace tocomm::nn::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

struct AdamHyper {
    double learning_rate;
    double beta1;
    double beta2;
    double epsilon;
    double bias_correction1;  // 1 - beta1^t
    double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
    Isa isa;

    double (*dot)(const double* a, const double* b, std::size_t n);

    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    // Y[m, o] = sum_i X[m, i] * W[o, i] + bias[o]   (bias may be null)
    void (*gemm_nt)(const double* x, const double* w, const double* bias, double* y,
                    std::size_t rows, std::size_t in, std::size_t out);

    // DX[m, i] += sum_o DY[m, o] * W[o, i]
    void (*gemm_nn_acc)(const double* dy, const double* w, double* dx,
                        std::size_t rows, std::size_t in, std::size_t out);

    // DW[o, i] += sum_m DY[m, o] * X[m, i]
    void (*gemm_tn_acc)(const double* dy, const double* x, double* dw,
                        std::size_t rows, std::size_t in, std::size_t out);

    // In-place Adam update over n parameters; also zeroes grad.
    void (*adam_step)(double* param, double* grad, double* m, double* v, std::size_t n,
                      const AdamHyper& h);
};

const KernelTable& scalar_table();
bool isa_supported(Isa isa);

// Throws std::invalid_argument if the ISA is not available on this CPU/build.
const KernelTable& table(Isa isa);

// The table used by the tensor ops.
const KernelTable& active();
void select(Isa isa);

// Convenience wrappers over active().
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace detail {
#if defined(TOCOMM_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace tocomm::nn::kernels
