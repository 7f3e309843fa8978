// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "tocomm/nn/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace tocomm::nn::kernels {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        i += 4;
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

// One input row against four weight rows.
inline void dot_1x4(const double* xr, const double* w, std::size_t in, double* out4) {
    const double* w0 = w;
    const double* w1 = w + in;
    const double* w2 = w + 2 * in;
    const double* w3 = w + 3 * in;
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= in; i += 4) {
        const __m256d xv = _mm256_loadu_pd(xr + i);
        a0 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w0 + i), a0);
        a1 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w1 + i), a1);
        a2 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w2 + i), a2);
        a3 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w3 + i), a3);
    }
    double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
    for (; i < in; ++i) {
        s0 += xr[i] * w0[i];
        s1 += xr[i] * w1[i];
        s2 += xr[i] * w2[i];
        s3 += xr[i] * w3[i];
    }
    out4[0] = s0;
    out4[1] = s1;
    out4[2] = s2;
    out4[3] = s3;
}

void gemm_nt_avx2(const double* x, const double* w, const double* bias, double* y,
                  std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t m = 0; m < rows; ++m) {
        const double* xr = x + m * in;
        double* yr = y + m * out;
        std::size_t o = 0;
        for (; o + 4 <= out; o += 4) dot_1x4(xr, w + o * in, in, yr + o);
        for (; o < out; ++o) yr[o] = dot_avx2(xr, w + o * in, in);
        if (bias) {
            for (std::size_t j = 0; j < out; ++j) yr[j] += bias[j];
        }
    }
}

void gemm_nn_acc_avx2(const double* dy, const double* w, double* dx,
                      std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t m = 0; m < rows; ++m) {
        const double* g = dy + m * out;
        double* dxr = dx + m * in;
        std::size_t o = 0;
        for (; o + 4 <= out; o += 4) {
            const __m256d g0 = _mm256_set1_pd(g[o]);
            const __m256d g1 = _mm256_set1_pd(g[o + 1]);
            const __m256d g2 = _mm256_set1_pd(g[o + 2]);
            const __m256d g3 = _mm256_set1_pd(g[o + 3]);
            const double* w0 = w + o * in;
            const double* w1 = w0 + in;
            const double* w2 = w1 + in;
            const double* w3 = w2 + in;
            std::size_t i = 0;
            for (; i + 4 <= in; i += 4) {
                __m256d acc = _mm256_loadu_pd(dxr + i);
                acc = _mm256_fmadd_pd(g0, _mm256_loadu_pd(w0 + i), acc);
                acc = _mm256_fmadd_pd(g1, _mm256_loadu_pd(w1 + i), acc);
                acc = _mm256_fmadd_pd(g2, _mm256_loadu_pd(w2 + i), acc);
                acc = _mm256_fmadd_pd(g3, _mm256_loadu_pd(w3 + i), acc);
                _mm256_storeu_pd(dxr + i, acc);
            }
            for (; i < in; ++i) {
                dxr[i] += g[o] * w0[i] + g[o + 1] * w1[i] + g[o + 2] * w2[i] + g[o + 3] * w3[i];
            }
        }
        for (; o < out; ++o) axpy_avx2(g[o], w + o * in, dxr, in);
    }
}

void gemm_tn_acc_avx2(const double* dy, const double* x, double* dw,
                      std::size_t rows, std::size_t in, std::size_t out) {
    for (std::size_t o = 0; o < out; ++o) {
        double* dwr = dw + o * in;
        std::size_t m = 0;
        for (; m + 4 <= rows; m += 4) {
            const double c0 = dy[m * out + o];
            const double c1 = dy[(m + 1) * out + o];
            const double c2 = dy[(m + 2) * out + o];
            const double c3 = dy[(m + 3) * out + o];
            const __m256d g0 = _mm256_set1_pd(c0);
            const __m256d g1 = _mm256_set1_pd(c1);
            const __m256d g2 = _mm256_set1_pd(c2);
            const __m256d g3 = _mm256_set1_pd(c3);
            const double* x0 = x + m * in;
            const double* x1 = x0 + in;
            const double* x2 = x1 + in;
            const double* x3 = x2 + in;
            std::size_t i = 0;
            for (; i + 4 <= in; i += 4) {
                __m256d acc = _mm256_loadu_pd(dwr + i);
                acc = _mm256_fmadd_pd(g0, _mm256_loadu_pd(x0 + i), acc);
                acc = _mm256_fmadd_pd(g1, _mm256_loadu_pd(x1 + i), acc);
                acc = _mm256_fmadd_pd(g2, _mm256_loadu_pd(x2 + i), acc);
                acc = _mm256_fmadd_pd(g3, _mm256_loadu_pd(x3 + i), acc);
                _mm256_storeu_pd(dwr + i, acc);
            }
            for (; i < in; ++i) dwr[i] += c0 * x0[i] + c1 * x1[i] + c2 * x2[i] + c3 * x3[i];
        }
        for (; m < rows; ++m) axpy_avx2(dy[m * out + o], x + m * in, dwr, in);
    }
}

// No FMA here: the update must round exactly like the scalar reference.
void adam_step_avx2(double* param, double* grad, double* m, double* v, std::size_t n,
                    const AdamHyper& h) {
    const double step = h.learning_rate / h.bias_correction1;
    const double inv_bc2 = 1.0 / h.bias_correction2;
    const __m256d b1 = _mm256_set1_pd(h.beta1);
    const __m256d b2 = _mm256_set1_pd(h.beta2);
    const __m256d c1 = _mm256_set1_pd(1.0 - h.beta1);
    const __m256d c2 = _mm256_set1_pd(1.0 - h.beta2);
    const __m256d st = _mm256_set1_pd(step);
    const __m256d ib = _mm256_set1_pd(inv_bc2);
    const __m256d eps = _mm256_set1_pd(h.epsilon);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(c1, g));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(c2, _mm256_mul_pd(g, g)));
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, ib)), eps);
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(st, mi), denom);
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), upd));
        _mm256_storeu_pd(grad + i, zero);
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * (g * g);
        param[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + h.epsilon);
        grad[i] = 0.0;
    }
}

}  // namespace

namespace detail {
const KernelTable& avx2_table() {
    static const KernelTable t{Isa::avx2,       dot_avx2,         axpy_avx2,
                               gemm_nt_avx2,    gemm_nn_acc_avx2, gemm_tn_acc_avx2,
                               adam_step_avx2};
    return t;
}
}  // namespace detail

}  // namespace tocomm::nn::kernels
