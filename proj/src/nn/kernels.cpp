#include "tocomm/nn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace tocomm::nn::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(TOCOMM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* pick_default() {
    if (const char* env = std::getenv("TOCOMM_KERNELS")) {
        const std::string want(env);
        if (want == "scalar") return &scalar_table();
        if (want == "avx2" && isa_supported(Isa::avx2)) return &table(Isa::avx2);
    }
    return isa_supported(Isa::avx2) ? &table(Isa::avx2) : &scalar_table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> ptr{pick_default()};
    return ptr;
}

}  // namespace

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool isa_supported(Isa isa) {
    if (isa == Isa::scalar) return true;
    static const bool avx2 = cpu_has_avx2();
    return avx2;
}

const KernelTable& table(Isa isa) {
    if (!isa_supported(isa)) {
        throw std::invalid_argument("kernel ISA not supported here: " + std::string(to_string(isa)));
    }
#if defined(TOCOMM_HAVE_AVX2)
    if (isa == Isa::avx2) return detail::avx2_table();
#endif
    return scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_relaxed); }

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
    active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace tocomm::nn::kernels
