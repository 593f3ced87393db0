#include "fdrl/kernels.hpp"

#include "kernels_internal.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace fdrl::kernels {
namespace {

double dot_scalar(const double *a, const double *b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double *x, double *y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(const double *x, double *y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void divide_scalar(double *y, std::size_t n, double d) {
    for (std::size_t i = 0; i < n; ++i) y[i] /= d;
}

void matvec_scalar(const double *w, const double *b, const double *x, double *y, std::size_t rows,
                   std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = b[r] + dot_scalar(w + r * cols, x, cols);
}

void matvec_transposed_scalar(const double *w, const double *g, double *x_grad, std::size_t rows,
                              std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(g[r], w + r * cols, x_grad, cols);
}

void rank1_update_scalar(const double *g, const double *x, double *w_grad, std::size_t rows,
                         std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(g[r], x, w_grad + r * cols, cols);
}

void adam_scalar(const AdamCoefficients &c, const double *g, double *m, double *v, double *w,
                 std::size_t n) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = c.beta1 * m[i] + one_minus_b1 * g[i];
        v[i] = c.beta2 * v[i] + one_minus_b2 * (g[i] * g[i]);
        w[i] -= c.step_size * m[i] / (std::sqrt(v[i]) + c.epsilon_hat);
    }
}

const KernelTable kScalar{
    "scalar",           dot_scalar,          axpy_scalar, add_scalar, divide_scalar, matvec_scalar,
    matvec_transposed_scalar, rank1_update_scalar, adam_scalar,
};

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable &choose() {
    const KernelTable *fast = avx2_kernels();
    if (const char *env = std::getenv("FDRL_KERNELS")) {
        const std::string want(env);
        if (want == "scalar") return kScalar;
        if (want == "avx2") {
            if (!fast) throw std::runtime_error("FDRL_KERNELS=avx2 but AVX2 kernels are unavailable");
            return *fast;
        }
        if (!want.empty() && want != "auto")
            throw std::runtime_error("FDRL_KERNELS must be scalar, avx2 or auto, got '" + want + "'");
    }
    return fast ? *fast : kScalar;
}

} // namespace

const KernelTable &scalar_kernels() { return kScalar; }

const KernelTable *avx2_kernels() {
#ifdef FDRL_HAVE_AVX2_KERNELS
    static const bool supported = cpu_has_avx2();
    return supported ? &detail::avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable &active() {
    static const KernelTable &table = choose();
    return table;
}

} // namespace fdrl::kernels
