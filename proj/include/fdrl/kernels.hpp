#pragma once

#include <cstddef>
#include <string_view>

// Dense arithmetic used by the neural core and the aggregation server.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2/FMA
// variant is compiled as well and selected at startup when the CPU supports
// it. Elementwise kernels (axpy, add, divide, adam) use the same operation
// order in both variants and agree bit for bit; `dot` reassociates the sum
// across four lanes and agrees to rounding.
//
// The FDRL_KERNELS environment variable (`scalar` or `avx2`) overrides the
// automatic choice.

namespace fdrl::kernels {

struct AdamCoefficients {
    double step_size; // lr * sqrt(1 - beta2^t) / (1 - beta1^t)
    double beta1;
    double beta2;
    double epsilon_hat; // epsilon * sqrt(1 - beta2^t)
};

struct KernelTable {
    std::string_view name;

    double (*dot)(const double *a, const double *b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double *x, double *y, std::size_t n);
    // y += x
    void (*add)(const double *x, double *y, std::size_t n);
    // y /= d
    void (*divide)(double *y, std::size_t n, double d);
    // y = W x + b, W row-major rows x cols
    void (*matvec)(const double *w, const double *b, const double *x, double *y, std::size_t rows,
                   std::size_t cols);
    // x_grad += W^T g
    void (*matvec_transposed)(const double *w, const double *g, double *x_grad, std::size_t rows,
                              std::size_t cols);
    // W_grad += g x^T
    void (*rank1_update)(const double *g, const double *x, double *w_grad, std::size_t rows,
                         std::size_t cols);
    // m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2; w -= step * m / (sqrt(v) + eps_hat)
    void (*adam)(const AdamCoefficients &c, const double *g, double *m, double *v, double *w,
                 std::size_t n);
};

const KernelTable &scalar_kernels();

/// AVX2/FMA table, or nullptr when not compiled in or not supported by this CPU.
const KernelTable *avx2_kernels();

/// The table chosen for this process (fixed after first use).
const KernelTable &active();

} // namespace fdrl::kernels
