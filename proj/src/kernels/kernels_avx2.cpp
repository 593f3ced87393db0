#include "kernels_internal.hpp"

#include <immintrin.h>

#include <cmath>

namespace fdrl::kernels::detail {
namespace {

inline double hsum(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double dot_avx2(const double *a, const double *b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

// Multiply-then-add (no FMA) so results match the scalar kernel exactly.
void axpy_avx2(double alpha, const double *x, double *y, std::size_t n) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(a, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_avx2(const double *x, double *y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void divide_avx2(double *y, std::size_t n, double d) {
    const __m256d dv = _mm256_set1_pd(d);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_div_pd(_mm256_loadu_pd(y + i), dv));
    for (; i < n; ++i) y[i] /= d;
}

// Four rows per pass; each row accumulates in the same order as dot_avx2.
void matvec_avx2(const double *w, const double *b, const double *x, double *y, std::size_t rows,
                 std::size_t cols) {
    std::size_t r = 0;
    const std::size_t body = cols & ~std::size_t{3};
    for (; r + 4 <= rows; r += 4) {
        const double *w0 = w + r * cols;
        const double *w1 = w0 + cols;
        const double *w2 = w1 + cols;
        const double *w3 = w2 + cols;
        __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
        __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
        for (std::size_t i = 0; i < body; i += 4) {
            const __m256d xv = _mm256_loadu_pd(x + i);
            a0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + i), xv, a0);
            a1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + i), xv, a1);
            a2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + i), xv, a2);
            a3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + i), xv, a3);
        }
        double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
        for (std::size_t i = body; i < cols; ++i) {
            s0 += w0[i] * x[i];
            s1 += w1[i] * x[i];
            s2 += w2[i] * x[i];
            s3 += w3[i] * x[i];
        }
        y[r] = b[r] + s0;
        y[r + 1] = b[r + 1] + s1;
        y[r + 2] = b[r + 2] + s2;
        y[r + 3] = b[r + 3] + s3;
    }
    for (; r < rows; ++r) y[r] = b[r] + dot_avx2(w + r * cols, x, cols);
}

void matvec_transposed_avx2(const double *w, const double *g, double *x_grad, std::size_t rows,
                            std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(g[r], w + r * cols, x_grad, cols);
}

void rank1_update_avx2(const double *g, const double *x, double *w_grad, std::size_t rows,
                       std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(g[r], x, w_grad + r * cols, cols);
}

void adam_avx2(const AdamCoefficients &c, const double *g, double *m, double *v, double *w, std::size_t n) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    const __m256d b1 = _mm256_set1_pd(c.beta1), b2 = _mm256_set1_pd(c.beta2);
    const __m256d ob1 = _mm256_set1_pd(one_minus_b1), ob2 = _mm256_set1_pd(one_minus_b2);
    const __m256d step = _mm256_set1_pd(c.step_size), eps = _mm256_set1_pd(c.epsilon_hat);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        const __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(ob1, gv));
        const __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(ob2, _mm256_mul_pd(gv, gv)));
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(step, mv), _mm256_add_pd(_mm256_sqrt_pd(vv), eps));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), upd));
    }
    for (; i < n; ++i) {
        m[i] = c.beta1 * m[i] + one_minus_b1 * g[i];
        v[i] = c.beta2 * v[i] + one_minus_b2 * (g[i] * g[i]);
        w[i] -= c.step_size * m[i] / (std::sqrt(v[i]) + c.epsilon_hat);
    }
}

const KernelTable kAvx2{
    "avx2",           dot_avx2,          axpy_avx2, add_avx2, divide_avx2, matvec_avx2,
    matvec_transposed_avx2, rank1_update_avx2, adam_avx2,
};

} // namespace

const KernelTable &avx2_table() { return kAvx2; }

} // namespace fdrl::kernels::detail
