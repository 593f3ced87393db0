#include "fdrl/kernels.hpp"
#include "fdrl/random.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace fdrl;

namespace {

std::vector<double> random_vector(Rng &rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto &x : v) x = uniform(rng, -2.0, 2.0);
    return v;
}

// Plain loops written independently of the kernel sources.
double naive_dot(const std::vector<double> &a, const std::vector<double> &b) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(s);
}

const std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 8, 22, 63, 64, 65, 129};

} // namespace

TEST_CASE("scalar kernels match naive loops") {
    const auto &k = kernels::scalar_kernels();
    Rng rng = make_rng(5, "kernels");
    for (const auto n : kSizes) {
        const auto a = random_vector(rng, n), b = random_vector(rng, n);
        CHECK(k.dot(a.data(), b.data(), n) == doctest::Approx(naive_dot(a, b)).epsilon(1e-12));

        auto y = b;
        k.axpy(0.5, a.data(), y.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == 0.5 * a[i] + b[i]);

        y = b;
        k.add(a.data(), y.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == a[i] + b[i]);

        y = b;
        k.divide(y.data(), n, 3.0);
        for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == b[i] / 3.0);
    }
}

TEST_CASE("scalar matvec family matches naive loops") {
    const auto &k = kernels::scalar_kernels();
    Rng rng = make_rng(6, "kernels");
    const std::size_t rows = 7, cols = 13;
    const auto w = random_vector(rng, rows * cols), b = random_vector(rng, rows), x = random_vector(rng, cols);
    std::vector<double> y(rows);
    k.matvec(w.data(), b.data(), x.data(), y.data(), rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = b[r];
        for (std::size_t c = 0; c < cols; ++c) s += w[r * cols + c] * x[c];
        CHECK(y[r] == doctest::Approx(s).epsilon(1e-12));
    }

    const auto g = random_vector(rng, rows);
    std::vector<double> xg(cols, 1.0);
    k.matvec_transposed(w.data(), g.data(), xg.data(), rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
        double s = 1.0;
        for (std::size_t r = 0; r < rows; ++r) s += w[r * cols + c] * g[r];
        CHECK(xg[c] == doctest::Approx(s).epsilon(1e-12));
    }

    std::vector<double> wg(rows * cols, 0.25);
    k.rank1_update(g.data(), x.data(), wg.data(), rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) CHECK(wg[r * cols + c] == doctest::Approx(0.25 + g[r] * x[c]));
}

TEST_CASE("scalar adam matches the textbook bias-corrected update") {
    const auto &k = kernels::scalar_kernels();
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> w{1.0, -2.0, 0.5}, m(3, 0.0), v(3, 0.0);
    std::vector<double> w_ref = w, m_ref = m, v_ref = v;
    const std::vector<std::vector<double>> grads{{0.1, -0.3, 2.0}, {0.2, 0.1, -1.0}, {-0.5, 0.0, 0.3}};
    for (std::size_t t = 1; t <= grads.size(); ++t) {
        const auto &g = grads[t - 1];
        const double bc1 = 1.0 - std::pow(b1, t), bc2 = 1.0 - std::pow(b2, t);
        const kernels::AdamCoefficients c{lr * std::sqrt(bc2) / bc1, b1, b2, eps * std::sqrt(bc2)};
        k.adam(c, g.data(), m.data(), v.data(), w.data(), 3);
        for (std::size_t i = 0; i < 3; ++i) {
            m_ref[i] = b1 * m_ref[i] + (1 - b1) * g[i];
            v_ref[i] = b2 * v_ref[i] + (1 - b2) * g[i] * g[i];
            w_ref[i] -= lr * (m_ref[i] / bc1) / (std::sqrt(v_ref[i] / bc2) + eps);
        }
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(w[i] == doctest::Approx(w_ref[i]).epsilon(1e-12));
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
    const auto *fast = kernels::avx2_kernels();
    if (fast == nullptr) {
        MESSAGE("AVX2 kernels not available on this machine");
        return;
    }
    const auto &ref = kernels::scalar_kernels();
    Rng rng = make_rng(7, "kernels");
    for (const auto n : kSizes) {
        const auto a = random_vector(rng, n), b = random_vector(rng, n);
        const double dr = ref.dot(a.data(), b.data(), n), df = fast->dot(a.data(), b.data(), n);
        CHECK(std::abs(dr - df) <= 1e-12 * (1.0 + naive_dot(a, a) + naive_dot(b, b)));

        // Elementwise kernels must agree bit for bit.
        auto y1 = b, y2 = b;
        ref.axpy(-1.25, a.data(), y1.data(), n);
        fast->axpy(-1.25, a.data(), y2.data(), n);
        CHECK(y1 == y2);
        y1 = b, y2 = b;
        ref.add(a.data(), y1.data(), n);
        fast->add(a.data(), y2.data(), n);
        CHECK(y1 == y2);
        y1 = b, y2 = b;
        ref.divide(y1.data(), n, 7.0);
        fast->divide(y2.data(), n, 7.0);
        CHECK(y1 == y2);

        auto w1 = random_vector(rng, n), m1 = random_vector(rng, n), v1 = random_vector(rng, n);
        for (auto &x : v1) x = std::abs(x);
        auto w2 = w1, m2 = m1, v2 = v1;
        const kernels::AdamCoefficients c{1e-3, 0.9, 0.999, 1e-8};
        ref.adam(c, a.data(), m1.data(), v1.data(), w1.data(), n);
        fast->adam(c, a.data(), m2.data(), v2.data(), w2.data(), n);
        CHECK(w1 == w2);
        CHECK(m1 == m2);
        CHECK(v1 == v2);
    }

    for (const std::size_t rows : {1, 3, 4, 9, 64}) {
        for (const std::size_t cols : {1, 5, 8, 22, 64}) {
            const auto w = random_vector(rng, rows * cols), bias = random_vector(rng, rows),
                       x = random_vector(rng, cols), g = random_vector(rng, rows);
            std::vector<double> y1(rows), y2(rows);
            ref.matvec(w.data(), bias.data(), x.data(), y1.data(), rows, cols);
            fast->matvec(w.data(), bias.data(), x.data(), y2.data(), rows, cols);
            for (std::size_t r = 0; r < rows; ++r) CHECK(y1[r] == doctest::Approx(y2[r]).epsilon(1e-12));

            std::vector<double> xg1(cols, 0.5), xg2(cols, 0.5);
            ref.matvec_transposed(w.data(), g.data(), xg1.data(), rows, cols);
            fast->matvec_transposed(w.data(), g.data(), xg2.data(), rows, cols);
            CHECK(xg1 == xg2);

            std::vector<double> wg1(rows * cols, 0.1), wg2(rows * cols, 0.1);
            ref.rank1_update(g.data(), x.data(), wg1.data(), rows, cols);
            fast->rank1_update(g.data(), x.data(), wg2.data(), rows, cols);
            CHECK(wg1 == wg2);
        }
    }
}

TEST_CASE("active table is one of the two variants") {
    const auto &a = kernels::active();
    CHECK((a.name == "scalar" || a.name == "avx2"));
    CHECK(&kernels::active() == &a);
}
