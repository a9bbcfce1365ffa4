#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace dsa {

/// Adaptive-moment gradient descent over one flat parameter block.
template <typename T>
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<T> m;
    std::vector<T> v;
    long step_count = 0;

    explicit Adam(std::size_t n = 0, double lr_ = 1e-3) : lr(lr_), m(n, T(0)), v(n, T(0)) {}

    void resize(std::size_t n) {
        m.assign(n, T(0));
        v.assign(n, T(0));
        step_count = 0;
    }

    /// One minimizing update of params in place.
    void step(T* params, const T* grads, std::size_t n) {
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t i = 0; i < n; ++i) {
            const double g = static_cast<double>(grads[i]);
            const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
            const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            params[i] -= static_cast<T>(lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
        }
    }
};

} // namespace dsa
