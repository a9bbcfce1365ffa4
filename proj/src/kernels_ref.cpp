#include "dsa/kernels.hpp"

#include <algorithm>
#include <cmath>

// Naive reference kernels: one plain loop nest each, no striping, no OpenMP.
// These are the oracles the fast kernels are tested against and the serial
// side of the benchmark.

namespace dsa::kernels::ref {

double bilinear_sample_full(const double* D, int d, double x, double y, int c) {
    double acc = 0.0;
    for (int n = 0; n < d; ++n) {
        const double wy = std::max(0.0, 1.0 - std::fabs(y - n));
        if (wy == 0.0) continue;
        for (int m = 0; m < d; ++m) {
            const double wx = std::max(0.0, 1.0 - std::fabs(x - m));
            if (wx == 0.0) continue;
            acc += D[(static_cast<std::size_t>(n) * d + m) * 3 + c] * wx * wy;
        }
    }
    return acc;
}

void linear_forward(const double* W, const double* b, const double* X, double* Y, int n,
                    int rows, int cols) {
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < rows; ++r) {
            double acc = b[r];
            for (int c = 0; c < cols; ++c)
                acc += X[static_cast<std::size_t>(i) * cols + c] *
                       W[static_cast<std::size_t>(r) * cols + c];
            Y[static_cast<std::size_t>(i) * rows + r] = acc;
        }
    }
}

void linear_backward_data(const double* WT, const double* dY, double* dX, int n, int rows,
                          int cols) {
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int r = 0; r < rows; ++r)
                acc += dY[static_cast<std::size_t>(i) * rows + r] *
                       WT[static_cast<std::size_t>(c) * rows + r];
            dX[static_cast<std::size_t>(i) * cols + c] = acc;
        }
    }
}

void linear_param_grad(const double* X, const double* dY, double* dW, double* db, int n,
                       int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += dY[static_cast<std::size_t>(i) * rows + r];
        db[r] = acc;
    }
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += dY[static_cast<std::size_t>(i) * rows + r] *
                       X[static_cast<std::size_t>(i) * cols + c];
            dW[static_cast<std::size_t>(r) * cols + c] = acc;
        }
    }
}

void warp_forward(const double* D, int d, const WarpPose& pose, double* out, int L) {
    constexpr double kPi = 3.14159265358979323846;
    for (int yb = 0; yb < L; ++yb) {
        for (int xb = 0; xb < L; ++xb) {
            double xr = xb, yr = yb;
            if (pose.rotate) {
                const double ctr = 0.5 * (L - 1);
                const double a = pose.alpha_deg * (kPi / 180.0);
                xr = std::cos(a) * (xb - ctr) - std::sin(a) * (yb - ctr) + ctr;
                yr = std::sin(a) * (xb - ctr) + std::cos(a) * (yb - ctr) + ctr;
            }
            const double xd = pose.s_x * (xr + pose.t_x);
            const double yd = pose.s_y * (yr + pose.t_y);
            for (int c = 0; c < 3; ++c)
                out[(static_cast<std::size_t>(yb) * L + xb) * 3 + c] =
                    bilinear_sample_full(D, d, xd, yd, c);
        }
    }
}

double reduce_sq_diff(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = a[i] - b[i];
        acc += r * r;
    }
    return acc;
}

} // namespace dsa::kernels::ref
