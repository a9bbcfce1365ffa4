#include "dsa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dsa::kernels {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::size_t kChunk = 4096;

// Four-stripe dot product: fixed association order, independent of thread
// count, and the four independent accumulators let the compiler pipeline.
template <typename T>
inline T dot_striped(const T* a, const T* b, int n) {
    T acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) acc0 += a[i] * b[i];
    return (acc0 + acc1) + (acc2 + acc3);
}

struct GridPoint {
    double xd = 0.0;
    double yd = 0.0;
    double dxd_da = 0.0; // d(xd)/d(alpha) in radians
    double dyd_da = 0.0;
};

inline GridPoint map_point(int xb, int yb, const WarpPose& pose, int L) {
    GridPoint p;
    double xr = xb, yr = yb;
    if (pose.rotate) {
        const double c = 0.5 * (L - 1);
        const double a = pose.alpha_deg * (kPi / 180.0);
        const double ca = std::cos(a), sa = std::sin(a);
        const double ux = xb - c, uy = yb - c;
        xr = ca * ux - sa * uy + c;
        yr = sa * ux + ca * uy + c;
        p.dxd_da = pose.s_x * (-sa * ux - ca * uy);
        p.dyd_da = pose.s_y * (ca * ux - sa * uy);
    }
    p.xd = pose.s_x * (xr + pose.t_x);
    p.yd = pose.s_y * (yr + pose.t_y);
    return p;
}

} // namespace

template <typename T>
void linear_forward(const T* W, const T* b, const T* X, T* Y, int n, int rows, int cols,
                    bool parallel) {
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < rows; ++r)
            Y[static_cast<std::size_t>(i) * rows + r] =
                dot_striped(X + static_cast<std::size_t>(i) * cols,
                            W + static_cast<std::size_t>(r) * cols, cols) +
                b[r];
}

template <typename T>
void linear_backward_data(const T* WT, const T* dY, T* dX, int n, int rows, int cols,
                          bool parallel) {
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cols; ++c)
            dX[static_cast<std::size_t>(i) * cols + c] =
                dot_striped(dY + static_cast<std::size_t>(i) * rows,
                            WT + static_cast<std::size_t>(c) * rows, rows);
}

template <typename T>
void linear_param_grad(const T* X, const T* dY, T* dW, T* db, int n, int rows, int cols,
                       bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int r = 0; r < rows; ++r) {
        T* dWr = dW + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) dWr[c] = 0;
        T acc = 0;
        for (int i = 0; i < n; ++i) {
            const T g = dY[static_cast<std::size_t>(i) * rows + r];
            acc += g;
            const T* Xi = X + static_cast<std::size_t>(i) * cols;
            for (int c = 0; c < cols; ++c) dWr[c] += g * Xi[c];
        }
        db[r] = acc;
    }
}

double bilinear_sample(const double* D, int d, double x, double y, int c) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    double acc = 0.0;
    for (int j = 0; j < 2; ++j) {
        const int ny = y0 + j;
        if (ny < 0 || ny >= d) continue;
        for (int i = 0; i < 2; ++i) {
            const int nx = x0 + i;
            if (nx < 0 || nx >= d) continue;
            acc += wx[i] * wy[j] * D[(static_cast<std::size_t>(ny) * d + nx) * 3 + c];
        }
    }
    return acc;
}

template <typename T>
void warp_forward(const T* D, int d, const WarpPose& pose, T* out, int L, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int yb = 0; yb < L; ++yb) {
        for (int xb = 0; xb < L; ++xb) {
            const GridPoint p = map_point(xb, yb, pose, L);
            const int x0 = static_cast<int>(std::floor(p.xd));
            const int y0 = static_cast<int>(std::floor(p.yd));
            const double fx = p.xd - x0, fy = p.yd - y0;
            const double wx[2] = {1.0 - fx, fx};
            const double wy[2] = {1.0 - fy, fy};
            T* o = out + (static_cast<std::size_t>(yb) * L + xb) * 3;
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int j = 0; j < 2; ++j) {
                    const int ny = y0 + j;
                    if (ny < 0 || ny >= d) continue;
                    for (int i = 0; i < 2; ++i) {
                        const int nx = x0 + i;
                        if (nx < 0 || nx >= d) continue;
                        acc += wx[i] * wy[j] *
                               static_cast<double>(D[(static_cast<std::size_t>(ny) * d + nx) * 3 + c]);
                    }
                }
                o[c] = static_cast<T>(acc);
            }
        }
    }
}

template <typename T>
void warp_backward(const T* D, int d, const WarpPose& pose, const T* g, int L, T* dD,
                   double* dt_x, double* dt_y, double* dalpha, bool parallel) {
    std::vector<double> row_tx(L, 0.0), row_ty(L, 0.0), row_ta(L, 0.0);

    // Pose gradients: per-row partials in parallel, rows reduced in order.
#pragma omp parallel for schedule(static) if (parallel)
    for (int yb = 0; yb < L; ++yb) {
        double ptx = 0.0, pty = 0.0, pta = 0.0;
        for (int xb = 0; xb < L; ++xb) {
            const GridPoint p = map_point(xb, yb, pose, L);
            const int x0 = static_cast<int>(std::floor(p.xd));
            const int y0 = static_cast<int>(std::floor(p.yd));
            const double fx = p.xd - x0, fy = p.yd - y0;
            const double wx[2] = {1.0 - fx, fx};
            const double wy[2] = {1.0 - fy, fy};
            const T* gv = g + (static_cast<std::size_t>(yb) * L + xb) * 3;
            for (int c = 0; c < 3; ++c) {
                const double gc = static_cast<double>(gv[c]);
                if (gc == 0.0) continue;
                double node[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
                for (int j = 0; j < 2; ++j) {
                    const int ny = y0 + j;
                    if (ny < 0 || ny >= d) continue;
                    for (int i = 0; i < 2; ++i) {
                        const int nx = x0 + i;
                        if (nx < 0 || nx >= d) continue;
                        node[j][i] = static_cast<double>(
                            D[(static_cast<std::size_t>(ny) * d + nx) * 3 + c]);
                    }
                }
                const double slope_x = wy[0] * (node[0][1] - node[0][0]) +
                                       wy[1] * (node[1][1] - node[1][0]);
                const double slope_y = wx[0] * (node[1][0] - node[0][0]) +
                                       wx[1] * (node[1][1] - node[0][1]);
                ptx += gc * slope_x * pose.s_x;
                pty += gc * slope_y * pose.s_y;
                if (pose.rotate) pta += gc * (slope_x * p.dxd_da + slope_y * p.dyd_da);
            }
        }
        row_tx[yb] = ptx;
        row_ty[yb] = pty;
        row_ta[yb] = pta;
    }
    double tx = 0.0, ty = 0.0, ta = 0.0;
    for (int yb = 0; yb < L; ++yb) {
        tx += row_tx[yb];
        ty += row_ty[yb];
        ta += row_ta[yb];
    }
    *dt_x = tx;
    *dt_y = ty;
    *dalpha = pose.rotate ? ta * (kPi / 180.0) : 0.0;

    // Raster gradient: serial scatter (adjacent output pixels share nodes).
    for (int yb = 0; yb < L; ++yb) {
        for (int xb = 0; xb < L; ++xb) {
            const GridPoint p = map_point(xb, yb, pose, L);
            const int x0 = static_cast<int>(std::floor(p.xd));
            const int y0 = static_cast<int>(std::floor(p.yd));
            const double fx = p.xd - x0, fy = p.yd - y0;
            const double wx[2] = {1.0 - fx, fx};
            const double wy[2] = {1.0 - fy, fy};
            const T* gv = g + (static_cast<std::size_t>(yb) * L + xb) * 3;
            for (int j = 0; j < 2; ++j) {
                const int ny = y0 + j;
                if (ny < 0 || ny >= d) continue;
                for (int i = 0; i < 2; ++i) {
                    const int nx = x0 + i;
                    if (nx < 0 || nx >= d) continue;
                    const double w = wx[i] * wy[j];
                    if (w == 0.0) continue;
                    T* slot = dD + (static_cast<std::size_t>(ny) * d + nx) * 3;
                    for (int c = 0; c < 3; ++c)
                        slot[c] += static_cast<T>(w * static_cast<double>(gv[c]));
                }
            }
        }
    }
}

template <typename T>
double reduce_sq_diff(const T* a, const T* b, std::size_t n, bool parallel) {
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<double> partial(chunks, 0.0);
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(chunks); ++k) {
        const std::size_t lo = static_cast<std::size_t>(k) * kChunk;
        const std::size_t hi = std::min(n, lo + kChunk);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double r = static_cast<double>(a[i]) - static_cast<double>(b[i]);
            acc += r * r;
        }
        partial[static_cast<std::size_t>(k)] = acc;
    }
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

template void linear_forward<float>(const float*, const float*, const float*, float*, int, int,
                                    int, bool);
template void linear_forward<double>(const double*, const double*, const double*, double*, int,
                                     int, int, bool);
template void linear_backward_data<float>(const float*, const float*, float*, int, int, int,
                                          bool);
template void linear_backward_data<double>(const double*, const double*, double*, int, int, int,
                                           bool);
template void linear_param_grad<float>(const float*, const float*, float*, float*, int, int, int,
                                       bool);
template void linear_param_grad<double>(const double*, const double*, double*, double*, int, int,
                                        int, bool);
template void warp_forward<float>(const float*, int, const WarpPose&, float*, int, bool);
template void warp_forward<double>(const double*, int, const WarpPose&, double*, int, bool);
template void warp_backward<float>(const float*, int, const WarpPose&, const float*, int, float*,
                                   double*, double*, double*, bool);
template void warp_backward<double>(const double*, int, const WarpPose&, const double*, int,
                                    double*, double*, double*, double*, bool);
template double reduce_sq_diff<float>(const float*, const float*, std::size_t, bool);
template double reduce_sq_diff<double>(const double*, const double*, std::size_t, bool);

} // namespace dsa::kernels
