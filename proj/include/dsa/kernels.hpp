#pragma once

#include <cstddef>

namespace dsa::kernels {

// Numeric kernels behind decoder training and reconstruction. Every kernel
// computes each output element with a fixed summation order that does not
// depend on the thread count, so the OpenMP path is bit-identical to the
// same kernel run serially (parallel = false). The *_ref variants in
// kernels_ref.cpp are naive single-loop implementations kept as oracles for
// testing and for the serial-vs-parallel benchmark.

/// Y[i][r] = sum_c X[i][c] * W[r][c] + b[r].
/// W is row-major (rows x cols), X is (n x cols), Y is (n x rows).
template <typename T>
void linear_forward(const T* W, const T* b, const T* X, T* Y, int n, int rows, int cols,
                    bool parallel);

/// dX[i][c] = sum_r dY[i][r] * WT[c][r]; WT is W transposed, (cols x rows).
template <typename T>
void linear_backward_data(const T* WT, const T* dY, T* dX, int n, int rows, int cols,
                          bool parallel);

/// dW[r][c] = sum_i dY[i][r] * X[i][c]; db[r] = sum_i dY[i][r].
/// Batch index i is always accumulated in ascending order.
template <typename T>
void linear_param_grad(const T* X, const T* dY, T* dW, T* db, int n, int rows, int cols,
                       bool parallel);

/// Pose of the sampling grid mapping an L x L output onto a d x d decoder
/// raster: optional rotation by alpha (degrees) about the output-grid
/// center, then x_dec = s_x * (x + t_x), y_dec = s_y * (y + t_y).
struct WarpPose {
    double t_x = 0.0;
    double t_y = 0.0;
    double s_x = 1.0;
    double s_y = 1.0;
    double alpha_deg = 0.0;
    bool rotate = false;
};

/// One bilinear sample of channel c of D (d x d x 3) at raster coordinates
/// (x, y). Nodes outside the raster contribute zero.
double bilinear_sample(const double* D, int d, double x, double y, int c);

/// Bilinear warp of D (d x d x 3, row-major) onto an L x L x 3 output.
/// Coordinates mapping one pixel or more outside the raster sample zero.
template <typename T>
void warp_forward(const T* D, int d, const WarpPose& pose, T* out, int L, bool parallel);

/// Backward of warp_forward for upstream g (L x L x 3): accumulates into
/// dD (d x d x 3, caller-zeroed) and writes pose gradients. The alpha
/// gradient is reported in degrees.
template <typename T>
void warp_backward(const T* D, int d, const WarpPose& pose, const T* g, int L, T* dD,
                   double* dt_x, double* dt_y, double* dalpha, bool parallel);

/// sum_i (a[i] - b[i])^2 accumulated in double over fixed-size chunks, so
/// the result is independent of the thread count.
template <typename T>
double reduce_sq_diff(const T* a, const T* b, std::size_t n, bool parallel);

namespace ref {

/// Direct evaluation of the full bilinear kernel sum: every raster node
/// weighted by max(0, 1-|x-m|) * max(0, 1-|y-n|). Quadratic per sample;
/// testing oracle only.
double bilinear_sample_full(const double* D, int d, double x, double y, int c);

void linear_forward(const double* W, const double* b, const double* X, double* Y, int n,
                    int rows, int cols);
void linear_backward_data(const double* WT, const double* dY, double* dX, int n, int rows,
                          int cols);
void linear_param_grad(const double* X, const double* dY, double* dW, double* db, int n,
                       int rows, int cols);
void warp_forward(const double* D, int d, const WarpPose& pose, double* out, int L);
double reduce_sq_diff(const double* a, const double* b, std::size_t n);

} // namespace ref

} // namespace dsa::kernels
