#pragma once

#include "tabanno/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tabanno::kernels {

enum class Backend { Serial, Parallel };

// Process-wide backend switch. Every kernel computes each output row
// independently with a fixed inner summation order, so Serial and Parallel
// produce bit-identical results; Parallel only distributes rows over threads.
Backend backend();
void set_backend(Backend b);

int num_threads();
void set_num_threads(int n);

template <class F>
inline void parallel_for(int n, F&& f) {
#ifdef _OPENMP
    if (backend() == Backend::Parallel && n > 1) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
#endif
    for (int i = 0; i < n; ++i) f(i);
}

// C(m x n) = A(m x k) * B(k x n)
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
// C(m x n) = A(m x k) * B(n x k)^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
// C(m x n) += A(p x m)^T * B(p x n)
void matmul_tn_acc(const double* a, const double* b, double* c, int p, int m, int n);

// Y(p x n) = X(p x m) * W(m x n) + bias(n)
void linear_forward(const Matrix& x, const Matrix& w, const Matrix& bias, Matrix& y);
// dX = dY * W^T; dW += X^T * dY; db += column sums of dY
void linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dx, Matrix& dw,
                     Matrix& db);

// Row-wise softmax over the key positions listed in `valid` (others get 0).
void softmax_rows_masked(Matrix& scores, const std::vector<int>& valid);

// LayerNorm over the last dimension. mean/rstd are per-row stats saved for
// the backward pass.
void layernorm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, Matrix& y,
                       std::vector<double>& mean, std::vector<double>& rstd);
void layernorm_backward(const Matrix& x, const Matrix& gamma, const std::vector<double>& mean,
                        const std::vector<double>& rstd, const Matrix& dy, Matrix& dx,
                        Matrix& dgamma, Matrix& dbeta);

// GELU (tanh approximation), elementwise.
void gelu_forward(const Matrix& x, Matrix& y);
void gelu_backward(const Matrix& x, const Matrix& dy, Matrix& dx);

void add_inplace(Matrix& dst, const Matrix& src);

}  // namespace tabanno::kernels
