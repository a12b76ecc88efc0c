#include "tabanno/kernels.hpp"

#include <cassert>
#include <cmath>

namespace tabanno::kernels {

namespace {
Backend g_backend = Backend::Parallel;
int g_threads = 0;  // 0 = OpenMP default
}  // namespace

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

int num_threads() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

void set_num_threads(int n) {
    g_threads = n;
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
    parallel_for(m, [&](int i) {
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a + static_cast<size_t>(i) * k;
        for (int l = 0; l < k; ++l) {
            double av = ai[l];
            const double* bl = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    });
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    parallel_for(m, [&](int i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int l = 0; l < k; ++l) s += ai[l] * bj[l];
            ci[j] = s;
        }
    });
}

void matmul_tn_acc(const double* a, const double* b, double* c, int p, int m, int n) {
    parallel_for(m, [&](int i) {
        double* ci = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < p; ++l) {
            double av = a[static_cast<size_t>(l) * m + i];
            const double* bl = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    });
}

void linear_forward(const Matrix& x, const Matrix& w, const Matrix& bias, Matrix& y) {
    assert(x.cols == w.rows && bias.cols == w.cols);
    y = Matrix(x.rows, w.cols);
    matmul(x.data.data(), w.data.data(), y.data.data(), x.rows, x.cols, w.cols);
    parallel_for(y.rows, [&](int i) {
        double* yi = y.row(i);
        const double* b = bias.row(0);
        for (int j = 0; j < y.cols; ++j) yi[j] += b[j];
    });
}

void linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dx, Matrix& dw,
                     Matrix& db) {
    assert(dw.same_shape(w) && db.cols == w.cols);
    dx = Matrix(x.rows, x.cols);
    matmul_nt(dy.data.data(), w.data.data(), dx.data.data(), dy.rows, dy.cols, w.rows);
    matmul_tn_acc(x.data.data(), dy.data.data(), dw.data.data(), x.rows, x.cols, dy.cols);
    parallel_for(db.cols, [&](int j) {
        double s = 0.0;
        for (int i = 0; i < dy.rows; ++i) s += dy.at(i, j);
        db.at(0, j) += s;
    });
}

void softmax_rows_masked(Matrix& scores, const std::vector<int>& valid) {
    parallel_for(scores.rows, [&](int i) {
        double* r = scores.row(i);
        double mx = -INFINITY;
        for (int j : valid) mx = std::max(mx, r[j]);
        double sum = 0.0;
        for (int j : valid) sum += std::exp(r[j] - mx);
        double inv = 1.0 / sum;
        int vi = 0;
        for (int j = 0; j < scores.cols; ++j) {
            if (vi < static_cast<int>(valid.size()) && valid[vi] == j) {
                r[j] = std::exp(r[j] - mx) * inv;
                ++vi;
            } else {
                r[j] = 0.0;
            }
        }
    });
}

namespace {
constexpr double kLnEps = 1e-5;
}

void layernorm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, Matrix& y,
                       std::vector<double>& mean, std::vector<double>& rstd) {
    int d = x.cols;
    y = Matrix(x.rows, d);
    mean.assign(x.rows, 0.0);
    rstd.assign(x.rows, 0.0);
    parallel_for(x.rows, [&](int i) {
        const double* xi = x.row(i);
        double m = 0.0;
        for (int j = 0; j < d; ++j) m += xi[j];
        m /= d;
        double v = 0.0;
        for (int j = 0; j < d; ++j) {
            double dlt = xi[j] - m;
            v += dlt * dlt;
        }
        v /= d;
        double rs = 1.0 / std::sqrt(v + kLnEps);
        mean[i] = m;
        rstd[i] = rs;
        double* yi = y.row(i);
        const double* g = gamma.row(0);
        const double* b = beta.row(0);
        for (int j = 0; j < d; ++j) yi[j] = g[j] * ((xi[j] - m) * rs) + b[j];
    });
}

void layernorm_backward(const Matrix& x, const Matrix& gamma, const std::vector<double>& mean,
                        const std::vector<double>& rstd, const Matrix& dy, Matrix& dx,
                        Matrix& dgamma, Matrix& dbeta) {
    int d = x.cols;
    dx = Matrix(x.rows, d);
    parallel_for(x.rows, [&](int i) {
        const double* xi = x.row(i);
        const double* dyi = dy.row(i);
        const double* g = gamma.row(0);
        double m = mean[i], rs = rstd[i];
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
            double xhat = (xi[j] - m) * rs;
            double dxhat = dyi[j] * g[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        double* dxi = dx.row(i);
        for (int j = 0; j < d; ++j) {
            double xhat = (xi[j] - m) * rs;
            double dxhat = dyi[j] * g[j];
            dxi[j] = rs * (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d);
        }
    });
    // dgamma/dbeta accumulate over rows; parallel over columns keeps writes disjoint.
    parallel_for(d, [&](int j) {
        double sg = 0.0, sb = 0.0;
        for (int i = 0; i < x.rows; ++i) {
            double xhat = (x.at(i, j) - mean[i]) * rstd[i];
            sg += dy.at(i, j) * xhat;
            sb += dy.at(i, j);
        }
        dgamma.at(0, j) += sg;
        dbeta.at(0, j) += sb;
    });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

void gelu_forward(const Matrix& x, Matrix& y) {
    y = Matrix(x.rows, x.cols);
    parallel_for(x.rows, [&](int i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        for (int j = 0; j < x.cols; ++j) {
            double v = xi[j];
            double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
            yi[j] = 0.5 * v * (1.0 + t);
        }
    });
}

void gelu_backward(const Matrix& x, const Matrix& dy, Matrix& dx) {
    dx = Matrix(x.rows, x.cols);
    parallel_for(x.rows, [&](int i) {
        const double* xi = x.row(i);
        const double* dyi = dy.row(i);
        double* dxi = dx.row(i);
        for (int j = 0; j < x.cols; ++j) {
            double v = xi[j];
            double u = kGeluC * (v + kGeluA * v * v * v);
            double t = std::tanh(u);
            double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            double grad = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
            dxi[j] = dyi[j] * grad;
        }
    });
}

void add_inplace(Matrix& dst, const Matrix& src) {
    assert(dst.same_shape(src));
    parallel_for(dst.rows, [&](int i) {
        double* d = dst.row(i);
        const double* s = src.row(i);
        for (int j = 0; j < dst.cols; ++j) d[j] += s[j];
    });
}

}  // namespace tabanno::kernels
