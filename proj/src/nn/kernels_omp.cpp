#include <cmath>
#include <cstddef>

#include "autotune/nn/kernels.hpp"

// OpenMP variants of the reference kernels in kernels_serial.cpp. Every
// parallel loop splits over independent output slices and keeps the reference
// loop structure, so results are bitwise equal to serial at any thread count.

namespace autotune::nn::kernels::omp {

template <class T>
void conv2d_forward(const T* in, const T* w, const T* bias, T* out, const ConvDims& d) {
  const int ho = d.hout(), wo = d.wout();
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < d.batch; ++b) {
    for (int oc = 0; oc < d.cout; ++oc) {
      const T* wbase = w + static_cast<size_t>(oc) * d.cin * d.k * d.k;
      for (int oy = 0; oy < ho; ++oy) {
        T* out_row = out + ((static_cast<size_t>(b) * d.cout + oc) * ho + oy) * wo;
        for (int ox = 0; ox < wo; ++ox) out_row[ox] = bias[oc];
        const int iy0 = oy * d.stride - d.pad;
        for (int ic = 0; ic < d.cin; ++ic) {
          const T* iplane = in + ((static_cast<size_t>(b) * d.cin + ic) * d.h) * d.w;
          const T* wrow = wbase + static_cast<size_t>(ic) * d.k * d.k;
          for (int ky = 0; ky < d.k; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= d.h) continue;
            const T* in_row = iplane + static_cast<size_t>(iy) * d.w;
            for (int kx = 0; kx < d.k; ++kx) {
              const T wv = wrow[ky * d.k + kx];
              const int off = kx - d.pad;
              int lo = 0;
              while (lo * d.stride + off < 0) ++lo;
              int hi = wo;
              while (hi > lo && (hi - 1) * d.stride + off >= d.w) --hi;
              for (int ox = lo; ox < hi; ++ox)
                out_row[ox] += wv * in_row[ox * d.stride + off];
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_input(const T* dout, const T* w, T* din, const ConvDims& d) {
  const int ho = d.hout(), wo = d.wout();
#pragma omp parallel for schedule(static)
  for (int b = 0; b < d.batch; ++b) {
    T* dslab = din + static_cast<size_t>(b) * d.cin * d.h * d.w;
    for (size_t i = 0; i < static_cast<size_t>(d.cin) * d.h * d.w; ++i) dslab[i] = T(0);
    for (int oc = 0; oc < d.cout; ++oc) {
      const T* wbase = w + static_cast<size_t>(oc) * d.cin * d.k * d.k;
      const T* obase = dout + ((static_cast<size_t>(b) * d.cout + oc) * ho) * wo;
      for (int oy = 0; oy < ho; ++oy) {
        const int iy0 = oy * d.stride - d.pad;
        for (int ox = 0; ox < wo; ++ox) {
          const T g = obase[static_cast<size_t>(oy) * wo + ox];
          const int ix0 = ox * d.stride - d.pad;
          for (int ic = 0; ic < d.cin; ++ic) {
            T* dplane = dslab + (static_cast<size_t>(ic) * d.h) * d.w;
            const T* wrow = wbase + static_cast<size_t>(ic) * d.k * d.k;
            for (int ky = 0; ky < d.k; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= d.h) continue;
              for (int kx = 0; kx < d.k; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= d.w) continue;
                dplane[static_cast<size_t>(iy) * d.w + ix] += g * wrow[ky * d.k + kx];
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_params(const T* dout, const T* in, T* dw, T* dbias, const ConvDims& d) {
  const int ho = d.hout(), wo = d.wout();
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < d.cout; ++oc) {
    T* dwbase = dw + static_cast<size_t>(oc) * d.cin * d.k * d.k;
    T bias_acc = T(0);
    for (int b = 0; b < d.batch; ++b) {
      const T* obase = dout + ((static_cast<size_t>(b) * d.cout + oc) * ho) * wo;
      for (int oy = 0; oy < ho; ++oy) {
        const T* out_row = obase + static_cast<size_t>(oy) * wo;
        const int iy0 = oy * d.stride - d.pad;
        for (int ox = 0; ox < wo; ++ox) bias_acc += out_row[ox];
        for (int ic = 0; ic < d.cin; ++ic) {
          const T* iplane = in + ((static_cast<size_t>(b) * d.cin + ic) * d.h) * d.w;
          T* dwrow = dwbase + static_cast<size_t>(ic) * d.k * d.k;
          for (int ky = 0; ky < d.k; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= d.h) continue;
            const T* in_row = iplane + static_cast<size_t>(iy) * d.w;
            for (int kx = 0; kx < d.k; ++kx) {
              const int off = kx - d.pad;
              int lo = 0;
              while (lo * d.stride + off < 0) ++lo;
              int hi = wo;
              while (hi > lo && (hi - 1) * d.stride + off >= d.w) --hi;
              T acc = T(0);
              for (int ox = lo; ox < hi; ++ox)
                acc += out_row[ox] * in_row[ox * d.stride + off];
              dwrow[ky * d.k + kx] += acc;
            }
          }
        }
      }
    }
    dbias[oc] += bias_acc;
  }
}

template <class T>
void dense_forward(const T* in, const T* w, const T* bias, T* out, int B, int I, int O) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < B; ++b) {
    for (int o = 0; o < O; ++o) {
      const T* irow = in + static_cast<size_t>(b) * I;
      const T* wrow = w + static_cast<size_t>(o) * I;
      T acc = bias[o];
      for (int i = 0; i < I; ++i) acc += irow[i] * wrow[i];
      out[static_cast<size_t>(b) * O + o] = acc;
    }
  }
}

template <class T>
void dense_backward_input(const T* dout, const T* w, T* din, int B, int I, int O) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    const T* orow = dout + static_cast<size_t>(b) * O;
    T* drow = din + static_cast<size_t>(b) * I;
    for (int i = 0; i < I; ++i) drow[i] = T(0);
    for (int o = 0; o < O; ++o) {
      const T g = orow[o];
      const T* wrow = w + static_cast<size_t>(o) * I;
      for (int i = 0; i < I; ++i) drow[i] += g * wrow[i];
    }
  }
}

template <class T>
void dense_backward_params(const T* dout, const T* in, T* dw, T* dbias, int B, int I, int O) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < O; ++o) {
    T* dwrow = dw + static_cast<size_t>(o) * I;
    T bias_acc = T(0);
    for (int b = 0; b < B; ++b) {
      const T g = dout[static_cast<size_t>(b) * O + o];
      bias_acc += g;
      const T* irow = in + static_cast<size_t>(b) * I;
      for (int i = 0; i < I; ++i) dwrow[i] += g * irow[i];
    }
    dbias[o] += bias_acc;
  }
}

template <class T>
void relu_forward(const T* in, T* out, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <class T>
void relu_backward(const T* dout, const T* in, T* din, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    din[i] = in[i] > T(0) ? dout[i] : T(0);
}

template <class T>
void adam_update(T* p, const T* g, T* m, T* v, size_t n, double lr, double beta1, double beta2,
                 double eps, long step) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
    const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * mhat / (std::sqrt(vhat) + eps));
  }
}

#define AUTOTUNE_INSTANTIATE(T)                                                               \
  template void conv2d_forward<T>(const T*, const T*, const T*, T*, const ConvDims&);         \
  template void conv2d_backward_input<T>(const T*, const T*, T*, const ConvDims&);            \
  template void conv2d_backward_params<T>(const T*, const T*, T*, T*, const ConvDims&);       \
  template void dense_forward<T>(const T*, const T*, const T*, T*, int, int, int);            \
  template void dense_backward_input<T>(const T*, const T*, T*, int, int, int);               \
  template void dense_backward_params<T>(const T*, const T*, T*, T*, int, int, int);          \
  template void relu_forward<T>(const T*, T*, size_t);                                        \
  template void relu_backward<T>(const T*, const T*, T*, size_t);                             \
  template void adam_update<T>(T*, const T*, T*, T*, size_t, double, double, double, double, \
                               long);

AUTOTUNE_INSTANTIATE(float)
AUTOTUNE_INSTANTIATE(double)
#undef AUTOTUNE_INSTANTIATE

}  // namespace autotune::nn::kernels::omp
