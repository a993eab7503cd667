#pragma once

#include <cstddef>

namespace autotune::nn {

enum class Backend { serial, openmp };

// Process-wide kernel backend. Defaults to openmp when compiled with OpenMP;
// overridable via AUTOTUNE_KERNELS=serial|openmp or set_backend().
Backend backend();
void set_backend(Backend b);

struct ConvDims {
  int batch = 0;
  int cin = 0, h = 0, w = 0;
  int cout = 0, k = 0;
  int stride = 1, pad = 0;

  int hout() const { return (h + 2 * pad - k) / stride + 1; }
  int wout() const { return (w + 2 * pad - k) / stride + 1; }
};

// Every kernel exists twice: kernels::serial is the plain reference used by
// tests, kernels::omp the parallel version. Both keep identical per-output
// accumulation order, so results match bitwise.
//
// Layouts: conv input [B,Cin,H,W], weight [Cout,Cin,K,K], output [B,Cout,Ho,Wo];
// dense input [B,I], weight [O,I], output [B,O].
#define AUTOTUNE_KERNEL_DECLS                                                              \
  template <class T>                                                                       \
  void conv2d_forward(const T* in, const T* w, const T* bias, T* out, const ConvDims& d); \
  template <class T>                                                                       \
  void conv2d_backward_input(const T* dout, const T* w, T* din, const ConvDims& d);       \
  template <class T>                                                                       \
  void conv2d_backward_params(const T* dout, const T* in, T* dw, T* dbias,                \
                              const ConvDims& d);                                          \
  template <class T>                                                                       \
  void dense_forward(const T* in, const T* w, const T* bias, T* out, int B, int I, int O); \
  template <class T>                                                                       \
  void dense_backward_input(const T* dout, const T* w, T* din, int B, int I, int O);      \
  template <class T>                                                                       \
  void dense_backward_params(const T* dout, const T* in, T* dw, T* dbias, int B, int I,   \
                             int O);                                                       \
  template <class T>                                                                       \
  void relu_forward(const T* in, T* out, size_t n);                                        \
  template <class T>                                                                       \
  void relu_backward(const T* dout, const T* in, T* din, size_t n);                        \
  template <class T>                                                                       \
  void adam_update(T* p, const T* g, T* m, T* v, size_t n, double lr, double beta1,        \
                   double beta2, double eps, long step);

namespace kernels {
namespace serial {
AUTOTUNE_KERNEL_DECLS
}
namespace omp {
AUTOTUNE_KERNEL_DECLS
}
// Dispatchers honoring backend().
AUTOTUNE_KERNEL_DECLS
}  // namespace kernels

#undef AUTOTUNE_KERNEL_DECLS

}  // namespace autotune::nn
