#include "autotune/nn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace autotune::nn {

namespace {

Backend initial_backend() {
#ifdef _OPENMP
  Backend b = Backend::openmp;
#else
  Backend b = Backend::serial;
#endif
  if (const char* env = std::getenv("AUTOTUNE_KERNELS")) {
    if (std::strcmp(env, "serial") == 0) b = Backend::serial;
    if (std::strcmp(env, "openmp") == 0) b = Backend::openmp;
  }
  return b;
}

std::atomic<Backend> g_backend{initial_backend()};

}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

namespace kernels {

template <class T>
void conv2d_forward(const T* in, const T* w, const T* bias, T* out, const ConvDims& d) {
  if (backend() == Backend::openmp)
    omp::conv2d_forward(in, w, bias, out, d);
  else
    serial::conv2d_forward(in, w, bias, out, d);
}

template <class T>
void conv2d_backward_input(const T* dout, const T* w, T* din, const ConvDims& d) {
  if (backend() == Backend::openmp)
    omp::conv2d_backward_input(dout, w, din, d);
  else
    serial::conv2d_backward_input(dout, w, din, d);
}

template <class T>
void conv2d_backward_params(const T* dout, const T* in, T* dw, T* dbias, const ConvDims& d) {
  if (backend() == Backend::openmp)
    omp::conv2d_backward_params(dout, in, dw, dbias, d);
  else
    serial::conv2d_backward_params(dout, in, dw, dbias, d);
}

template <class T>
void dense_forward(const T* in, const T* w, const T* bias, T* out, int B, int I, int O) {
  if (backend() == Backend::openmp)
    omp::dense_forward(in, w, bias, out, B, I, O);
  else
    serial::dense_forward(in, w, bias, out, B, I, O);
}

template <class T>
void dense_backward_input(const T* dout, const T* w, T* din, int B, int I, int O) {
  if (backend() == Backend::openmp)
    omp::dense_backward_input(dout, w, din, B, I, O);
  else
    serial::dense_backward_input(dout, w, din, B, I, O);
}

template <class T>
void dense_backward_params(const T* dout, const T* in, T* dw, T* dbias, int B, int I, int O) {
  if (backend() == Backend::openmp)
    omp::dense_backward_params(dout, in, dw, dbias, B, I, O);
  else
    serial::dense_backward_params(dout, in, dw, dbias, B, I, O);
}

template <class T>
void relu_forward(const T* in, T* out, size_t n) {
  if (backend() == Backend::openmp)
    omp::relu_forward(in, out, n);
  else
    serial::relu_forward(in, out, n);
}

template <class T>
void relu_backward(const T* dout, const T* in, T* din, size_t n) {
  if (backend() == Backend::openmp)
    omp::relu_backward(dout, in, din, n);
  else
    serial::relu_backward(dout, in, din, n);
}

template <class T>
void adam_update(T* p, const T* g, T* m, T* v, size_t n, double lr, double beta1, double beta2,
                 double eps, long step) {
  if (backend() == Backend::openmp)
    omp::adam_update(p, g, m, v, n, lr, beta1, beta2, eps, step);
  else
    serial::adam_update(p, g, m, v, n, lr, beta1, beta2, eps, step);
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

}  // namespace kernels

}  // namespace autotune::nn
