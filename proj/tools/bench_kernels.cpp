// Micro-benchmark comparing the serial reference kernels against the OpenMP
// variants at the shapes the classifier trains with.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "autotune/nn/kernels.hpp"
#include "autotune/rng.hpp"

using autotune::Rng;
using autotune::nn::ConvDims;
namespace ks = autotune::nn::kernels::serial;
namespace ko = autotune::nn::kernels::omp;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

std::vector<float> random_vec(size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

void report(const char* name, double serial_s, double omp_s) {
  std::printf("%-24s serial %8.2f ms   openmp %8.2f ms   speedup %.2fx\n", name,
              serial_s * 1e3, omp_s * 1e3, serial_s / omp_s);
}

}  // namespace

int main() {
  Rng rng(7);
  const int reps = 5;

  {
    // encoder first conv at training batch size
    ConvDims d;
    d.batch = 128;
    d.cin = 30;
    d.h = 32;
    d.w = 32;
    d.cout = 16;
    d.k = 3;
    d.stride = 2;
    d.pad = 1;
    const auto in = random_vec(static_cast<size_t>(d.batch) * d.cin * d.h * d.w, rng);
    const auto w = random_vec(static_cast<size_t>(d.cout) * d.cin * d.k * d.k, rng);
    const auto b = random_vec(d.cout, rng);
    std::vector<float> out(static_cast<size_t>(d.batch) * d.cout * d.hout() * d.wout());
    const double ts = time_best_of(
        reps, [&] { ks::conv2d_forward(in.data(), w.data(), b.data(), out.data(), d); });
    const double to = time_best_of(
        reps, [&] { ko::conv2d_forward(in.data(), w.data(), b.data(), out.data(), d); });
    report("conv2d_forward", ts, to);

    std::vector<float> din(in.size());
    const auto dout = random_vec(out.size(), rng);
    const double ts2 = time_best_of(
        reps, [&] { ks::conv2d_backward_input(dout.data(), w.data(), din.data(), d); });
    const double to2 = time_best_of(
        reps, [&] { ko::conv2d_backward_input(dout.data(), w.data(), din.data(), d); });
    report("conv2d_backward_input", ts2, to2);

    std::vector<float> dw(w.size()), db(b.size());
    const double ts3 = time_best_of(reps, [&] {
      ks::conv2d_backward_params(dout.data(), in.data(), dw.data(), db.data(), d);
    });
    const double to3 = time_best_of(reps, [&] {
      ko::conv2d_backward_params(dout.data(), in.data(), dw.data(), db.data(), d);
    });
    report("conv2d_backward_params", ts3, to3);
  }

  {
    // classifier head layer at training batch size
    const int B = 128, I = 400, O = 400;
    const auto in = random_vec(static_cast<size_t>(B) * I, rng);
    const auto w = random_vec(static_cast<size_t>(O) * I, rng);
    const auto b = random_vec(O, rng);
    std::vector<float> out(static_cast<size_t>(B) * O);
    const double ts = time_best_of(
        reps, [&] { ks::dense_forward(in.data(), w.data(), b.data(), out.data(), B, I, O); });
    const double to = time_best_of(
        reps, [&] { ko::dense_forward(in.data(), w.data(), b.data(), out.data(), B, I, O); });
    report("dense_forward", ts, to);

    const auto dout = random_vec(out.size(), rng);
    std::vector<float> din(in.size()), dw(w.size()), db(b.size());
    const double ts2 = time_best_of(
        reps, [&] { ks::dense_backward_input(dout.data(), w.data(), din.data(), B, I, O); });
    const double to2 = time_best_of(
        reps, [&] { ko::dense_backward_input(dout.data(), w.data(), din.data(), B, I, O); });
    report("dense_backward_input", ts2, to2);

    const double ts3 = time_best_of(reps, [&] {
      ks::dense_backward_params(dout.data(), in.data(), dw.data(), db.data(), B, I, O);
    });
    const double to3 = time_best_of(reps, [&] {
      ko::dense_backward_params(dout.data(), in.data(), dw.data(), db.data(), B, I, O);
    });
    report("dense_backward_params", ts3, to3);
  }

  {
    const size_t n = 1 << 22;
    const auto in = random_vec(n, rng);
    std::vector<float> out(n);
    const double ts = time_best_of(reps, [&] { ks::relu_forward(in.data(), out.data(), n); });
    const double to = time_best_of(reps, [&] { ko::relu_forward(in.data(), out.data(), n); });
    report("relu_forward", ts, to);
  }

  return 0;
}
