#pragma once

// Shared helpers for the test binaries: scratch directories and the
// finite-difference gradient probe used to validate the autodiff engine.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "petseg/graph.hpp"
#include "petseg/rng.hpp"
#include "petseg/tensor.hpp"

namespace testutil {

/// Self-deleting scratch directory under the system temp path.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    path = std::filesystem::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path / name).string(); }
};

/// Max relative error between analytic gradients and central finite
/// differences, sampled at `probes` random coordinates of the `wrt` tensors.
/// `loss_fn` must rebuild the scalar loss from the current tensor values on
/// every call. Error is normalized by max(1, |analytic|, |numeric|).
inline double max_grad_rel_err(const std::function<petseg::TensorPtr<double>(petseg::Graph<double>&)>& loss_fn,
                               const std::vector<petseg::TensorPtr<double>>& wrt, int probes,
                               petseg::Rng& rng) {
  petseg::Graph<double> g;
  auto loss = loss_fn(g);
  for (const auto& t : wrt) t->zero_grad();  // discard grads from earlier checks
  g.backward(loss);

  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const auto& t = wrt[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(wrt.size()) - 1))];
    const int64_t i = rng.uniform_int(0, t->numel() - 1);
    const double x0 = t->data[static_cast<size_t>(i)];
    const double h = 1e-6 * std::max(1.0, std::abs(x0));

    petseg::Graph<double> silent(false);
    t->data[static_cast<size_t>(i)] = x0 + h;
    const double fp = loss_fn(silent)->data[0];
    t->data[static_cast<size_t>(i)] = x0 - h;
    const double fm = loss_fn(silent)->data[0];
    t->data[static_cast<size_t>(i)] = x0;

    const double fd = (fp - fm) / (2.0 * h);
    const double an = t->has_grad() ? t->grad[static_cast<size_t>(i)] : 0.0;
    const double err = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
    worst = std::max(worst, err);
  }
  return worst;
}

inline std::vector<double> random_values(size_t n, petseg::Rng& rng, double sigma = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, sigma);
  return v;
}

}  // namespace testutil
