#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace rsum::rl {

/// Adam with decoupled weight decay:
///   theta <- theta * (1 - lr * wd)
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
class AdamW {
 public:
  struct Options {
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  AdamW() = default;
  AdamW(std::size_t n_params, Options options);

  void step(std::span<double> params, std::span<const double> grad);

  const Options& options() const noexcept { return options_; }
  std::uint64_t steps_taken() const noexcept { return t_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  Options options_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace rsum::rl
