#include "rsum/optimizer.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "rsum/error.hpp"

namespace rsum::rl {

AdamW::AdamW(std::size_t n_params, Options options)
    : options_(options), m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw InvalidArgument("optimizer state does not match parameter count");
  ++t_;
  const double lr = options_.learning_rate;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double decay = 1.0 - lr * options_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] *= decay;
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + options_.epsilon);
  }
}

void AdamW::save(std::ostream& out) const {
  const std::uint64_t n = m_.size();
  out.write(reinterpret_cast<const char*>(&t_), sizeof t_);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(m_.data()), static_cast<std::streamsize>(n * sizeof(double)));
  out.write(reinterpret_cast<const char*>(v_.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!out) throw IoError("failed to write optimizer state");
}

void AdamW::load(std::istream& in) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&t_), sizeof t_);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n != m_.size()) throw IoError("optimizer state does not match parameter count");
  in.read(reinterpret_cast<char*>(m_.data()), static_cast<std::streamsize>(n * sizeof(double)));
  in.read(reinterpret_cast<char*>(v_.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("truncated optimizer state");
}

}  // namespace rsum::rl
