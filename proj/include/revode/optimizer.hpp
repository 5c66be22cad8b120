#pragma once

#include <cstdint>
#include <span>

#include "revode/vec.hpp"

namespace revode {

struct AdamWConfig {
    double lr = 1e-2;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// AdamW with decoupled weight decay, applied multiplicatively before the
// bias-corrected moment update.
class AdamW {
  public:
    AdamW(std::size_t n_params, AdamWConfig cfg);

    void update(std::span<double> params, std::span<const double> grads);

    std::int64_t step_count() const { return step_; }
    const Vec& first_moment() const { return m_; }
    const Vec& second_moment() const { return v_; }
    const AdamWConfig& config() const { return cfg_; }

  private:
    AdamWConfig cfg_;
    Vec m_;
    Vec v_;
    std::int64_t step_ = 0;
};

}  // namespace revode
