#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "revode/vec.hpp"

namespace revode {

// One named tensor inside a flat parameter vector.
struct TensorSpec {
    std::string name;
    std::vector<std::size_t> dims;

    std::size_t size() const;
};

// Flat float64 parameter vector plus a shape descriptor mapping contiguous
// slices to named tensors. The flat layout is the storage of record; views
// are spans into it, so flatten(unflatten(p)) is the identity bit for bit.
class Params {
  public:
    Params() = default;
    Params(std::vector<TensorSpec> shape, Vec values);

    static Params zeros(std::vector<TensorSpec> shape);

    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    const Vec& values() const { return values_; }
    Vec& values() { return values_; }

    const std::vector<TensorSpec>& shape() const { return shape_; }

    std::span<const double> view(std::string_view tensor_name) const;
    std::span<double> view(std::string_view tensor_name);

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    // File pair `<prefix>.params.bin` (little-endian float64) and
    // `<prefix>.params.json` (shape descriptor).
    void save(const std::string& path_prefix) const;
    static Params load(const std::string& path_prefix);

  private:
    std::size_t offset_of(std::string_view tensor_name) const;

    std::vector<TensorSpec> shape_;
    std::vector<std::size_t> offsets_;
    Vec values_;
};

}  // namespace revode
