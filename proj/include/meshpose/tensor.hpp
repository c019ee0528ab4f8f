#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace meshpose {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Dense row-major tensor of 64-bit floats. Copies share the underlying
// buffer; mut() detaches when the buffer is shared, so a tensor recorded on
// a tape stays frozen even if the optimizer later updates the parameter it
// came from.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor full(Shape shape, double v);

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return data_ ? int64_t(data_->size()) : 0; }
  bool defined() const { return data_ != nullptr; }

  const double* data() const { return data_->data(); }
  double* mut();

  double at(std::initializer_list<int64_t> idx) const;
  double item() const;  // value of a 1-element tensor

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
};

}  // namespace meshpose
