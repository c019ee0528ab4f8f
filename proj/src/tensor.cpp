#include "meshpose/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace meshpose {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

static void check_shape(const Shape& s) {
  for (int64_t d : s) {
    if (d <= 0) throw std::invalid_argument("tensor shape must be positive, got " + shape_str(s));
  }
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_ = std::make_shared<std::vector<double>>(size_t(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  check_shape(shape_);
  if (int64_t(data.size()) != shape_numel(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape_));
  }
  data_ = std::make_shared<std::vector<double>>(std::move(data));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data_->begin(), t.data_->end(), v);
  return t;
}

double* Tensor::mut() {
  if (!data_) throw std::logic_error("mut() on undefined tensor");
  if (data_.use_count() > 1) data_ = std::make_shared<std::vector<double>>(*data_);
  return data_->data();
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  if (idx.size() != shape_.size()) throw std::invalid_argument("index rank mismatch");
  int64_t flat = 0;
  size_t k = 0;
  for (int64_t i : idx) {
    if (i < 0 || i >= shape_[k]) throw std::out_of_range("tensor index out of range");
    flat = flat * shape_[k] + i;
    ++k;
  }
  return (*data_)[size_t(flat)];
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() requires a 1-element tensor, got " + shape_str(shape_));
  return (*data_)[0];
}

bool Tensor::all_finite() const {
  for (double v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace meshpose
