#pragma once

// Dense tensor with tape-based reverse-mode differentiation. The scalar
// type is a template parameter: float for training, double for gradient
// verification. Values are immutable once an op has consumed them; only
// grad buffers are accumulated into during backward().

#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spotlight::num {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<S>> data;
  std::shared_ptr<std::vector<S>> grad;  // allocated iff requires_grad
  bool requires_grad = false;

  Tensor() = default;

  static std::size_t count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw ShapeError("tensor dimension must be positive, got shape " + shape_str(shape));
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    const std::size_t n = count(shape);
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<S>>(n, S(0));
    t.requires_grad = requires_grad;
    if (requires_grad) t.grad = std::make_shared<std::vector<S>>(n, S(0));
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<S> values,
                     bool requires_grad = false) {
    if (count(shape) != values.size()) {
      throw ShapeError("tensor init: shape " + shape_str(shape) + " expects " +
                       std::to_string(count(shape)) + " elements, got " +
                       std::to_string(values.size()));
    }
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<S>>(std::move(values));
    t.requires_grad = requires_grad;
    if (requires_grad) t.grad = std::make_shared<std::vector<S>>(t.data->size(), S(0));
    return t;
  }

  static Tensor scalar(S v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  std::size_t numel() const { return data ? data->size() : 0; }
  bool is_scalar() const { return numel() == 1; }

  int rows() const {
    if (shape.size() != 2) throw ShapeError("rows(): tensor is not 2-D, shape " + shape_str(shape));
    return shape[0];
  }
  int cols() const {
    if (shape.size() != 2) throw ShapeError("cols(): tensor is not 2-D, shape " + shape_str(shape));
    return shape[1];
  }

  S val(std::size_t i) const { return (*data)[i]; }
  const S* ptr() const { return data->data(); }
  S* mut_ptr() { return data->data(); }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), S(0));
  }
};

// Ordered record of primitive operations. One tape is owned by exactly one
// forward/backward pass; ops record onto the innermost active tape.
template <typename S>
class GradTape {
 public:
  GradTape() : prev_(active_) { active_ = this; }
  ~GradTape() { active_ = prev_; }
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* active() { return active_; }

  void record(std::function<void()> backward_fn) {
    records_.push_back(std::move(backward_fn));
  }

  std::size_t size() const { return records_.size(); }

  // Replays recorded ops once each, in reverse recording order.
  void replay_backward() {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> records_;
  GradTape* prev_ = nullptr;
  inline static thread_local GradTape* active_ = nullptr;
};

// True when the op must record onto the tape.
template <typename S>
inline bool tracked(const Tensor<S>& t) {
  return GradTape<S>::active() != nullptr && t.requires_grad;
}

template <typename S>
inline Tensor<S> make_output(std::vector<int> shape, bool needs_grad) {
  return Tensor<S>::zeros(std::move(shape), needs_grad);
}

template <typename S>
void backward(Tensor<S>& loss) {
  auto* tape = GradTape<S>::active();
  if (tape == nullptr) throw NumericError("backward: no active GradTape");
  if (!loss.is_scalar()) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape));
  }
  if (!loss.requires_grad || !loss.grad) {
    throw NumericError("backward: loss does not require gradients");
  }
  (*loss.grad)[0] = S(1);
  tape->replay_backward();
}

}  // namespace spotlight::num
