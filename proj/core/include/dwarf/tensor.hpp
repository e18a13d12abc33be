// Copyright 2026 The dwarf-sceneflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwarf {

/// NCHW extents. Width is the fastest-varying dimension.
struct Shape {
    int64_t n = 0;
    int64_t c = 0;
    int64_t h = 0;
    int64_t w = 0;

    constexpr int64_t numel() const { return n * c * h * w; }
    constexpr int64_t plane() const { return h * w; }
    constexpr bool spatially_equal(const Shape& o) const { return n == o.n && h == o.h && w == o.w; }
    constexpr bool operator==(const Shape&) const = default;
    std::string str() const;
};

class ShapeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

template <typename T>
class Tensor;

template <typename T>
struct TensorImpl;

/// Backward closure of one recorded operation. It receives the finished
/// output (value and gradient) and accumulates into its inputs.
template <typename T>
struct GradFn {
    const char* name = "";
    std::vector<Tensor<T>> inputs;
    std::function<void(const TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    std::shared_ptr<GradFn<T>> grad_fn;

    /// Allocates a zero gradient buffer on first use.
    std::vector<T>& grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

/// Shared handle to a dense NCHW array plus its place in the autograd graph.
/// Copies alias the same storage, like a framework tensor.
template <typename T>
class Tensor {
   public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int64_t numel() const { return impl_->shape.numel(); }

    std::span<T> data() { return impl_->data; }
    std::span<const T> data() const { return impl_->data; }
    T* ptr() { return impl_->data.data(); }
    const T* ptr() const { return impl_->data.data(); }

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    std::span<const T> grad() const { return impl_->grad; }
    std::span<T> grad() { return impl_->grad_buffer(); }
    void zero_grad() { impl_->grad.clear(); }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        impl_->requires_grad = on;
        return *this;
    }

    T item() const;
    T& at(int64_t n, int64_t c, int64_t y, int64_t x) {
        const Shape& s = impl_->shape;
        return impl_->data[((n * s.c + c) * s.h + y) * s.w + x];
    }
    T at(int64_t n, int64_t c, int64_t y, int64_t x) const {
        const Shape& s = impl_->shape;
        return impl_->data[((n * s.c + c) * s.h + y) * s.w + x];
    }

    /// Fresh leaf with a copy of the values and no history.
    Tensor detach() const;
    Tensor clone() const { return detach(); }

    TensorImpl<T>* impl() const { return impl_.get(); }
    const std::shared_ptr<GradFn<T>>& grad_fn() const { return impl_->grad_fn; }

    bool same_storage(const Tensor& o) const { return impl_ == o.impl_; }

    static Tensor wrap(std::shared_ptr<TensorImpl<T>> impl) { return Tensor(std::move(impl)); }

   private:
    explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl<T>> impl_;
};

/// Whether new operations record history. Thread-local.
bool grad_enabled();

class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool previous_;
};

/// Creates the output of an operation and wires its backward closure when any
/// input requires a gradient and recording is enabled.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values, const char* name, std::vector<Tensor<T>> inputs,
                      std::function<void(const TensorImpl<T>&)> backward);

/// Topological order of the graph rooted at `root` (inputs before consumers).
template <typename T>
std::vector<TensorImpl<T>*> topological_order(const Tensor<T>& root);

/// Reverse-mode sweep from a scalar. Gradients accumulate into every
/// reachable tensor that requires them.
template <typename T>
void backward(const Tensor<T>& loss);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace dwarf
