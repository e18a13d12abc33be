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

#include "dwarf/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace dwarf {

std::string Shape::str() const {
    std::ostringstream os;
    os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
    return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;

void check_shape(const Shape& s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw ShapeError("negative extent in shape " + s.str());
}
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    check_shape(shape);
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->shape = shape;
    impl->data.assign(static_cast<size_t>(shape.numel()), value);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
    check_shape(shape);
    if (static_cast<int64_t>(values.size()) != shape.numel()) {
        throw ShapeError("tensor of shape " + shape.str() + " needs " + std::to_string(shape.numel()) +
                         " values, got " + std::to_string(values.size()));
    }
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->shape = shape;
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return full({1, 1, 1, 1}, value, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
    return impl_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return from(shape(), impl_->data, false);
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values, const char* name, std::vector<Tensor<T>> inputs,
                      std::function<void(const TensorImpl<T>&)> backward_fn) {
    auto out = Tensor<T>::from(shape, std::move(values));
    if (!grad_enabled()) return out;
    bool needs = false;
    for (const auto& in : inputs) needs = needs || (in.defined() && in.requires_grad());
    if (!needs) return out;
    auto fn = std::make_shared<GradFn<T>>();
    fn->name = name;
    fn->inputs = std::move(inputs);
    fn->backward = std::move(backward_fn);
    out.impl()->grad_fn = std::move(fn);
    out.impl()->requires_grad = true;
    return out;
}

template <typename T>
std::vector<TensorImpl<T>*> topological_order(const Tensor<T>& root) {
    std::vector<TensorImpl<T>*> order;
    std::unordered_set<TensorImpl<T>*> seen;
    // Iterative post-order DFS; graphs can be a few thousand nodes deep.
    std::vector<std::pair<TensorImpl<T>*, size_t>> stack;
    stack.emplace_back(root.impl(), 0);
    seen.insert(root.impl());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        const auto& fn = node->grad_fn;
        if (fn && next < fn->inputs.size()) {
            TensorImpl<T>* child = fn->inputs[next++].impl();
            if (child && child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
            continue;
        }
        order.push_back(node);
        stack.pop_back();
    }
    return order;
}

template <typename T>
void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " + (loss.defined() ? loss.shape().str() : "<undefined>"));
    }
    if (!loss.requires_grad()) return;
    auto order = topological_order(loss);
    loss.impl()->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl<T>* node = *it;
        if (node->grad_fn && !node->grad.empty()) node->grad_fn->backward(*node);
    }
}

template class Tensor<float>;
template class Tensor<double>;

template Tensor<float> make_result(Shape, std::vector<float>, const char*, std::vector<Tensor<float>>,
                                   std::function<void(const TensorImpl<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, const char*, std::vector<Tensor<double>>,
                                    std::function<void(const TensorImpl<double>&)>);
template std::vector<TensorImpl<float>*> topological_order(const Tensor<float>&);
template std::vector<TensorImpl<double>*> topological_order(const Tensor<double>&);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace dwarf
