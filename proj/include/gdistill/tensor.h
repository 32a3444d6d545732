// gdistill/tensor.h

// Copyright 2026  gdistill authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef GDISTILL_TENSOR_H_
#define GDISTILL_TENSOR_H_

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_set>
#include <vector>

#include "gdistill/common.h"

namespace gdistill {

// Reverse-mode differentiable tensor.
//
// A Tensor is a handle to a graph node holding values, an optional gradient
// buffer, and for op results a backward closure that scatters the node's
// gradient into its parents. The element type is a construction parameter:
// training uses float, gradient tests use double (central finite differences
// are unreliable at 32-bit).
//
// Gradient semantics: Backward() accumulates into existing .grad buffers, so
// repeated backward passes without an intervening ZeroGrad() sum their
// contributions. Optimizer steps must therefore zero gradients explicitly.
//
// Graphs are single-threaded: build and differentiate a graph from one thread.
// Forward-only evaluation of a frozen parameter set is read-only with respect
// to the parameters and may run concurrently across utterances.

template <typename T>
struct TensorImpl {
  std::vector<int64_t> shape;
  std::vector<T> values;
  std::vector<T> grad;  // allocated iff requires_grad, lazily
  bool requires_grad = false;
  uint64_t id = 0;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Scatters this->grad into parents' grads. Null for leaves.
  std::function<void(TensorImpl &)> backward_fn;

  int64_t Numel() const { return static_cast<int64_t>(values.size()); }

  void EnsureGrad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
  }
};

namespace detail {
inline uint64_t NextNodeId() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline int64_t NumelOf(const std::vector<int64_t> &shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw ShapeError(Cat("non-positive dimension in ", ShapeStr(shape)));
    n *= d;
  }
  return n;
}
}  // namespace detail

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor Leaf(std::vector<int64_t> shape, std::vector<T> values,
                     bool requires_grad = false) {
    if (detail::NumelOf(shape) != static_cast<int64_t>(values.size()))
      throw ShapeError(Cat("value count ", values.size(),
                           " does not match shape ", ShapeStr(shape)));
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    impl->requires_grad = requires_grad;
    impl->id = detail::NextNodeId();
    // A watched leaf always carries a gradient buffer, so a leaf the loss
    // never touches reads back as an all-zero gradient.
    if (requires_grad) impl->EnsureGrad();
    return Tensor(std::move(impl));
  }

  static Tensor Zeros(std::vector<int64_t> shape, bool requires_grad = false) {
    int64_t n = detail::NumelOf(shape);
    return Leaf(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor Full(std::vector<int64_t> shape, T value,
                     bool requires_grad = false) {
    int64_t n = detail::NumelOf(shape);
    return Leaf(std::move(shape), std::vector<T>(n, value), requires_grad);
  }

  // A scalar is a rank-1 tensor of length 1.
  static Tensor Scalar(T value, bool requires_grad = false) {
    return Leaf({1}, {value}, requires_grad);
  }

  bool Defined() const { return impl_ != nullptr; }
  const std::vector<int64_t> &Shape() const { return impl_->shape; }
  int64_t Rank() const { return static_cast<int64_t>(impl_->shape.size()); }
  int64_t Dim(int64_t i) const { return impl_->shape[i]; }
  int64_t Numel() const { return impl_->Numel(); }
  uint64_t Id() const { return impl_->id; }
  bool RequiresGrad() const { return impl_->requires_grad; }

  std::span<const T> Values() const { return impl_->values; }
  // Mutable access to a leaf's payload (parameter updates, gradcheck nudges).
  std::span<T> MutableValues() { return impl_->values; }

  bool HasGrad() const { return impl_->grad.size() == impl_->values.size(); }
  std::span<const T> Grad() const {
    if (!HasGrad())
      throw Error("tensor has no gradient (not reached by backward?)");
    return impl_->grad;
  }
  std::span<T> MutableGrad() {
    if (!HasGrad())
      throw Error("tensor has no gradient (not reached by backward?)");
    return impl_->grad;
  }

  void ZeroGrad() {
    if (impl_->requires_grad) impl_->grad.assign(impl_->values.size(), T(0));
  }

  T Item() const {
    if (Numel() != 1)
      throw ShapeError(Cat("Item() on non-scalar tensor ", ShapeStr(Shape())));
    return impl_->values[0];
  }

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

  explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

namespace detail {

// Post-order DFS (iterative; graphs can be thousands of nodes deep).
template <typename T>
void TopoOrder(const std::shared_ptr<TensorImpl<T>> &root,
               std::vector<TensorImpl<T> *> &order) {
  std::unordered_set<TensorImpl<T> *> visited;
  std::vector<std::pair<TensorImpl<T> *, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto &[node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      TensorImpl<T> *child = node->parents[next_child].get();
      ++next_child;
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Populates gradients of every requires-grad node reachable from `loss`.
// `loss` must be scalar. Gradients accumulate across calls; see the class
// comment.
template <typename T>
void Backward(const Tensor<T> &loss) {
  if (loss.Numel() != 1)
    throw ShapeError(
        Cat("Backward: loss must be scalar, got ", ShapeStr(loss.Shape())));
  std::vector<TensorImpl<T> *> order;
  detail::TopoOrder(loss.impl(), order);
  // Intermediate nodes need scratch gradient buffers even when no leaf
  // below them is watched; allocate only along requires-grad paths.
  for (TensorImpl<T> *node : order)
    if (node->requires_grad) node->EnsureGrad();
  if (!loss.impl()->requires_grad) return;  // loss independent of any leaf
  loss.impl()->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl<T> *node = *it;
    if (node->backward_fn && node->requires_grad) node->backward_fn(*node);
  }
}

template <typename T>
void ZeroGrads(std::vector<Tensor<T>> &params) {
  for (auto &p : params) p.ZeroGrad();
}

}  // namespace gdistill

#endif  // GDISTILL_TENSOR_H_
