#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "svkit/common.hpp"

namespace svkit {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);
void check_shape(const Shape& shape);

template <class S>
struct TensorImpl {
    Shape shape;
    std::vector<S> data;
    std::vector<S> grad;  // empty until backward touches it
    bool requires_grad = false;
    bool from_op = false;  // produced by a recorded tape operation
};

// Dense row-major tensor. Value-semantic handle over shared storage: copies
// alias the same buffer, clone() deep-copies. Immutable after forward
// creation except for the grad field.
template <class S>
class TensorT {
public:
    TensorT() = default;

    static TensorT zeros(Shape shape, bool requires_grad = false);
    static TensorT full(Shape shape, S value, bool requires_grad = false);
    static TensorT from_vector(Shape shape, std::vector<S> values,
                               bool requires_grad = false);
    // fan-in-scaled uniform on (-sqrt(6/fan_in), sqrt(6/fan_in))
    static TensorT he_uniform(Shape shape, std::size_t fan_in, Rng& rng);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->data.size(); }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape[i]; }

    std::span<S> data() { return impl_->data; }
    std::span<const S> data() const { return impl_->data; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool rg) { impl_->requires_grad = rg; }
    bool from_op() const { return impl_->from_op; }

    bool has_grad() const { return !impl_->grad.empty(); }
    void ensure_grad() {
        if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), S(0));
    }
    void zero_grad() {
        if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), S(0));
    }
    std::span<S> grad() { return impl_->grad; }
    std::span<const S> grad() const { return impl_->grad; }

    S scalar() const;
    S at(std::initializer_list<std::size_t> idx) const;

    TensorT clone() const;

    TensorImpl<S>* impl() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl<S>>& handle() const { return impl_; }

private:
    explicit TensorT(std::shared_ptr<TensorImpl<S>> impl) : impl_(std::move(impl)) {}

    std::shared_ptr<TensorImpl<S>> impl_;
};

using Tensor = TensorT<float>;

// One entry of a model's state: trainable parameters plus persistent
// buffers such as batch-norm running statistics.
template <class S>
struct NamedTensor {
    std::string name;
    TensorT<S> tensor;
    bool trainable = true;
};

extern template class TensorT<float>;
extern template class TensorT<double>;

}  // namespace svkit
