#include "svkit/tensor.hpp"

#include <cmath>

namespace svkit {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void check_shape(const Shape& shape) {
    if (shape.empty())
        throw std::invalid_argument("invalid shape: rank 0");
    for (std::size_t d : shape)
        if (d == 0)
            throw std::invalid_argument(
                msg("invalid shape ", shape_str(shape), ": every dimension must be >= 1"));
}

template <class S>
TensorT<S> TensorT<S>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), S(0), requires_grad);
}

template <class S>
TensorT<S> TensorT<S>::full(Shape shape, S value, bool requires_grad) {
    check_shape(shape);
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->data.assign(numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return TensorT(std::move(impl));
}

template <class S>
TensorT<S> TensorT<S>::from_vector(Shape shape, std::vector<S> values, bool requires_grad) {
    check_shape(shape);
    if (numel(shape) != values.size())
        throw std::invalid_argument(msg("shape ", shape_str(shape), " expects ", numel(shape),
                                        " values, got ", values.size()));
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return TensorT(std::move(impl));
}

template <class S>
TensorT<S> TensorT<S>::he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    check_shape(shape);
    if (fan_in == 0) throw std::invalid_argument("he_uniform: fan_in must be >= 1");
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->data.resize(numel(shape));
    impl->shape = std::move(shape);
    for (S& v : impl->data) v = static_cast<S>(rng.uniform(-bound, bound));
    return TensorT(std::move(impl));
}

template <class S>
S TensorT<S>::scalar() const {
    if (size() != 1)
        throw std::invalid_argument(
            msg("scalar() on tensor of shape ", shape_str(shape())));
    return impl_->data[0];
}

template <class S>
S TensorT<S>::at(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != rank())
        throw std::invalid_argument(msg("at(): ", idx.size(), " indices for rank ", rank()));
    std::size_t flat = 0;
    std::size_t i = 0;
    for (std::size_t v : idx) {
        if (v >= impl_->shape[i])
            throw std::out_of_range(msg("at(): index ", v, " out of range for dim ", i));
        flat = flat * impl_->shape[i] + v;
        ++i;
    }
    return impl_->data[flat];
}

template <class S>
TensorT<S> TensorT<S>::clone() const {
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    impl->requires_grad = impl_->requires_grad;
    return TensorT(std::move(impl));
}

template class TensorT<float>;
template class TensorT<double>;

}  // namespace svkit
