#include "svkit/tape.hpp"

namespace svkit {

template <class S>
thread_local TapeT<S>* TapeT<S>::current_ = nullptr;

template <class S>
void TapeT<S>::record(const char* name, std::vector<TensorT<S>> inputs,
                      const TensorT<S>& output, BackwardFn backward) {
    Node node;
    node.name = name;
    node.inputs.reserve(inputs.size());
    for (const TensorT<S>& t : inputs) node.inputs.push_back(t.handle());
    node.output = output.handle();
    node.output->from_op = true;
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
}

template <class S>
void TapeT<S>::backward(TensorT<S>& loss) {
    if (loss.size() != 1)
        throw std::invalid_argument(
            msg("backward: loss must be scalar, got shape ", shape_str(loss.shape())));
    if (!loss.from_op())
        throw std::invalid_argument("backward: loss is not on the tape");
    loss.ensure_grad();
    loss.grad()[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) continue;  // no gradient reached this op
        it->backward();
    }
    clear();
}

template <class S>
void accumulate_grad(TensorT<S>& t, const S* values, std::size_t n) {
    if (!wants_grad(t)) return;
    t.ensure_grad();
    auto g = t.grad();
    for (std::size_t i = 0; i < n; ++i) g[i] += values[i];
}

template class TapeT<float>;
template class TapeT<double>;
template void accumulate_grad<float>(TensorT<float>&, const float*, std::size_t);
template void accumulate_grad<double>(TensorT<double>&, const double*, std::size_t);

}  // namespace svkit
