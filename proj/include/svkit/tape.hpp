#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "svkit/tensor.hpp"

namespace svkit {

// Eagerly built record of forward operations. Nodes are appended in
// execution order, which is already topological, so backward() is a single
// reverse walk. A tape and everything it references are confined to one
// thread; backward() consumes the tape.
template <class S>
class TapeT {
public:
    using BackwardFn = std::function<void()>;

    TapeT() = default;
    TapeT(const TapeT&) = delete;
    TapeT& operator=(const TapeT&) = delete;

    void record(const char* name, std::vector<TensorT<S>> inputs,
                const TensorT<S>& output, BackwardFn backward);

    // Seeds d(loss)/d(loss) = 1 and runs every backward rule in reverse
    // order, then clears the tape. loss must be a scalar recorded on this
    // tape.
    void backward(TensorT<S>& loss);

    std::size_t num_ops() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    static TapeT* current() { return current_; }

private:
    friend class TapeScopeT;

    struct Node {
        const char* name;
        std::vector<std::shared_ptr<TensorImpl<S>>> inputs;
        std::shared_ptr<TensorImpl<S>> output;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;

    static thread_local TapeT* current_;

public:
    // RAII guard making a tape the recording target for the current thread.
    class Scope {
    public:
        explicit Scope(TapeT& tape) : prev_(current_) { current_ = &tape; }
        ~Scope() { current_ = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        TapeT* prev_;
    };
};

// True when the tensor participates in gradient propagation: either a
// parameter/leaf marked requires_grad or an intermediate produced on tape.
template <class S>
bool wants_grad(const TensorT<S>& t) {
    return t.requires_grad() || t.from_op();
}

// Whether an op over these inputs should be recorded right now.
template <class S>
bool tracing(std::initializer_list<const TensorT<S>*> inputs) {
    if (TapeT<S>::current() == nullptr) return false;
    for (const TensorT<S>* t : inputs)
        if (wants_grad(*t)) return true;
    return false;
}

template <class S>
bool tracing(const std::vector<TensorT<S>>& inputs) {
    if (TapeT<S>::current() == nullptr) return false;
    for (const TensorT<S>& t : inputs)
        if (wants_grad(t)) return true;
    return false;
}

template <class S>
void accumulate_grad(TensorT<S>& t, const S* values, std::size_t n);

using Tape = TapeT<float>;

extern template class TapeT<float>;
extern template class TapeT<double>;

}  // namespace svkit
