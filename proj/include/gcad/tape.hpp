#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcad/errors.hpp"
#include "gcad/tensor.hpp"

namespace gcad {

/// Reverse-mode differentiation tape.
///
/// Every operation appends one node holding its result; inputs are referred
/// to by node id, so the node list is topologically ordered by construction.
/// backward() walks the list in exact reverse creation order and returns the
/// gradient of a scalar root with respect to every node.
///
/// Tapes are single-owner: build, differentiate, discard (or clear()).
class Tape {
public:
    using NodeId = std::int32_t;

    NodeId leaf(Tensor t) { return push(Op::Leaf, -1, -1, std::move(t)); }

    NodeId matmul(NodeId a, NodeId b) {
        return push(Op::MatMul, a, b, gcad::matmul(value(a), value(b)));
    }

    NodeId transpose(NodeId a) { return push(Op::Transpose, a, -1, gcad::transpose(value(a))); }

    NodeId reshape(NodeId a, std::vector<std::size_t> shape) {
        return push(Op::Reshape, a, -1, gcad::reshape(value(a), std::move(shape)));
    }

    NodeId add(NodeId a, NodeId b) { return push(Op::Add, a, b, gcad::add(value(a), value(b))); }
    NodeId sub(NodeId a, NodeId b) { return push(Op::Sub, a, b, gcad::sub(value(a), value(b))); }
    NodeId mul(NodeId a, NodeId b) { return push(Op::Mul, a, b, gcad::mul(value(a), value(b))); }
    NodeId relu(NodeId a) { return push(Op::Relu, a, -1, gcad::relu(value(a))); }
    NodeId square(NodeId a) { return push(Op::Square, a, -1, gcad::square(value(a))); }

    NodeId scale(NodeId a, double c) {
        NodeId id = push(Op::Scale, a, -1, gcad::scale(value(a), c));
        nodes_[id].scalar = c;
        return id;
    }

    NodeId sum(NodeId a) { return push(Op::SumAll, a, -1, gcad::sum_all(value(a))); }

    // Extract one entry (by flat index) as a scalar node.
    NodeId pick(NodeId a, std::size_t index) {
        if (index >= value(a).numel()) throw ContractError("pick index out of range");
        NodeId id = push(Op::Pick, a, -1, Tensor::scalar(value(a)[index]));
        nodes_[id].index = index;
        return id;
    }

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    /// Gradients of a scalar root with respect to every node, indexed by
    /// node id. The root's gradient is 1.
    std::vector<Tensor> backward(NodeId root) const {
        if (root < 0 || static_cast<std::size_t>(root) >= nodes_.size())
            throw ContractError("backward: root id out of range");
        if (value(root).numel() != 1)
            throw ContractError("backward requires a scalar root, got shape " +
                                value(root).shape_string());

        std::vector<Tensor> grads(nodes_.size());
        std::vector<char> live(nodes_.size(), 0);
        grads[static_cast<std::size_t>(root)] = Tensor::scalar(1.0);
        live[static_cast<std::size_t>(root)] = 1;

        for (std::int64_t i = root; i >= 0; --i) {
            const std::size_t id = static_cast<std::size_t>(i);
            if (!live[id]) continue;
            const Node& node = nodes_[id];
            const Tensor& g = grads[id];
            switch (node.op) {
                case Op::Leaf:
                    break;
                case Op::MatMul:
                    accumulate(grads, live, node.a, gcad::matmul(g, gcad::transpose(value(node.b))));
                    accumulate(grads, live, node.b, gcad::matmul(gcad::transpose(value(node.a)), g));
                    break;
                case Op::Transpose:
                    accumulate(grads, live, node.a, gcad::transpose(g));
                    break;
                case Op::Reshape:
                    accumulate(grads, live, node.a, gcad::reshape(g, value(node.a).shape()));
                    break;
                case Op::Add:
                    accumulate(grads, live, node.a, g);
                    accumulate(grads, live, node.b, reduce_to(g, value(node.b)));
                    break;
                case Op::Sub:
                    accumulate(grads, live, node.a, g);
                    accumulate(grads, live, node.b, gcad::scale(reduce_to(g, value(node.b)), -1.0));
                    break;
                case Op::Mul:
                    accumulate(grads, live, node.a,
                               detail::zip(g, value(node.b),
                                           [](double x, double y) { return x * y; }, "mul-grad"));
                    accumulate(grads, live, node.b,
                               reduce_to(gcad::mul(g, value(node.a)), value(node.b)));
                    break;
                case Op::Relu: {
                    const Tensor& x = value(node.a);
                    Tensor gx(x.shape());
                    for (std::size_t k = 0; k < x.numel(); ++k) gx[k] = x[k] > 0.0 ? g[k] : 0.0;
                    accumulate(grads, live, node.a, std::move(gx));
                    break;
                }
                case Op::Square: {
                    const Tensor& x = value(node.a);
                    Tensor gx(x.shape());
                    for (std::size_t k = 0; k < x.numel(); ++k) gx[k] = 2.0 * x[k] * g[k];
                    accumulate(grads, live, node.a, std::move(gx));
                    break;
                }
                case Op::Scale:
                    accumulate(grads, live, node.a, gcad::scale(g, node.scalar));
                    break;
                case Op::SumAll: {
                    const Tensor& x = value(node.a);
                    Tensor gx(x.shape());
                    const double s = g[0];
                    for (std::size_t k = 0; k < x.numel(); ++k) gx[k] = s;
                    accumulate(grads, live, node.a, std::move(gx));
                    break;
                }
                case Op::Pick: {
                    Tensor gx(value(node.a).shape());
                    gx[node.index] = g[0];
                    accumulate(grads, live, node.a, std::move(gx));
                    break;
                }
            }
        }

        // Untouched nodes (not on a path to the root) get explicit zeros so
        // every id is addressable.
        for (std::size_t id = 0; id < nodes_.size(); ++id)
            if (!live[id]) grads[id] = Tensor::zeros(nodes_[id].value.shape());
        return grads;
    }

private:
    enum class Op : std::uint8_t {
        Leaf,
        MatMul,
        Transpose,
        Reshape,
        Add,
        Sub,
        Mul,
        Relu,
        Square,
        Scale,
        SumAll,
        Pick
    };

    struct Node {
        Op op;
        NodeId a;
        NodeId b;
        double scalar = 0.0;
        std::size_t index = 0;
        Tensor value;
    };

    NodeId push(Op op, NodeId a, NodeId b, Tensor value) {
        nodes_.push_back(Node{op, a, b, 0.0, 0, std::move(value)});
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    // Sum a full-shape gradient down to a broadcast operand's shape.
    static Tensor reduce_to(const Tensor& g, const Tensor& target) {
        if (g.same_shape(target)) return g;
        const std::size_t n = target.numel();
        Tensor out(target.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) out[i % n] += g[i];
        return out;
    }

    static void accumulate(std::vector<Tensor>& grads, std::vector<char>& live, NodeId id,
                           Tensor contribution) {
        const std::size_t k = static_cast<std::size_t>(id);
        if (!live[k]) {
            grads[k] = std::move(contribution);
            live[k] = 1;
        } else {
            Tensor& acc = grads[k];
            for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += contribution[i];
        }
    }

    std::vector<Node> nodes_;
};

}  // namespace gcad
