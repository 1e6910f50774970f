#include "load/core/graph.hpp"

#include <stdexcept>

namespace load::core {

const Tensor& Var::value() const {
    if (!valid()) throw std::logic_error("use of an unbound Var");
    return graph->value(*this);
}

Var Graph::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false, "constant"});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, record_, "leaf"});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(const ParamGroup& group, const std::string& name) {
    auto key = std::make_pair(&group, name);
    if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var{this, it->second};
    Var v = leaf(group.get(name));
    nodes_[v.id].op = "param";
    param_nodes_.emplace(std::move(key), v.id);
    return v;
}

const Tensor& Graph::value(Var v) const {
    if (v.graph != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw std::logic_error("Var does not belong to this graph");
    }
    return nodes_[v.id].value;
}

const Tensor& Graph::grad(Var v) const {
    if (!backward_done_) throw std::logic_error("gradient read before backward() completed");
    return nodes_.at(v.id).grad;
}

Var Graph::push(Tensor value, std::vector<int> parents, BackwardFn fn, const char* op) {
    bool needs = false;
    if (record_) {
        for (int p : parents) needs = needs || nodes_[p].requires_grad;
    }
    Node node{std::move(value), {}, {}, nullptr, needs, op};
    if (needs) {
        node.parents = std::move(parents);
        node.backward = std::move(fn);
    }
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

bool Graph::any_requires_grad(std::initializer_list<Var> vars) const {
    if (!record_) return false;
    for (const Var& v : vars) {
        if (nodes_[v.id].requires_grad) return true;
    }
    return false;
}

Tensor& Graph::accum(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
}

void Graph::backward(Var root) {
    if (!record_) throw std::logic_error("backward() on a non-recording graph");
    if (backward_done_) throw std::logic_error("backward() called twice on the same graph");
    const Tensor& rv = value(root);
    if (rv.size() != 1) throw std::invalid_argument("backward() root must be scalar, got shape " + shape_str(rv.shape()));
    if (nodes_[root.id].requires_grad) {
        accum(root.id).fill(Real(1));
        for (int id = root.id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.grad.empty() || !n.backward) continue;
            n.backward(*this, id);
        }
    }
    for (auto& n : nodes_) {
        if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    }
    backward_done_ = true;
}

GradMap Graph::param_grads(const ParamGroup& group) const {
    if (!backward_done_) throw std::logic_error("param_grads() before backward()");
    GradMap out = group.zero_grads();
    for (const auto& [key, id] : param_nodes_) {
        if (key.first != &group) continue;
        out[key.second] = nodes_[id].grad;
    }
    return out;
}

}  // namespace load::core
