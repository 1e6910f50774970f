#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "load/core/params.hpp"
#include "load/core/tensor.hpp"

namespace load::core {

class Graph;

// Handle to a node in a Graph. Cheap to copy; only valid while the graph lives.
struct Var {
    Graph* graph = nullptr;
    int id = -1;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool valid() const { return graph != nullptr && id >= 0; }
};

// Tape of forward values with reverse-mode backward rules. Nodes are appended
// in evaluation order, so the tape order is already a topological order.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, int self)>;

    explicit Graph(bool record = true) : record_(record) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return record_; }

    Var constant(Tensor value);
    Var leaf(Tensor value);
    // Binds a parameter as a leaf; repeated calls for the same (group, name) share one node.
    Var param(const ParamGroup& group, const std::string& name);

    const Tensor& value(Var v) const;
    const Tensor& value(int id) const { return nodes_[id].value; }
    const Tensor& grad(Var v) const;
    bool requires_grad(int id) const { return nodes_[id].requires_grad; }
    const char* op_name(Var v) const { return nodes_[v.id].op; }
    std::size_t size() const { return nodes_.size(); }

    void backward(Var root);
    bool backward_done() const { return backward_done_; }

    // Gradients for every parameter of the group; zeros for parameters the loss never reached.
    GradMap param_grads(const ParamGroup& group) const;

    // Op authoring.
    Var push(Tensor value, std::vector<int> parents, BackwardFn fn, const char* op);
    bool any_requires_grad(std::initializer_list<Var> vars) const;
    const Tensor& upstream(int self) const { return nodes_[self].grad; }
    Tensor& accum(int id);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<int> parents;
        BackwardFn backward;
        bool requires_grad = false;
        const char* op = "";
    };

    std::vector<Node> nodes_;
    std::map<std::pair<const ParamGroup*, std::string>, int> param_nodes_;
    bool record_;
    bool backward_done_ = false;
};

}  // namespace load::core
