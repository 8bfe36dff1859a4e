#pragma once

#include "divfuse/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace divfuse {

// Named tensor container for all learnable weights. The group id selects the
// learning-rate group during optimization.
struct ParamStore {
    std::vector<Matrix> values;
    std::vector<std::string> names;
    std::vector<int> group;

    int add(const std::string& name, Matrix init, int lr_group = 0);
    int find(const std::string& name) const;  // -1 if absent
    std::size_t scalar_count() const;
};

using GradStore = std::vector<Matrix>;
GradStore zero_grads_like(const ParamStore& params);

// Reverse-mode tape over dense matrices. Nodes are evaluated eagerly at
// creation; creation order is the topological order used by backward().
// Column vectors are k x 1 matrices throughout.
class Tape {
  public:
    explicit Tape(const ParamStore* params = nullptr) : params_(params) {}

    int constant(Matrix v);
    int param(int id);  // leaf bound to the store; one node per id per tape

    int matmul(int a, int b, bool trans_a = false, bool trans_b = false);
    int add(int a, int b);
    int sub(int a, int b);
    int sigmoid(int a);
    int tanh(int a);
    int abs(int a);
    int hadamard(int a, int b);
    int row(int a, int r);                          // row r as a column vector
    int segment(int a, int offset, int len);        // slice of a column vector
    int concat(const std::vector<int>& parts);      // stack column vectors
    int stack_rows(const std::vector<int>& rows);   // T column vectors -> T x k
    int softmax(int a);                             // column vector
    int bce_with_logits(int logit, double label, double pos_weight);

    const Matrix& value(int node) const;
    void backward(int node);  // node must be scalar (1 x 1)
    void add_param_grads(GradStore& grads) const;
    std::size_t size() const { return nodes_.size(); }

  private:
    enum class Op : std::uint8_t {
        constant,
        param,
        matmul,
        add,
        sub,
        sigmoid,
        tanh_fn,
        abs_fn,
        hadamard,
        row,
        segment,
        concat,
        stack_rows,
        softmax,
        bce
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        bool trans_a = false;
        bool trans_b = false;
        int i0 = 0;
        int i1 = 0;
        double s0 = 0.0;  // bce label
        double s1 = 0.0;  // bce pos_weight
        int param_id = -1;
        std::vector<int> kids;
        Matrix val;
        Matrix grad;
    };

    const Matrix& val_of(int i) const;
    Matrix& grad_of(int i);  // lazily sized to the value's shape
    int push(Node n);
    void check(int i) const;

    const ParamStore* params_;
    std::vector<Node> nodes_;
    std::vector<int> param_nodes_;  // param id -> node index (or -1)
};

}  // namespace divfuse
