#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace g3dgen {

using Matrix = Eigen::MatrixXd;

// Handle to a node on a Tape. Only valid for the tape that produced it.
struct Var {
    int id = -1;
};

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape owns one computation graph, built forward and differentiated once by
// backward(). Gradients flow only into nodes created by leaf(); constant()
// inputs are treated as fixed. A tape is single-use: build, backward, read.
class Tape {
public:
    Var constant(Matrix value) { return push(std::move(value), false, nullptr); }
    Var leaf(Matrix value) { return push(std::move(value), true, nullptr); }

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    // Zero-sized until backward touches the node.
    const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

    // y = x * w + b with b a single row broadcast over rows of the product.
    Var dense(Var x, Var w, Var b);
    // Shifted softplus ln(0.5 e^x + 0.5), elementwise.
    Var ssp(Var x);
    Var add(Var x, Var y);
    // y = a*x + b*y_in, same shapes.
    Var axpby(double a, Var x, double b, Var y);
    // Each row of x scaled elementwise by the single-row e.
    Var mul_rowbcast(Var x, Var e);
    // Row k of m as a 1 x cols node.
    Var row(Var m, int k);
    // Rows of m gathered by index; duplicates allowed.
    Var gather_rows(Var m, std::vector<int> idx);
    Var concat_cols(const std::vector<Var>& xs);
    Var log_softmax_rows(Var x);
    // Column sums as a single row.
    Var col_sum(Var x);
    // Scalar sum of the elementwise product with a fixed weight matrix.
    Var weighted_sum(Var x, Matrix weights);

    // Neighbor sum with filters shared between the two directions of a pair:
    //   out.row(i) = sum_{j != i} v.row(j) .* f.row(pair_row(i, j, n))
    // v is n x F; f has one row per unordered pair in pair_row order. The
    // summands of every output element are accumulated in sorted value order,
    // so the result is bitwise independent of input row order.
    Var pair_conv(Var v, Var f, int n);

    // Seeds d(loss) = 1 and propagates; loss must be 1x1. Call once per tape.
    void backward(Var loss);

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        // Receives this node's accumulated gradient.
        std::function<void(Tape&, const Matrix&)> pull;
    };

    Var push(Matrix value, bool needs_grad, std::function<void(Tape&, const Matrix&)> pull) {
        nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, std::move(pull)});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    bool needs(Var v) const { return nodes_[v.id].needs_grad; }

    void accum(Var v, const Matrix& g) {
        Node& node = nodes_[v.id];
        if (!node.needs_grad)
            return;
        if (node.grad.size() == 0)
            node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
        node.grad += g;
    }

    std::vector<Node> nodes_;
    bool used_ = false;
};

// Row index of unordered pair {i, j} (i != j) among the n*(n-1)/2 pairs
// ordered lexicographically by (min, max).
inline long pair_row(int i, int j, int n) {
    if (i > j)
        std::swap(i, j);
    return static_cast<long>(i) * (2 * n - i - 1) / 2 + (j - i - 1);
}

} // namespace g3dgen
