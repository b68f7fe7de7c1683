#pragma once

// Batched reverse-mode tape with differentiable backward passes.
//
// Every node holds a dense matrix; the batch runs along columns. Backward
// rules are expressed with the same recorded operations, so the gradient
// nodes produced by Tape::grad are themselves differentiable. This is what
// gives exact mixed derivatives d/dΘ of a loss built from d/dx of a model.

#include "minsurro/common.hpp"

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace minsurro::ad {

class Tape;

/// Sparse coefficient layout for per-column matrix-vector products:
/// y(row[e]) += C(e) * x(col[e]).
struct Pattern {
    int out_dim = 0;
    int in_dim = 0;
    std::vector<int> row;
    std::vector<int> col;

    int entries() const { return static_cast<int>(row.size()); }

    static std::shared_ptr<const Pattern> dense(int out_dim, int in_dim);
    static std::shared_ptr<const Pattern> lower_triangular(int n);
};

struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Mat& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Op : unsigned char {
    Leaf, Const,
    Add, Sub, Mul, Scale, AddScalar,
    AddBias, RowAffine,
    RowSum, BroadcastCols, ColSum, BroadcastRows, SumAll, Fill,
    MatMul, Transpose,
    Softplus, Sigmoid, Tanh, Square, Relu, Exp,
    LseRows, MaxRows,
    VStack, SliceRows, EmbedRows,
    PatMv, PatMvT, PatOuter,
};

class Tape {
public:
    struct Node {
        Op op = Op::Const;
        Mat value;
        int a = -1;
        int b = -1;
        std::vector<int> parts;
        double scalar = 0.0;
        Eigen::Index i0 = 0;
        Eigen::Index i1 = 0;
        Vec scale;  // RowAffine
        std::shared_ptr<const Pattern> pattern;
        bool requires_grad = false;
    };

    Tape() { nodes_.reserve(256); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Mat value, bool requires_grad = true);
    Var constant(Mat value);

    const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Gradients of a 1x1 node with respect to `wrt`. Entries are empty when
    /// the output does not depend on that node. The returned nodes live on
    /// this tape and can be differentiated again.
    std::vector<std::optional<Var>> grad(Var output, std::span<const Var> wrt);

    /// Low-level: appends a fully formed node. Used by the op functions.
    Var push(Node&& node);
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

private:
    std::vector<Node> nodes_;

    void backward_node(int id, Var g, std::vector<std::optional<Var>>& grads);
};

// Elementwise, same shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
inline Var neg(Var a) { return scale(a, -1.0); }

/// a (m x B) + b (m x 1) broadcast over columns.
Var add_bias(Var a, Var b);
/// diag(s) * a + t, with constant s, t (length m).
Var row_affine(Var a, const Vec& s, const Vec& t);

Var row_sum(Var a);                              // m x B -> m x 1
Var broadcast_cols(Var a, Eigen::Index cols);    // m x 1 -> m x B
Var col_sum(Var a);                              // m x B -> 1 x B
Var broadcast_rows(Var a, Eigen::Index rows);    // 1 x B -> m x B
Var sum_all(Var a);                              // -> 1 x 1
Var fill(Var a, Eigen::Index rows, Eigen::Index cols);  // 1 x 1 -> rows x cols

Var matmul(Var a, Var b);
Var transpose(Var a);

Var softplus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var square(Var a);
/// max(a, 0); derivative at exactly 0 is taken as 0.
Var relu(Var a);
Var exp(Var a);

/// Column-wise log-sum-exp with max shift: m x B -> 1 x B.
Var lse_rows(Var a);
/// Column-wise max; ties resolve to the lowest row index.
Var max_rows(Var a);

Var vstack(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index offset, Eigen::Index count);
Var embed_rows(Var a, Eigen::Index offset, Eigen::Index total_rows);

/// Per-column sparse products driven by `pattern`.
///   pat_mv:    y(row[e]) += C(e) x(col[e])      C: E x B, x: in x B  -> out x B
///   pat_mvt:   z(col[e]) += C(e) y(row[e])      C: E x B, y: out x B -> in x B
///   pat_outer: W(e) = a(row[e]) b(col[e])       a: out x B, b: in x B -> E x B
Var pat_mv(const std::shared_ptr<const Pattern>& pattern, Var c, Var x);
Var pat_mvt(const std::shared_ptr<const Pattern>& pattern, Var c, Var y);
Var pat_outer(const std::shared_ptr<const Pattern>& pattern, Var a, Var b);

/// Numerically stable scalar helpers shared with the direct evaluators.
double softplus(double x);
double sigmoid(double x);

} // namespace minsurro::ad
