#include "minsurro/ad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace minsurro::ad {

std::shared_ptr<const Pattern> Pattern::dense(int out_dim, int in_dim) {
    auto p = std::make_shared<Pattern>();
    p->out_dim = out_dim;
    p->in_dim = in_dim;
    for (int i = 0; i < out_dim; ++i)
        for (int j = 0; j < in_dim; ++j) {
            p->row.push_back(i);
            p->col.push_back(j);
        }
    return p;
}

std::shared_ptr<const Pattern> Pattern::lower_triangular(int n) {
    auto p = std::make_shared<Pattern>();
    p->out_dim = n;
    p->in_dim = n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            p->row.push_back(i);
            p->col.push_back(j);
        }
    return p;
}

const Mat& Var::value() const { return tape->value(*this); }

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

Var Tape::leaf(Mat value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Var Tape::constant(Mat value) {
    Node n;
    n.op = Op::Const;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::push(Node&& node) {
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

namespace {

using Node = Tape::Node;

void same_tape(Var a, Var b) {
    require(a.tape == b.tape && a.tape != nullptr, "ad: operands live on different tapes");
}

bool rg(Var v) { return v.tape->requires_grad(v); }

template <class Configure = decltype([](Node&) {})>
Var unary(Op op, Var a, Mat value, Configure configure = {}) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.value = std::move(value);
    n.requires_grad = rg(a);
    configure(n);
    return a.tape->push(std::move(n));
}

template <class Configure = decltype([](Node&) {})>
Var binary(Op op, Var a, Var b, Mat value, Configure configure = {}) {
    same_tape(a, b);
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.value = std::move(value);
    n.requires_grad = rg(a) || rg(b);
    configure(n);
    return a.tape->push(std::move(n));
}

void same_shape(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ContractError(std::string("ad::") + op + ": shape mismatch");
}

} // namespace

Var add(Var a, Var b) {
    same_shape(a, b, "add");
    return binary(Op::Add, a, b, a.value() + b.value());
}

Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    return binary(Op::Sub, a, b, a.value() - b.value());
}

Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    return binary(Op::Mul, a, b, a.value().cwiseProduct(b.value()));
}

Var scale(Var a, double c) {
    return unary(Op::Scale, a, a.value() * c, [c](Node& n) { n.scalar = c; });
}

Var add_scalar(Var a, double c) {
    Mat val = a.value().array() + c;
    return unary(Op::AddScalar, a, std::move(val));
}

Var add_bias(Var a, Var b) {
    require(b.cols() == 1 && b.rows() == a.rows(), "ad::add_bias: bias shape mismatch");
    Mat val = a.value().colwise() + b.value().col(0);
    return binary(Op::AddBias, a, b, std::move(val));
}

Var row_affine(Var a, const Vec& s, const Vec& t) {
    require(s.size() == a.rows() && t.size() == a.rows(), "ad::row_affine: length mismatch");
    Mat val = (s.asDiagonal() * a.value()).colwise() + t;
    return unary(Op::RowAffine, a, std::move(val), [&s](Node& n) { n.scale = s; });
}

Var row_sum(Var a) { return unary(Op::RowSum, a, a.value().rowwise().sum()); }

Var broadcast_cols(Var a, Eigen::Index cols) {
    require(a.cols() == 1, "ad::broadcast_cols: expects a column");
    Mat val = a.value().replicate(1, cols);
    return unary(Op::BroadcastCols, a, std::move(val));
}

Var col_sum(Var a) { return unary(Op::ColSum, a, a.value().colwise().sum()); }

Var broadcast_rows(Var a, Eigen::Index rows) {
    require(a.rows() == 1, "ad::broadcast_rows: expects a row");
    Mat val = a.value().replicate(rows, 1);
    return unary(Op::BroadcastRows, a, std::move(val));
}

Var sum_all(Var a) {
    Mat val(1, 1);
    val(0, 0) = a.value().sum();
    return unary(Op::SumAll, a, std::move(val));
}

Var fill(Var a, Eigen::Index rows, Eigen::Index cols) {
    require(a.rows() == 1 && a.cols() == 1, "ad::fill: expects a 1x1 node");
    Mat val = Mat::Constant(rows, cols, a.value()(0, 0));
    return unary(Op::Fill, a, std::move(val));
}

Var matmul(Var a, Var b) {
    require(a.cols() == b.rows(), "ad::matmul: inner dimension mismatch");
    Mat val;
    if (a.cols() == 0)
        val = Mat::Zero(a.rows(), b.cols());
    else
        val = a.value() * b.value();
    return binary(Op::MatMul, a, b, std::move(val));
}

Var transpose(Var a) { return unary(Op::Transpose, a, a.value().transpose()); }

Var softplus(Var a) {
    Mat val = a.value().unaryExpr([](double x) { return softplus(x); });
    return unary(Op::Softplus, a, std::move(val));
}

Var sigmoid(Var a) {
    Mat val = a.value().unaryExpr([](double x) { return sigmoid(x); });
    return unary(Op::Sigmoid, a, std::move(val));
}

Var tanh(Var a) { return unary(Op::Tanh, a, a.value().array().tanh().matrix()); }

Var square(Var a) { return unary(Op::Square, a, a.value().array().square().matrix()); }

Var relu(Var a) { return unary(Op::Relu, a, a.value().cwiseMax(0.0)); }

Var exp(Var a) { return unary(Op::Exp, a, a.value().array().exp().matrix()); }

Var lse_rows(Var a) {
    require(a.rows() >= 1, "ad::lse_rows: empty input");
    const Mat& v = a.value();
    Mat val(1, v.cols());
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        double m = v.col(c).maxCoeff();
        double s = (v.col(c).array() - m).exp().sum();
        val(0, c) = m + std::log(s);
    }
    return unary(Op::LseRows, a, std::move(val));
}

Var max_rows(Var a) {
    require(a.rows() >= 1, "ad::max_rows: empty input");
    const Mat& v = a.value();
    Mat val(1, v.cols());
    for (Eigen::Index c = 0; c < v.cols(); ++c) val(0, c) = v.col(c).maxCoeff();
    return unary(Op::MaxRows, a, std::move(val));
}

Var vstack(std::span<const Var> parts) {
    require(!parts.empty(), "ad::vstack: no parts");
    Tape* t = parts[0].tape;
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts[0].cols();
    for (Var p : parts) {
        require(p.tape == t, "ad::vstack: parts on different tapes");
        require(p.cols() == cols, "ad::vstack: column mismatch");
        rows += p.rows();
    }
    Mat val(rows, cols);
    Node n;
    n.op = Op::VStack;
    Eigen::Index off = 0;
    for (Var p : parts) {
        val.middleRows(off, p.rows()) = p.value();
        off += p.rows();
        n.parts.push_back(p.id);
        n.requires_grad = n.requires_grad || rg(p);
    }
    n.value = std::move(val);
    return t->push(std::move(n));
}

Var slice_rows(Var a, Eigen::Index offset, Eigen::Index count) {
    require(offset >= 0 && offset + count <= a.rows(), "ad::slice_rows: out of range");
    Mat val = a.value().middleRows(offset, count);
    const Eigen::Index total = a.rows();
    return unary(Op::SliceRows, a, std::move(val), [=](Node& n) {
        n.i0 = offset;
        n.i1 = total;
    });
}

Var embed_rows(Var a, Eigen::Index offset, Eigen::Index total_rows) {
    require(offset >= 0 && offset + a.rows() <= total_rows, "ad::embed_rows: out of range");
    Mat val = Mat::Zero(total_rows, a.cols());
    val.middleRows(offset, a.rows()) = a.value();
    return unary(Op::EmbedRows, a, std::move(val), [=](Node& n) {
        n.i0 = offset;
        n.i1 = total_rows;
    });
}

namespace {

Var pattern_op(Op op, const std::shared_ptr<const Pattern>& p, Var a, Var b, Mat val) {
    return binary(op, a, b, std::move(val), [&p](Node& n) { n.pattern = p; });
}

} // namespace

Var pat_mv(const std::shared_ptr<const Pattern>& p, Var c, Var x) {
    require(c.rows() == p->entries() && x.rows() == p->in_dim && c.cols() == x.cols(),
            "ad::pat_mv: shape mismatch");
    const Mat& C = c.value();
    const Mat& X = x.value();
    Mat y = Mat::Zero(p->out_dim, X.cols());
    for (int e = 0; e < p->entries(); ++e)
        y.row(p->row[e]).array() += C.row(e).array() * X.row(p->col[e]).array();
    return pattern_op(Op::PatMv, p, c, x, std::move(y));
}

Var pat_mvt(const std::shared_ptr<const Pattern>& p, Var c, Var y) {
    require(c.rows() == p->entries() && y.rows() == p->out_dim && c.cols() == y.cols(),
            "ad::pat_mvt: shape mismatch");
    const Mat& C = c.value();
    const Mat& Y = y.value();
    Mat z = Mat::Zero(p->in_dim, Y.cols());
    for (int e = 0; e < p->entries(); ++e)
        z.row(p->col[e]).array() += C.row(e).array() * Y.row(p->row[e]).array();
    return pattern_op(Op::PatMvT, p, c, y, std::move(z));
}

Var pat_outer(const std::shared_ptr<const Pattern>& p, Var a, Var b) {
    require(a.rows() == p->out_dim && b.rows() == p->in_dim && a.cols() == b.cols(),
            "ad::pat_outer: shape mismatch");
    const Mat& A = a.value();
    const Mat& B = b.value();
    Mat w(p->entries(), A.cols());
    for (int e = 0; e < p->entries(); ++e)
        w.row(e) = A.row(p->row[e]).cwiseProduct(B.row(p->col[e]));
    return pattern_op(Op::PatOuter, p, a, b, std::move(w));
}

std::vector<std::optional<Var>> Tape::grad(Var output, std::span<const Var> wrt) {
    require(output.tape == this, "Tape::grad: output from another tape");
    require(output.rows() == 1 && output.cols() == 1, "Tape::grad: output must be 1x1");
    const int top = output.id;
    std::vector<std::optional<Var>> grads(static_cast<std::size_t>(top) + 1);
    grads[static_cast<std::size_t>(top)] = constant(Mat::Ones(1, 1));
    for (int id = top; id >= 0; --id) {
        auto& g = grads[static_cast<std::size_t>(id)];
        if (!g || !nodes_[static_cast<std::size_t>(id)].requires_grad) continue;
        backward_node(id, *g, grads);
    }
    std::vector<std::optional<Var>> out;
    out.reserve(wrt.size());
    for (Var w : wrt) {
        if (w.id <= top)
            out.push_back(grads[static_cast<std::size_t>(w.id)]);
        else
            out.emplace_back();
    }
    return out;
}

void Tape::backward_node(int id, Var g, std::vector<std::optional<Var>>& grads) {
    // Copy what we need: pushing new nodes may reallocate nodes_.
    const Op op = nodes_[static_cast<std::size_t>(id)].op;
    const int ia = nodes_[static_cast<std::size_t>(id)].a;
    const int ib = nodes_[static_cast<std::size_t>(id)].b;
    const double scalar = nodes_[static_cast<std::size_t>(id)].scalar;
    const Eigen::Index i0 = nodes_[static_cast<std::size_t>(id)].i0;
    const Eigen::Index i1 = nodes_[static_cast<std::size_t>(id)].i1;
    const auto pattern = nodes_[static_cast<std::size_t>(id)].pattern;

    Var self{this, id};
    Var A{this, ia};
    Var B{this, ib};
    auto need = [&](int idx) { return idx >= 0 && nodes_[static_cast<std::size_t>(idx)].requires_grad; };
    auto acc = [&](int idx, Var gi) {
        auto& slot = grads[static_cast<std::size_t>(idx)];
        slot = slot ? add(*slot, gi) : gi;
    };

    switch (op) {
    case Op::Leaf:
    case Op::Const:
        break;
    case Op::Add:
        if (need(ia)) acc(ia, g);
        if (need(ib)) acc(ib, g);
        break;
    case Op::Sub:
        if (need(ia)) acc(ia, g);
        if (need(ib)) acc(ib, neg(g));
        break;
    case Op::Mul:
        if (need(ia)) acc(ia, mul(g, B));
        if (need(ib)) acc(ib, mul(g, A));
        break;
    case Op::Scale:
        if (need(ia)) acc(ia, scale(g, scalar));
        break;
    case Op::AddScalar:
        if (need(ia)) acc(ia, g);
        break;
    case Op::AddBias:
        if (need(ia)) acc(ia, g);
        if (need(ib)) acc(ib, row_sum(g));
        break;
    case Op::RowAffine: {
        Vec s = nodes_[static_cast<std::size_t>(id)].scale;
        if (need(ia)) acc(ia, row_affine(g, s, Vec::Zero(s.size())));
        break;
    }
    case Op::RowSum:
        if (need(ia)) acc(ia, broadcast_cols(g, A.cols()));
        break;
    case Op::BroadcastCols:
        if (need(ia)) acc(ia, row_sum(g));
        break;
    case Op::ColSum:
        if (need(ia)) acc(ia, broadcast_rows(g, A.rows()));
        break;
    case Op::BroadcastRows:
        if (need(ia)) acc(ia, col_sum(g));
        break;
    case Op::SumAll:
        if (need(ia)) acc(ia, fill(g, A.rows(), A.cols()));
        break;
    case Op::Fill:
        if (need(ia)) acc(ia, sum_all(g));
        break;
    case Op::MatMul:
        if (need(ia)) acc(ia, matmul(g, transpose(B)));
        if (need(ib)) acc(ib, matmul(transpose(A), g));
        break;
    case Op::Transpose:
        if (need(ia)) acc(ia, transpose(g));
        break;
    case Op::Softplus:
        if (need(ia)) acc(ia, mul(g, sigmoid(A)));
        break;
    case Op::Sigmoid:
        if (need(ia)) acc(ia, mul(g, mul(self, add_scalar(neg(self), 1.0))));
        break;
    case Op::Tanh:
        if (need(ia)) acc(ia, mul(g, add_scalar(neg(square(self)), 1.0)));
        break;
    case Op::Square:
        if (need(ia)) acc(ia, mul(g, scale(A, 2.0)));
        break;
    case Op::Relu:
        if (need(ia)) {
            Mat mask = (A.value().array() > 0.0).cast<double>().matrix();
            Var m = constant(std::move(mask));
            acc(ia, mul(g, m));
        }
        break;
    case Op::Exp:
        if (need(ia)) acc(ia, mul(g, self));
        break;
    case Op::LseRows:
        if (need(ia)) {
            Var w = exp(sub(A, broadcast_rows(self, A.rows())));
            acc(ia, mul(w, broadcast_rows(g, A.rows())));
        }
        break;
    case Op::MaxRows:
        if (need(ia)) {
            const Mat& v = A.value();
            Mat mask = Mat::Zero(v.rows(), v.cols());
            for (Eigen::Index c = 0; c < v.cols(); ++c) {
                Eigen::Index arg = 0;
                v.col(c).maxCoeff(&arg);  // first maximiser
                mask(arg, c) = 1.0;
            }
            const Eigen::Index rows = v.rows();
            Var m = constant(std::move(mask));
            acc(ia, mul(m, broadcast_rows(g, rows)));
        }
        break;
    case Op::VStack: {
        std::vector<int> parts = nodes_[static_cast<std::size_t>(id)].parts;
        Eigen::Index off = 0;
        for (int pid : parts) {
            Eigen::Index r = nodes_[static_cast<std::size_t>(pid)].value.rows();
            if (need(pid)) acc(pid, slice_rows(g, off, r));
            off += r;
        }
        break;
    }
    case Op::SliceRows:
        if (need(ia)) acc(ia, embed_rows(g, i0, i1));
        break;
    case Op::EmbedRows:
        if (need(ia)) acc(ia, slice_rows(g, i0, A.rows()));
        break;
    case Op::PatMv:  // y = C x
        if (need(ia)) acc(ia, pat_outer(pattern, g, B));
        if (need(ib)) acc(ib, pat_mvt(pattern, A, g));
        break;
    case Op::PatMvT:  // z = Cᵀ y
        if (need(ia)) acc(ia, pat_outer(pattern, B, g));
        if (need(ib)) acc(ib, pat_mv(pattern, A, g));
        break;
    case Op::PatOuter:  // W = a ⊗ b
        if (need(ia)) acc(ia, pat_mv(pattern, g, B));
        if (need(ib)) acc(ib, pat_mvt(pattern, g, A));
        break;
    }
}

} // namespace minsurro::ad
