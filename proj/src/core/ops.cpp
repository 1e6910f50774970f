#include "load/core/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace load::core {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 1>>;
using VecMap = Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>>;

ConstMatMap cmat(const Tensor& t) { return ConstMatMap(t.ptr(), t.rows(), t.cols()); }
MatMap mmat(Tensor& t) { return MatMap(t.ptr(), t.rows(), t.cols()); }
ConstVecMap cvec(const Tensor& t) { return ConstVecMap(t.ptr(), static_cast<Eigen::Index>(t.size())); }
VecMap mvec(Tensor& t) { return VecMap(t.ptr(), static_cast<Eigen::Index>(t.size())); }

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

void require_matrix_like(const char* op, const Tensor& t) {
    if (t.rank() > 2) throw std::invalid_argument(std::string(op) + ": expected rank <= 2, got " + shape_str(t.shape()));
}

Graph& graph_of(std::initializer_list<Var> vars) {
    Graph* g = nullptr;
    for (const Var& v : vars) {
        if (!v.valid()) throw std::logic_error("unbound Var passed to op");
        if (g && v.graph != g) throw std::logic_error("Vars from different graphs combined in one op");
        g = v.graph;
    }
    return *g;
}

template <typename F>
Var unary_elementwise(Var a, const char* op, F forward, std::function<Real(Real x, Real y)> derivative) {
    Graph& g = graph_of({a});
    const Tensor& x = a.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
    const int ai = a.id;
    return g.push(std::move(out), {ai},
                  [ai, derivative](Graph& gr, int self) {
                      const Tensor& up = gr.upstream(self);
                      const Tensor& x = gr.value(ai);
                      const Tensor& y = gr.value(self);
                      Tensor& ga = gr.accum(ai);
                      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += up[i] * derivative(x[i], y[i]);
                  },
                  op);
}

}  // namespace

std::vector<int> Segments::row_owner() const {
    std::vector<int> owner(static_cast<std::size_t>(total()));
    for (int s = 0; s < count(); ++s) {
        for (int r = begin(s); r < end(s); ++r) owner[r] = s;
    }
    return owner;
}

Var matmul(Var a, Var b) {
    Graph& g = graph_of({a, b});
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_matrix_like("matmul", A);
    require_matrix_like("matmul", B);
    if (A.cols() != B.rows()) shape_error("matmul", A.shape(), B.shape());
    Tensor out(Shape{A.rows(), B.cols()});
    mmat(out).noalias() = cmat(A) * cmat(B);
    const int ai = a.id, bi = b.id;
    return g.push(std::move(out), {ai, bi},
                  [ai, bi](Graph& gr, int self) {
                      auto G = cmat(gr.upstream(self));
                      if (gr.requires_grad(ai)) mmat(gr.accum(ai)).noalias() += G * cmat(gr.value(bi)).transpose();
                      if (gr.requires_grad(bi)) mmat(gr.accum(bi)).noalias() += cmat(gr.value(ai)).transpose() * G;
                  },
                  "matmul");
}

Var transpose(Var a) {
    Graph& g = graph_of({a});
    const Tensor& A = a.value();
    require_matrix_like("transpose", A);
    Tensor out(Shape{A.cols(), A.rows()});
    mmat(out) = cmat(A).transpose();
    const int ai = a.id;
    return g.push(std::move(out), {ai},
                  [ai](Graph& gr, int self) { mmat(gr.accum(ai)) += cmat(gr.upstream(self)).transpose(); },
                  "transpose");
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    Graph& g = *parts.front().graph;
    const int rows = parts.front().value().rows();
    int cols = 0;
    bool any_matrix = false;
    std::vector<int> ids;
    std::vector<int> widths;
    for (const Var& p : parts) {
        graph_of({parts.front(), p});
        const Tensor& t = p.value();
        require_matrix_like("concat_cols", t);
        if (t.rows() != rows) shape_error("concat_cols", parts.front().shape(), t.shape());
        any_matrix = any_matrix || t.rank() == 2;
        ids.push_back(p.id);
        widths.push_back(t.cols());
        cols += t.cols();
    }
    Tensor out(any_matrix ? Shape{rows, cols} : Shape{cols});
    auto O = mmat(out);
    int c0 = 0;
    for (const Var& p : parts) {
        const Tensor& t = p.value();
        O.block(0, c0, rows, t.cols()) = cmat(t);
        c0 += t.cols();
    }
    return g.push(std::move(out), ids,
                  [ids, widths, rows](Graph& gr, int self) {
                      auto G = cmat(gr.upstream(self));
                      int c = 0;
                      for (std::size_t k = 0; k < ids.size(); ++k) {
                          if (gr.requires_grad(ids[k])) mmat(gr.accum(ids[k])) += G.block(0, c, rows, widths[k]);
                          c += widths[k];
                      }
                  },
                  "concat_cols");
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    Graph& g = *parts.front().graph;
    const int cols = parts.front().value().cols();
    int rows = 0;
    std::vector<int> ids;
    std::vector<int> heights;
    for (const Var& p : parts) {
        graph_of({parts.front(), p});
        const Tensor& t = p.value();
        require_matrix_like("concat_rows", t);
        if (t.cols() != cols) shape_error("concat_rows", parts.front().shape(), t.shape());
        ids.push_back(p.id);
        heights.push_back(t.rows());
        rows += t.rows();
    }
    Tensor out(Shape{rows, cols});
    std::size_t pos = 0;
    for (const Var& p : parts) {
        const Tensor& t = p.value();
        std::copy(t.data().begin(), t.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(pos));
        pos += t.size();
    }
    return g.push(std::move(out), ids,
                  [ids, heights, cols](Graph& gr, int self) {
                      const Tensor& G = gr.upstream(self);
                      std::size_t off = 0;
                      for (std::size_t k = 0; k < ids.size(); ++k) {
                          const std::size_t n = static_cast<std::size_t>(heights[k]) * cols;
                          if (gr.requires_grad(ids[k])) {
                              Tensor& ga = gr.accum(ids[k]);
                              for (std::size_t i = 0; i < n; ++i) ga[i] += G[off + i];
                          }
                          off += n;
                      }
                  },
                  "concat_rows");
}

Var add(Var a, Var b) {
    Graph& g = graph_of({a, b});
    require_same_shape("add", a.value(), b.value());
    Tensor out = a.value();
    mvec(out) += cvec(b.value());
    const int ai = a.id, bi = b.id;
    return g.push(std::move(out), {ai, bi},
                  [ai, bi](Graph& gr, int self) {
                      auto G = cvec(gr.upstream(self));
                      if (gr.requires_grad(ai)) mvec(gr.accum(ai)) += G;
                      if (gr.requires_grad(bi)) mvec(gr.accum(bi)) += G;
                  },
                  "add");
}

Var sub(Var a, Var b) {
    Graph& g = graph_of({a, b});
    require_same_shape("sub", a.value(), b.value());
    Tensor out = a.value();
    mvec(out) -= cvec(b.value());
    const int ai = a.id, bi = b.id;
    return g.push(std::move(out), {ai, bi},
                  [ai, bi](Graph& gr, int self) {
                      auto G = cvec(gr.upstream(self));
                      if (gr.requires_grad(ai)) mvec(gr.accum(ai)) += G;
                      if (gr.requires_grad(bi)) mvec(gr.accum(bi)) -= G;
                  },
                  "sub");
}

Var mul(Var a, Var b) {
    Graph& g = graph_of({a, b});
    require_same_shape("mul", a.value(), b.value());
    Tensor out = a.value();
    mvec(out).array() *= cvec(b.value()).array();
    const int ai = a.id, bi = b.id;
    return g.push(std::move(out), {ai, bi},
                  [ai, bi](Graph& gr, int self) {
                      auto G = cvec(gr.upstream(self)).array();
                      if (gr.requires_grad(ai)) mvec(gr.accum(ai)).array() += G * cvec(gr.value(bi)).array();
                      if (gr.requires_grad(bi)) mvec(gr.accum(bi)).array() += G * cvec(gr.value(ai)).array();
                  },
                  "mul");
}

Var add_row(Var x, Var bias) {
    Graph& g = graph_of({x, bias});
    const Tensor& X = x.value();
    const Tensor& b = bias.value();
    require_matrix_like("add_row", X);
    if (static_cast<int>(b.size()) != X.cols() || b.rank() > 2 || (b.rank() == 2 && b.rows() != 1)) {
        shape_error("add_row", X.shape(), b.shape());
    }
    Tensor out = X;
    mmat(out).rowwise() += cvec(b).transpose();
    const int xi = x.id, bi = bias.id;
    return g.push(std::move(out), {xi, bi},
                  [xi, bi](Graph& gr, int self) {
                      auto G = cmat(gr.upstream(self));
                      if (gr.requires_grad(xi)) mmat(gr.accum(xi)) += G;
                      if (gr.requires_grad(bi)) mvec(gr.accum(bi)) += G.colwise().sum().transpose();
                  },
                  "add_row");
}

Var scale(Var a, Real s) {
    Graph& g = graph_of({a});
    Tensor out = a.value();
    mvec(out) *= s;
    const int ai = a.id;
    return g.push(std::move(out), {ai},
                  [ai, s](Graph& gr, int self) { mvec(gr.accum(ai)) += s * cvec(gr.upstream(self)); }, "scale");
}

Var add_scalar(Var a, Real s) {
    Graph& g = graph_of({a});
    Tensor out = a.value();
    mvec(out).array() += s;
    const int ai = a.id;
    return g.push(std::move(out), {ai},
                  [ai](Graph& gr, int self) { mvec(gr.accum(ai)) += cvec(gr.upstream(self)); }, "add_scalar");
}

Var leaky_relu(Var a, Real slope) {
    return unary_elementwise(
        a, "leaky_relu", [slope](Real x) { return x > 0 ? x : slope * x; },
        [slope](Real x, Real) { return x > 0 ? Real(1) : slope; });
}

Var exp(Var a) {
    return unary_elementwise(
        a, "exp", [](Real x) { return std::exp(x); }, [](Real, Real y) { return y; });
}

Var log(Var a) {
    for (Real v : a.value().data()) {
        if (!(v > 0)) throw std::domain_error("log of non-positive value " + std::to_string(v));
    }
    return unary_elementwise(
        a, "log", [](Real x) { return std::log(x); }, [](Real x, Real) { return Real(1) / x; });
}

Var clamp(Var a, Real lo, Real hi) {
    if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
    return unary_elementwise(
        a, "clamp", [lo, hi](Real x) { return std::clamp(x, lo, hi); },
        [lo, hi](Real x, Real) { return (x >= lo && x <= hi) ? Real(1) : Real(0); });
}

Var softmax_rows(Var a) {
    Graph& g = graph_of({a});
    const Tensor& X = a.value();
    require_matrix_like("softmax_rows", X);
    Tensor out(X.shape());
    const int n = X.rows(), m = X.cols();
    for (int r = 0; r < n; ++r) {
        const Real* x = X.ptr() + static_cast<std::size_t>(r) * m;
        Real* y = out.ptr() + static_cast<std::size_t>(r) * m;
        const Real mx = *std::max_element(x, x + m);
        Real z = 0;
        for (int j = 0; j < m; ++j) z += (y[j] = std::exp(x[j] - mx));
        for (int j = 0; j < m; ++j) y[j] /= z;
    }
    const int ai = a.id;
    return g.push(std::move(out), {ai},
                  [ai, n, m](Graph& gr, int self) {
                      const Tensor& G = gr.upstream(self);
                      const Tensor& Y = gr.value(self);
                      Tensor& ga = gr.accum(ai);
                      for (int r = 0; r < n; ++r) {
                          const std::size_t o = static_cast<std::size_t>(r) * m;
                          Real dot = 0;
                          for (int j = 0; j < m; ++j) dot += G[o + j] * Y[o + j];
                          for (int j = 0; j < m; ++j) ga[o + j] += Y[o + j] * (G[o + j] - dot);
                      }
                  },
                  "softmax_rows");
}

Var log_softmax_rows(Var a) {
    Graph& g = graph_of({a});
    const Tensor& X = a.value();
    require_matrix_like("log_softmax_rows", X);
    Tensor out(X.shape());
    const int n = X.rows(), m = X.cols();
    for (int r = 0; r < n; ++r) {
        const Real* x = X.ptr() + static_cast<std::size_t>(r) * m;
        Real* y = out.ptr() + static_cast<std::size_t>(r) * m;
        const Real mx = *std::max_element(x, x + m);
        Real z = 0;
        for (int j = 0; j < m; ++j) z += std::exp(x[j] - mx);
        const Real lz = std::log(z) + mx;
        for (int j = 0; j < m; ++j) y[j] = x[j] - lz;
    }
    const int ai = a.id;
    return g.push(std::move(out), {ai},
                  [ai, n, m](Graph& gr, int self) {
                      const Tensor& G = gr.upstream(self);
                      const Tensor& Y = gr.value(self);
                      Tensor& ga = gr.accum(ai);
                      for (int r = 0; r < n; ++r) {
                          const std::size_t o = static_cast<std::size_t>(r) * m;
                          Real gs = 0;
                          for (int j = 0; j < m; ++j) gs += G[o + j];
                          for (int j = 0; j < m; ++j) ga[o + j] += G[o + j] - std::exp(Y[o + j]) * gs;
                      }
                  },
                  "log_softmax_rows");
}

Var l2_normalize_rows(Var a) {
    Graph& g = graph_of({a});
    const Tensor& X = a.value();
    require_matrix_like("l2_normalize_rows", X);
    const int n = X.rows(), m = X.cols();
    Tensor out(X.shape());
    std::vector<Real> norms(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        const std::size_t o = static_cast<std::size_t>(r) * m;
        Real ss = 0;
        for (int j = 0; j < m; ++j) ss += X[o + j] * X[o + j];
        norms[r] = std::sqrt(ss);
        const Real d = std::max(norms[r], kNormEpsilon);
        for (int j = 0; j < m; ++j) out[o + j] = X[o + j] / d;
    }
    const int ai = a.id;
    return g.push(std::move(out), {ai},
                  [ai, n, m, norms](Graph& gr, int self) {
                      const Tensor& G = gr.upstream(self);
                      const Tensor& Y = gr.value(self);
                      Tensor& ga = gr.accum(ai);
                      for (int r = 0; r < n; ++r) {
                          const std::size_t o = static_cast<std::size_t>(r) * m;
                          if (norms[r] > kNormEpsilon) {
                              Real dot = 0;
                              for (int j = 0; j < m; ++j) dot += Y[o + j] * G[o + j];
                              for (int j = 0; j < m; ++j) ga[o + j] += (G[o + j] - Y[o + j] * dot) / norms[r];
                          } else {
                              for (int j = 0; j < m; ++j) ga[o + j] += G[o + j] / kNormEpsilon;
                          }
                      }
                  },
                  "l2_normalize_rows");
}

Var rowwise_dot(Var a, Var b) {
    Graph& g = graph_of({a, b});
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_matrix_like("rowwise_dot", A);
    require_same_shape("rowwise_dot", A, B);
    const int n = A.rows();
    Tensor out(Shape{n});
    mvec(out) = cmat(A).cwiseProduct(cmat(B)).rowwise().sum();
    const int ai = a.id, bi = b.id;
    return g.push(std::move(out), {ai, bi},
                  [ai, bi](Graph& gr, int self) {
                      auto G = cvec(gr.upstream(self));
                      if (gr.requires_grad(ai)) mmat(gr.accum(ai)) += G.asDiagonal() * cmat(gr.value(bi));
                      if (gr.requires_grad(bi)) mmat(gr.accum(bi)) += G.asDiagonal() * cmat(gr.value(ai));
                  },
                  "rowwise_dot");
}

Var sum(Var a) {
    Graph& g = graph_of({a});
    Tensor out = Tensor::scalar(cvec(a.value()).sum());
    const int ai = a.id;
    return g.push(std::move(out), {ai},
                  [ai](Graph& gr, int self) { mvec(gr.accum(ai)).array() += gr.upstream(self)[0]; }, "sum");
}

Var mean(Var a) {
    Graph& g = graph_of({a});
    const Real n = static_cast<Real>(a.value().size());
    Tensor out = Tensor::scalar(cvec(a.value()).sum() / n);
    const int ai = a.id;
    return g.push(std::move(out), {ai},
                  [ai, n](Graph& gr, int self) { mvec(gr.accum(ai)).array() += gr.upstream(self)[0] / n; },
                  "mean");
}

Var squared_error(Var a, Var b) {
    Graph& g = graph_of({a, b});
    require_same_shape("squared_error", a.value(), b.value());
    Tensor out = Tensor::scalar((cvec(a.value()) - cvec(b.value())).squaredNorm());
    const int ai = a.id, bi = b.id;
    return g.push(std::move(out), {ai, bi},
                  [ai, bi](Graph& gr, int self) {
                      const Real up = gr.upstream(self)[0];
                      const auto diff = (cvec(gr.value(ai)) - cvec(gr.value(bi))).eval();
                      if (gr.requires_grad(ai)) mvec(gr.accum(ai)) += (2 * up) * diff;
                      if (gr.requires_grad(bi)) mvec(gr.accum(bi)) -= (2 * up) * diff;
                  },
                  "squared_error");
}

Var gather_rows(Var x, std::vector<int> rows) {
    Graph& g = graph_of({x});
    const Tensor& X = x.value();
    require_matrix_like("gather_rows", X);
    const int m = X.cols();
    const int k = static_cast<int>(rows.size());
    if (k == 0) throw std::invalid_argument("gather_rows: empty row list");
    Tensor out(Shape{k, m});
    for (int i = 0; i < k; ++i) {
        if (rows[i] < 0 || rows[i] >= X.rows()) {
            throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) + " out of range for " + shape_str(X.shape()));
        }
        std::copy_n(X.ptr() + static_cast<std::size_t>(rows[i]) * m, m, out.ptr() + static_cast<std::size_t>(i) * m);
    }
    const int xi = x.id;
    return g.push(std::move(out), {xi},
                  [xi, rows = std::move(rows), m](Graph& gr, int self) {
                      const Tensor& G = gr.upstream(self);
                      Tensor& gx = gr.accum(xi);
                      for (std::size_t i = 0; i < rows.size(); ++i) {
                          Real* dst = gx.ptr() + static_cast<std::size_t>(rows[i]) * m;
                          const Real* src = G.ptr() + i * m;
                          for (int j = 0; j < m; ++j) dst[j] += src[j];
                      }
                  },
                  "gather_rows");
}

Var slice_rows(Var x, int begin, int end) {
    const int n = x.value().rows();
    if (begin < 0 || end > n || begin >= end) {
        throw std::out_of_range("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                                shape_str(x.shape()));
    }
    std::vector<int> rows(static_cast<std::size_t>(end - begin));
    for (int i = begin; i < end; ++i) rows[i - begin] = i;
    return gather_rows(x, std::move(rows));
}

Var gather_elements(Var x, std::vector<int> flat) {
    Graph& g = graph_of({x});
    const Tensor& X = x.value();
    Tensor out(Shape{static_cast<int>(flat.size())});
    for (std::size_t i = 0; i < flat.size(); ++i) {
        if (flat[i] < 0 || static_cast<std::size_t>(flat[i]) >= X.size()) {
            throw std::out_of_range("gather_elements: index " + std::to_string(flat[i]) + " out of range for " +
                                    shape_str(X.shape()));
        }
        out[i] = X[static_cast<std::size_t>(flat[i])];
    }
    const int xi = x.id;
    return g.push(std::move(out), {xi},
                  [xi, flat = std::move(flat)](Graph& gr, int self) {
                      const Tensor& G = gr.upstream(self);
                      Tensor& gx = gr.accum(xi);
                      for (std::size_t i = 0; i < flat.size(); ++i) gx[static_cast<std::size_t>(flat[i])] += G[i];
                  },
                  "gather_elements");
}

Var reshape(Var x, Shape shape) {
    Graph& g = graph_of({x});
    Tensor out = x.value().reshaped(std::move(shape));
    const int xi = x.id;
    return g.push(std::move(out), {xi},
                  [xi](Graph& gr, int self) { mvec(gr.accum(xi)) += cvec(gr.upstream(self)); }, "reshape");
}

Var stop_gradient(Var x) {
    Graph& g = graph_of({x});
    return g.constant(x.value());
}

namespace {

void check_segments(const char* op, const Segments& qs, const Segments& ks) {
    if (qs.count() != ks.count()) {
        throw std::invalid_argument(std::string(op) + ": query/key segment counts differ (" + std::to_string(qs.count()) +
                                    " vs " + std::to_string(ks.count()) + ")");
    }
    for (int s = 0; s < qs.count(); ++s) {
        if (qs.length(s) > 0 && ks.length(s) == 0) {
            throw std::invalid_argument(std::string(op) + ": segment " + std::to_string(s) + " has queries but no keys");
        }
    }
}

std::vector<std::size_t> packed_offsets(const Segments& qs, const Segments& ks) {
    std::vector<std::size_t> off(static_cast<std::size_t>(qs.count()) + 1, 0);
    for (int s = 0; s < qs.count(); ++s) {
        off[s + 1] = off[s] + static_cast<std::size_t>(qs.length(s)) * static_cast<std::size_t>(ks.length(s));
    }
    return off;
}

}  // namespace

Var attention_weights(Var queries, Var keys, const Segments& qs, const Segments& ks, Real scale_factor) {
    Graph& g = graph_of({queries, keys});
    const Tensor& Q = queries.value();
    const Tensor& K = keys.value();
    check_segments("attention_weights", qs, ks);
    if (Q.rows() != qs.total() || K.rows() != ks.total() || Q.cols() != K.cols()) {
        shape_error("attention_weights", Q.shape(), K.shape());
    }
    const auto off = packed_offsets(qs, ks);
    const int d = Q.cols();
    if (off.back() == 0) throw std::invalid_argument("attention_weights: no query rows");
    Tensor out(Shape{static_cast<int>(off.back())});
    for (int s = 0; s < qs.count(); ++s) {
        const int nq = qs.length(s), nk = ks.length(s);
        if (nq == 0) continue;
        ConstMatMap Qs(Q.ptr() + static_cast<std::size_t>(qs.begin(s)) * d, nq, d);
        ConstMatMap Ks(K.ptr() + static_cast<std::size_t>(ks.begin(s)) * d, nk, d);
        MatMap W(out.ptr() + off[s], nq, nk);
        W.noalias() = scale_factor * (Qs * Ks.transpose());
        for (int r = 0; r < nq; ++r) {
            auto row = W.row(r);
            row.array() = (row.array() - row.maxCoeff()).exp();
            row /= row.sum();
        }
    }
    const int qi = queries.id, ki = keys.id;
    return g.push(std::move(out), {qi, ki},
                  [qi, ki, qs, ks, off, d, scale_factor](Graph& gr, int self) {
                      const Tensor& G = gr.upstream(self);
                      const Tensor& Wt = gr.value(self);
                      const Tensor& Q = gr.value(qi);
                      const Tensor& K = gr.value(ki);
                      const bool gq = gr.requires_grad(qi), gk = gr.requires_grad(ki);
                      for (int s = 0; s < qs.count(); ++s) {
                          const int nq = qs.length(s), nk = ks.length(s);
                          if (nq == 0) continue;
                          ConstMatMap Ws(Wt.ptr() + off[s], nq, nk);
                          ConstMatMap Gs(G.ptr() + off[s], nq, nk);
                          RowMat dlogits = Ws.cwiseProduct(Gs);
                          const Eigen::Matrix<Real, Eigen::Dynamic, 1> rowdot = dlogits.rowwise().sum();
                          dlogits -= (rowdot.asDiagonal() * Ws);
                          dlogits *= scale_factor;
                          if (gq) {
                              MatMap dQ(gr.accum(qi).ptr() + static_cast<std::size_t>(qs.begin(s)) * d, nq, d);
                              ConstMatMap Ks(K.ptr() + static_cast<std::size_t>(ks.begin(s)) * d, nk, d);
                              dQ.noalias() += dlogits * Ks;
                          }
                          if (gk) {
                              MatMap dK(gr.accum(ki).ptr() + static_cast<std::size_t>(ks.begin(s)) * d, nk, d);
                              ConstMatMap Qs(Q.ptr() + static_cast<std::size_t>(qs.begin(s)) * d, nq, d);
                              dK.noalias() += dlogits.transpose() * Qs;
                          }
                      }
                  },
                  "attention_weights");
}

Var attention_pool(Var weights, Var values, const Segments& qs, const Segments& ks) {
    Graph& g = graph_of({weights, values});
    const Tensor& W = weights.value();
    const Tensor& V = values.value();
    check_segments("attention_pool", qs, ks);
    const auto off = packed_offsets(qs, ks);
    if (W.size() != off.back() || V.rows() != ks.total()) shape_error("attention_pool", W.shape(), V.shape());
    require_matrix_like("attention_pool", V);
    const int dv = V.cols();
    Tensor out(Shape{qs.total(), dv});
    for (int s = 0; s < qs.count(); ++s) {
        const int nq = qs.length(s), nk = ks.length(s);
        if (nq == 0) continue;
        ConstMatMap Ws(W.ptr() + off[s], nq, nk);
        ConstMatMap Vs(V.ptr() + static_cast<std::size_t>(ks.begin(s)) * dv, nk, dv);
        MatMap O(out.ptr() + static_cast<std::size_t>(qs.begin(s)) * dv, nq, dv);
        O.noalias() = Ws * Vs;
    }
    const int wi = weights.id, vi = values.id;
    return g.push(std::move(out), {wi, vi},
                  [wi, vi, qs, ks, off, dv](Graph& gr, int self) {
                      const Tensor& G = gr.upstream(self);
                      const Tensor& W = gr.value(wi);
                      const Tensor& V = gr.value(vi);
                      const bool gw = gr.requires_grad(wi), gv = gr.requires_grad(vi);
                      for (int s = 0; s < qs.count(); ++s) {
                          const int nq = qs.length(s), nk = ks.length(s);
                          if (nq == 0) continue;
                          ConstMatMap Gs(G.ptr() + static_cast<std::size_t>(qs.begin(s)) * dv, nq, dv);
                          if (gw) {
                              MatMap dW(gr.accum(wi).ptr() + off[s], nq, nk);
                              ConstMatMap Vs(V.ptr() + static_cast<std::size_t>(ks.begin(s)) * dv, nk, dv);
                              dW.noalias() += Gs * Vs.transpose();
                          }
                          if (gv) {
                              MatMap dV(gr.accum(vi).ptr() + static_cast<std::size_t>(ks.begin(s)) * dv, nk, dv);
                              ConstMatMap Ws(W.ptr() + off[s], nq, nk);
                              dV.noalias() += Ws.transpose() * Gs;
                          }
                      }
                  },
                  "attention_pool");
}

}  // namespace load::core
