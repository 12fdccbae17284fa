#include "g3dgen/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace g3dgen {

namespace {

// ln(1 + e^x) without overflow.
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Var Tape::dense(Var x, Var w, Var b) {
    const Matrix& xv = value(x);
    const Matrix& wv = value(w);
    const Matrix& bv = value(b);
    if (xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols())
        throw std::invalid_argument("dense: shape mismatch");
    // Each output row is computed by a fixed-order scalar reduction so that a
    // given input row yields bitwise-identical output no matter where it sits
    // in the batch. A blocked GEMM rounds panel tails differently by row
    // position, which would break exact permutation equivariance downstream.
    const long nr = xv.rows(), nc = wv.cols(), nk = xv.cols();
    Matrix xtr = xv.transpose();
    Matrix out(nr, nc);
    for (long i = 0; i < nr; ++i) {
        const double* xp = xtr.data() + i * nk;
        for (long j = 0; j < nc; ++j) {
            const double* wp = wv.data() + j * nk;
            double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
            long k = 0;
            for (; k + 4 <= nk; k += 4) {
                a0 += xp[k] * wp[k];
                a1 += xp[k + 1] * wp[k + 1];
                a2 += xp[k + 2] * wp[k + 2];
                a3 += xp[k + 3] * wp[k + 3];
            }
            for (; k < nk; ++k)
                a0 += xp[k] * wp[k];
            out(i, j) = ((a0 + a1) + (a2 + a3)) + bv(0, j);
        }
    }
    bool ng = needs(x) || needs(w) || needs(b);
    return push(std::move(out), ng, [x, w, b](Tape& t, const Matrix& g) {
        if (t.needs(x))
            t.accum(x, g * t.value(w).transpose());
        if (t.needs(w))
            t.accum(w, t.value(x).transpose() * g);
        if (t.needs(b))
            t.accum(b, g.colwise().sum());
    });
}

Var Tape::ssp(Var x) {
    Matrix out = value(x).unaryExpr([](double v) { return softplus(v) - M_LN2; });
    return push(std::move(out), needs(x), [x](Tape& t, const Matrix& g) {
        Matrix d = t.value(x).unaryExpr([](double v) { return sigmoid(v); });
        t.accum(x, g.cwiseProduct(d));
    });
}

Var Tape::add(Var x, Var y) {
    if (value(x).rows() != value(y).rows() || value(x).cols() != value(y).cols())
        throw std::invalid_argument("add: shape mismatch");
    Matrix out = value(x) + value(y);
    bool ng = needs(x) || needs(y);
    return push(std::move(out), ng, [x, y](Tape& t, const Matrix& g) {
        t.accum(x, g);
        t.accum(y, g);
    });
}

Var Tape::axpby(double a, Var x, double b, Var y) {
    if (value(x).rows() != value(y).rows() || value(x).cols() != value(y).cols())
        throw std::invalid_argument("axpby: shape mismatch");
    Matrix out = a * value(x) + b * value(y);
    bool ng = needs(x) || needs(y);
    return push(std::move(out), ng, [a, x, b, y](Tape& t, const Matrix& g) {
        if (t.needs(x))
            t.accum(x, a * g);
        if (t.needs(y))
            t.accum(y, b * g);
    });
}

Var Tape::mul_rowbcast(Var x, Var e) {
    const Matrix& xv = value(x);
    const Matrix& ev = value(e);
    if (ev.rows() != 1 || ev.cols() != xv.cols())
        throw std::invalid_argument("mul_rowbcast: e must be 1 x cols(x)");
    Matrix out = xv.array().rowwise() * ev.row(0).array();
    bool ng = needs(x) || needs(e);
    return push(std::move(out), ng, [x, e](Tape& t, const Matrix& g) {
        if (t.needs(x))
            t.accum(x, g.array().rowwise() * t.value(e).row(0).array());
        if (t.needs(e))
            t.accum(e, g.cwiseProduct(t.value(x)).colwise().sum());
    });
}

Var Tape::row(Var m, int k) {
    const Matrix& mv = value(m);
    if (k < 0 || k >= mv.rows())
        throw std::out_of_range("row: index out of range");
    Matrix out = mv.row(k);
    return push(std::move(out), needs(m), [m, k](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(t.value(m).rows(), t.value(m).cols());
        full.row(k) = g.row(0);
        t.accum(m, full);
    });
}

Var Tape::gather_rows(Var m, std::vector<int> idx) {
    const Matrix& mv = value(m);
    Matrix out(static_cast<long>(idx.size()), mv.cols());
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= mv.rows())
            throw std::out_of_range("gather_rows: index out of range");
        out.row(static_cast<long>(r)) = mv.row(idx[r]);
    }
    return push(std::move(out), needs(m), [m, idx = std::move(idx)](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(t.value(m).rows(), t.value(m).cols());
        for (size_t r = 0; r < idx.size(); ++r)
            full.row(idx[r]) += g.row(static_cast<long>(r));
        t.accum(m, full);
    });
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
    if (xs.empty())
        throw std::invalid_argument("concat_cols: empty input");
    long rows = value(xs[0]).rows();
    long cols = 0;
    bool ng = false;
    for (Var v : xs) {
        if (value(v).rows() != rows)
            throw std::invalid_argument("concat_cols: row counts differ");
        cols += value(v).cols();
        ng = ng || needs(v);
    }
    Matrix out(rows, cols);
    long off = 0;
    for (Var v : xs) {
        out.middleCols(off, value(v).cols()) = value(v);
        off += value(v).cols();
    }
    return push(std::move(out), ng, [xs](Tape& t, const Matrix& g) {
        long off = 0;
        for (Var v : xs) {
            long w = t.value(v).cols();
            if (t.needs(v))
                t.accum(v, g.middleCols(off, w));
            off += w;
        }
    });
}

Var Tape::log_softmax_rows(Var x) {
    const Matrix& xv = value(x);
    Matrix out(xv.rows(), xv.cols());
    for (long i = 0; i < xv.rows(); ++i) {
        double m = xv.row(i).maxCoeff();
        double lse = m + std::log((xv.row(i).array() - m).exp().sum());
        out.row(i) = xv.row(i).array() - lse;
    }
    Var y = push(std::move(out), needs(x), nullptr);
    nodes_[y.id].pull = [x, y](Tape& t, const Matrix& g) {
        const Matrix& yv = t.value(y);
        Matrix gx(g.rows(), g.cols());
        for (long i = 0; i < g.rows(); ++i) {
            double s = g.row(i).sum();
            gx.row(i) = g.row(i).array() - yv.row(i).array().exp() * s;
        }
        t.accum(x, gx);
    };
    return y;
}

Var Tape::col_sum(Var x) {
    Matrix out = value(x).colwise().sum();
    return push(std::move(out), needs(x), [x](Tape& t, const Matrix& g) {
        t.accum(x, g.row(0).replicate(t.value(x).rows(), 1));
    });
}

Var Tape::weighted_sum(Var x, Matrix weights) {
    const Matrix& xv = value(x);
    if (xv.rows() != weights.rows() || xv.cols() != weights.cols())
        throw std::invalid_argument("weighted_sum: shape mismatch");
    Matrix out(1, 1);
    out(0, 0) = xv.cwiseProduct(weights).sum();
    return push(std::move(out), needs(x),
                [x, w = std::move(weights)](Tape& t, const Matrix& g) {
                    t.accum(x, g(0, 0) * w);
                });
}

Var Tape::pair_conv(Var v, Var f, int n) {
    const Matrix& vv = value(v);
    const Matrix& fv = value(f);
    long n_features = vv.cols();
    long n_pairs = static_cast<long>(n) * (n - 1) / 2;
    if (vv.rows() != n || fv.rows() != n_pairs || fv.cols() != n_features)
        throw std::invalid_argument("pair_conv: shape mismatch");

    Matrix out = Matrix::Zero(n, n_features);
    if (n > 1) {
        std::vector<long> rows(n);
        std::vector<double> buf(static_cast<size_t>(n) - 1);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                if (j != i)
                    rows[j] = pair_row(i, j, n);
            for (long c = 0; c < n_features; ++c) {
                size_t k = 0;
                for (int j = 0; j < n; ++j)
                    if (j != i)
                        buf[k++] = vv(j, c) * fv(rows[j], c);
                // Fixed accumulation order makes the sum independent of how
                // the input rows were ordered.
                std::sort(buf.begin(), buf.end());
                double acc = 0.0;
                for (double t : buf)
                    acc += t;
                out(i, c) = acc;
            }
        }
    }
    bool ng = needs(v) || needs(f);
    return push(std::move(out), ng, [v, f, n](Tape& t, const Matrix& g) {
        const Matrix& vv = t.value(v);
        const Matrix& fv = t.value(f);
        if (t.needs(v)) {
            Matrix gv = Matrix::Zero(vv.rows(), vv.cols());
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    if (i != j)
                        gv.row(j) += g.row(i).cwiseProduct(fv.row(pair_row(i, j, n)));
            t.accum(v, gv);
        }
        if (t.needs(f)) {
            Matrix gf = Matrix::Zero(fv.rows(), fv.cols());
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    long p = pair_row(i, j, n);
                    gf.row(p) += g.row(i).cwiseProduct(vv.row(j));
                    gf.row(p) += g.row(j).cwiseProduct(vv.row(i));
                }
            t.accum(f, gf);
        }
    });
}

void Tape::backward(Var loss) {
    if (used_)
        throw std::logic_error("backward: tape already differentiated");
    used_ = true;
    Node& top = nodes_[loss.id];
    if (top.value.rows() != 1 || top.value.cols() != 1)
        throw std::invalid_argument("backward: loss must be 1x1");
    if (!top.needs_grad)
        return;
    top.grad = Matrix::Ones(1, 1);
    for (int i = loss.id; i >= 0; --i) {
        Node& node = nodes_[i];
        if (node.needs_grad && node.grad.size() != 0 && node.pull)
            node.pull(*this, node.grad);
    }
}

} // namespace g3dgen
