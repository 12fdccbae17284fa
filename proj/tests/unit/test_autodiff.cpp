#include <doctest.h>

#include <g3dgen/autodiff.hpp>
#include <g3dgen/rng.hpp>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

using namespace g3dgen;

namespace {

Matrix random_matrix(RngStream& r, long rows, long cols) {
    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) m(i, j) = r.normal();
    return m;
}

using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares analytic leaf gradients against central differences on a handful
// of sampled entries of every input.
void check_gradients(const BuildFn& build, std::vector<Matrix> inputs,
                     double eps = 1e-6, double tol = 1e-5) {
    Tape tape;
    std::vector<Var> vars;
    for (const Matrix& m : inputs) vars.push_back(tape.leaf(m));
    Var loss = build(tape, vars);
    REQUIRE(tape.value(loss).size() == 1);
    tape.backward(loss);
    std::vector<Matrix> grads;
    for (Var v : vars) grads.push_back(tape.grad(v));

    auto eval = [&]() {
        Tape t2;
        std::vector<Var> vs;
        for (const Matrix& m : inputs) vs.push_back(t2.constant(m));
        return t2.value(build(t2, vs))(0, 0);
    };

    RngStream pick(777);
    for (size_t t = 0; t < inputs.size(); ++t) {
        Matrix& m = inputs[t];
        if (m.size() == 0) continue;
        int samples = std::min<long>(8, m.size());
        for (int s = 0; s < samples; ++s) {
            long idx = pick.uniform_int(static_cast<int>(m.size()));
            long i = idx / m.cols();
            long j = idx % m.cols();
            double orig = m(i, j);
            m(i, j) = orig + eps;
            double fp = eval();
            m(i, j) = orig - eps;
            double fm = eval();
            m(i, j) = orig;
            double numeric = (fp - fm) / (2.0 * eps);
            double analytic = grads[t].size() != 0 ? grads[t](i, j) : 0.0;
            double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            CHECK(rel < tol);
        }
    }
}

} // namespace

TEST_CASE("dense gradients match finite differences") {
    RngStream r(1);
    check_gradients(
        [](Tape& t, const std::vector<Var>& v) {
            return t.weighted_sum(t.dense(v[0], v[1], v[2]), Matrix::Ones(4, 3));
        },
        {random_matrix(r, 4, 5), random_matrix(r, 5, 3), random_matrix(r, 1, 3)});
}

TEST_CASE("ssp gradients match finite differences") {
    RngStream r(2);
    check_gradients(
        [&r](Tape& t, const std::vector<Var>& v) {
            return t.weighted_sum(t.ssp(v[0]), Matrix::Constant(3, 4, 0.7));
        },
        {random_matrix(r, 3, 4)});
}

TEST_CASE("ssp value is the shifted softplus") {
    Tape t;
    Matrix x(1, 3);
    x << 0.0, 40.0, -40.0;
    Var y = t.ssp(t.constant(x));
    CHECK(t.value(y)(0, 0) == doctest::Approx(0.0));
    CHECK(t.value(y)(0, 1) == doctest::Approx(40.0 - M_LN2));
    CHECK(t.value(y)(0, 2) == doctest::Approx(-M_LN2));
}

TEST_CASE("add and axpby gradients match finite differences") {
    RngStream r(3);
    check_gradients(
        [](Tape& t, const std::vector<Var>& v) {
            Var s = t.add(v[0], v[1]);
            Var a = t.axpby(2.5, s, -0.5, v[1]);
            return t.weighted_sum(a, Matrix::Ones(3, 3));
        },
        {random_matrix(r, 3, 3), random_matrix(r, 3, 3)});
}

TEST_CASE("mul_rowbcast gradients match finite differences") {
    RngStream r(4);
    check_gradients(
        [](Tape& t, const std::vector<Var>& v) {
            return t.weighted_sum(t.mul_rowbcast(v[0], v[1]), Matrix::Ones(4, 3));
        },
        {random_matrix(r, 4, 3), random_matrix(r, 1, 3)});
}

TEST_CASE("row and gather_rows route gradients to the right rows") {
    RngStream r(5);
    check_gradients(
        [](Tape& t, const std::vector<Var>& v) {
            Var picked = t.gather_rows(v[0], {2, 0, 2, 3});
            Var one = t.row(v[0], 1);
            Var total = t.add(t.col_sum(picked), one);
            return t.weighted_sum(total, Matrix::Ones(1, 4));
        },
        {random_matrix(r, 5, 4)});
}

TEST_CASE("gather_rows accumulates duplicate indices") {
    Tape t;
    Matrix m = Matrix::Identity(3, 3);
    Var v = t.leaf(m);
    Var g = t.gather_rows(v, {1, 1, 1});
    Var loss = t.weighted_sum(g, Matrix::Ones(3, 3));
    t.backward(loss);
    CHECK(t.grad(v)(1, 0) == doctest::Approx(3.0));
    CHECK(t.grad(v)(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("concat_cols gradients match finite differences") {
    RngStream r(6);
    check_gradients(
        [](Tape& t, const std::vector<Var>& v) {
            Var c = t.concat_cols({v[0], v[1], v[2]});
            return t.weighted_sum(c, Matrix::Ones(2, 6));
        },
        {random_matrix(r, 2, 1), random_matrix(r, 2, 2), random_matrix(r, 2, 3)});
}

TEST_CASE("log_softmax_rows normalizes rows and differentiates") {
    RngStream r(7);
    Tape t;
    Matrix x = random_matrix(r, 3, 5);
    Var y = t.log_softmax_rows(t.constant(x));
    for (long i = 0; i < 3; ++i)
        CHECK(t.value(y).row(i).array().exp().sum() == doctest::Approx(1.0).epsilon(1e-12));

    Matrix w = random_matrix(r, 3, 5);
    check_gradients(
        [&w](Tape& tt, const std::vector<Var>& v) {
            return tt.weighted_sum(tt.log_softmax_rows(v[0]), w);
        },
        {x});
}

TEST_CASE("log_softmax_rows is stable for extreme inputs") {
    Tape t;
    Matrix x(1, 3);
    x << 1000.0, 0.0, -1000.0;
    Var y = t.log_softmax_rows(t.constant(x));
    CHECK(std::isfinite(t.value(y)(0, 0)));
    CHECK(t.value(y)(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("col_sum and weighted_sum gradients match finite differences") {
    RngStream r(8);
    Matrix w = random_matrix(r, 1, 4);
    check_gradients(
        [&w](Tape& t, const std::vector<Var>& v) {
            return t.weighted_sum(t.col_sum(v[0]), w);
        },
        {random_matrix(r, 5, 4)});
}

TEST_CASE("pair_conv matches a direct neighbor sum") {
    RngStream r(9);
    const int n = 5;
    const int F = 3;
    Matrix v = random_matrix(r, n, F);
    Matrix f = random_matrix(r, n * (n - 1) / 2, F);
    Tape t;
    Var out = t.pair_conv(t.constant(v), t.constant(f), n);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < F; ++c) {
            double want = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i) want += v(j, c) * f(pair_row(i, j, n), c);
            CHECK(t.value(out)(i, c) == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("pair_conv gradients match finite differences") {
    RngStream r(10);
    const int n = 4;
    Matrix w = random_matrix(r, n, 3);
    check_gradients(
        [n, &w](Tape& t, const std::vector<Var>& v) {
            return t.weighted_sum(t.pair_conv(v[0], v[1], n), w);
        },
        {random_matrix(r, n, 3), random_matrix(r, n * (n - 1) / 2, 3)});
}

TEST_CASE("pair_conv of a single point is zero") {
    Tape t;
    Var out = t.pair_conv(t.constant(Matrix::Ones(1, 4)), t.constant(Matrix(0, 4)), 1);
    CHECK(t.value(out).isZero(0.0));
}

TEST_CASE("pair_conv output is bitwise stable under row permutation") {
    RngStream r(11);
    const int n = 6;
    const int F = 4;
    Matrix v = random_matrix(r, n, F);
    Matrix f = random_matrix(r, n * (n - 1) / 2, F);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    r.shuffle(perm);

    Matrix vp(n, F);
    Matrix fp(f.rows(), F);
    for (int i = 0; i < n; ++i) vp.row(perm[i]) = v.row(i);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            fp.row(pair_row(perm[i], perm[j], n)) = f.row(pair_row(i, j, n));

    Tape t1, t2;
    Matrix a = t1.value(t1.pair_conv(t1.constant(v), t1.constant(f), n));
    Matrix b = t2.value(t2.pair_conv(t2.constant(vp), t2.constant(fp), n));
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < F; ++c) CHECK(a(i, c) == b(perm[i], c));
}

TEST_CASE("backward can only run once per tape") {
    Tape t;
    Var x = t.leaf(Matrix::Ones(1, 1));
    Var loss = t.weighted_sum(x, Matrix::Ones(1, 1));
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), std::logic_error);
}

TEST_CASE("constants receive no gradient") {
    Tape t;
    Var c = t.constant(Matrix::Ones(2, 2));
    Var x = t.leaf(Matrix::Ones(2, 2));
    Var loss = t.weighted_sum(t.add(c, x), Matrix::Ones(2, 2));
    t.backward(loss);
    CHECK(t.grad(c).size() == 0);
    CHECK(t.grad(x)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("shape mismatches are rejected") {
    Tape t;
    Var a = t.constant(Matrix::Ones(2, 3));
    Var b = t.constant(Matrix::Ones(2, 2));
    CHECK_THROWS_AS((void)t.add(a, b), std::invalid_argument);
    CHECK_THROWS_AS((void)t.dense(a, b, b), std::invalid_argument);
    CHECK_THROWS_AS((void)t.row(a, 5), std::out_of_range);
    CHECK_THROWS_AS((void)t.backward(a), std::invalid_argument);
}

TEST_CASE("pair_row enumerates unordered pairs lexicographically") {
    CHECK(pair_row(0, 1, 4) == 0);
    CHECK(pair_row(1, 0, 4) == 0);
    CHECK(pair_row(0, 3, 4) == 2);
    CHECK(pair_row(1, 2, 4) == 3);
    CHECK(pair_row(2, 3, 4) == 5);
    int n = 9;
    long k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) CHECK(pair_row(i, j, n) == k++);
}
