#include <doctest.h>

#include "esc/autograd.hpp"
#include "esc/error.hpp"
#include "gradcheck.hpp"

using namespace esc;
using namespace esc::ag;
using gradcheck::random_matrix;

namespace {

double check(std::vector<Matrix> inits, const gradcheck::Build& f) {
    ParameterStore ps;
    for (std::size_t i = 0; i < inits.size(); ++i) ps.add("p" + std::to_string(i), std::move(inits[i]));
    return gradcheck::max_error(ps, f);
}

constexpr double kTol = 1e-6;

} // namespace

TEST_CASE("parameter store") {
    ParameterStore ps;
    const auto a = ps.add("a", Matrix::Zero(2, 3));
    ps.add("b", Matrix::Zero(1, 4));
    CHECK(ps.scalar_count() == 10);
    CHECK(ps.find("a") == a);
    CHECK_FALSE(ps.find("c"));
    CHECK_THROWS_AS(ps.add("a", Matrix::Zero(1, 1)), InvalidArgument);
}

TEST_CASE("elementwise and matrix ops") {
    CHECK(check({random_matrix(3, 4, 1), random_matrix(4, 2, 2)},
                [](Tape&, const std::vector<Var>& p) { return matmul(p[0], p[1]); }) < kTol);
    CHECK(check({random_matrix(3, 4, 1), random_matrix(5, 4, 2)},
                [](Tape&, const std::vector<Var>& p) { return matmul_nt(p[0], p[1]); }) < kTol);
    CHECK(check({random_matrix(3, 4, 1), random_matrix(3, 4, 2)},
                [](Tape&, const std::vector<Var>& p) { return add(p[0], p[1]); }) < kTol);
    CHECK(check({random_matrix(3, 4, 1), random_matrix(1, 4, 2)},
                [](Tape&, const std::vector<Var>& p) { return add_row(p[0], p[1]); }) < kTol);
    CHECK(check({random_matrix(3, 4, 1)}, [](Tape&, const std::vector<Var>& p) { return scale(p[0], -2.5); }) <
          kTol);
    CHECK(check({random_matrix(3, 4, 1)}, [](Tape&, const std::vector<Var>& p) { return gelu(p[0]); }) < kTol);
    CHECK(check({random_matrix(3, 4, 1)}, [](Tape&, const std::vector<Var>& p) { return tanh(p[0]); }) < kTol);
    CHECK(check({random_matrix(3, 4, 1)}, [](Tape&, const std::vector<Var>& p) { return softmax_rows(p[0]); }) <
          kTol);
}

TEST_CASE("layer norm") {
    CHECK(check({random_matrix(3, 6, 1), random_matrix(1, 6, 2), random_matrix(1, 6, 3)},
                [](Tape&, const std::vector<Var>& p) { return layer_norm(p[0], p[1], p[2]); }) < 1e-5);
}

TEST_CASE("row plumbing") {
    CHECK(check({random_matrix(5, 3, 1)},
                [](Tape&, const std::vector<Var>& p) { return gather_rows(p[0], {4, 0, 4, 2}); }) < kTol);
    CHECK(check({random_matrix(5, 3, 1)}, [](Tape&, const std::vector<Var>& p) { return slice_rows(p[0], 1, 3); }) <
          kTol);
    CHECK(check({random_matrix(2, 3, 1), random_matrix(1, 3, 2)},
                [](Tape&, const std::vector<Var>& p) { return concat_rows({p[0], p[1], p[0]}); }) < kTol);
    CHECK(check({random_matrix(4, 3, 1)}, [](Tape&, const std::vector<Var>& p) { return max_rows(p[0]); }) < kTol);
    const std::vector<char> valid{1, 0, 1, 0};
    CHECK(check({random_matrix(4, 3, 1)},
                [&](Tape&, const std::vector<Var>& p) { return max_rows(p[0], &valid); }) < kTol);
}

TEST_CASE("max_rows picks per-column maxima over valid rows") {
    ParameterStore ps;
    Tape t(ps, false);
    Matrix x(3, 2);
    x << 1, 9, 5, 2, 3, 4;
    CHECK(max_rows(t.constant(x)).value() == (Matrix(1, 2) << 5, 9).finished());
    const std::vector<char> valid{1, 0, 1};
    CHECK(max_rows(t.constant(x), &valid).value() == (Matrix(1, 2) << 3, 9).finished());
}

TEST_CASE("attention gradients") {
    const std::vector<char> kv{1, 1, 0, 1};
    for (bool causal : {false, true}) {
        CAPTURE(causal);
        CHECK(check({random_matrix(4, 6, 1), random_matrix(4, 6, 2), random_matrix(4, 6, 3)},
                    [&](Tape&, const std::vector<Var>& p) { return attention(p[0], p[1], p[2], 2, &kv, causal); }) <
              1e-5);
    }
    CHECK(check({random_matrix(3, 4, 1), random_matrix(5, 4, 2), random_matrix(5, 4, 3)},
                [&](Tape&, const std::vector<Var>& p) { return attention(p[0], p[1], p[2], 1, nullptr, false); }) <
          1e-5);
}

TEST_CASE("masked keys get zero weight; no visible key gives a zero row") {
    ParameterStore ps;
    Tape t(ps, false);
    const Matrix q = random_matrix(2, 2, 1);
    Matrix k = random_matrix(2, 2, 2);
    Matrix v(2, 2);
    v << 1, 2, 1000, 1000;
    const std::vector<char> first{1, 0};
    const Matrix out = attention(t.constant(q), t.constant(k), t.constant(v), 1, &first, false).value();
    CHECK(out(0, 0) == doctest::Approx(1.0));
    CHECK(out(1, 1) == doctest::Approx(2.0));
    const std::vector<char> none{0, 0};
    const Matrix z = attention(t.constant(q), t.constant(k), t.constant(v), 1, &none, false).value();
    CHECK(z.isZero());
}

TEST_CASE("cross entropy") {
    CHECK(check({random_matrix(3, 5, 1)},
                [](Tape&, const std::vector<Var>& p) { return cross_entropy(p[0], {1, -1, 4}); }) < kTol);
    ParameterStore ps;
    Tape t(ps, false);
    CHECK(cross_entropy(t.constant(Matrix::Zero(2, 8)), {0, 5}).scalar() == doctest::Approx(std::log(8.0)));
}

TEST_CASE("lincomb and zero coefficients") {
    CHECK(check({random_matrix(1, 1, 1), random_matrix(1, 1, 2)},
                [](Tape&, const std::vector<Var>& p) { return lincomb({p[0], p[1]}, {1.0, 0.3}); }) < kTol);
    ParameterStore ps;
    const auto a = ps.add("a", random_matrix(2, 3, 3));
    Gradients g(ps);
    Tape t(ps);
    auto s = cross_entropy(t.param(a), {0, 1});
    t.backward(lincomb({s}, {0.0}), g);
    REQUIRE(g.get(a));
    CHECK(g.get(a)->isZero(0.0));
}

TEST_CASE("dropout") {
    std::mt19937_64 rng(3);
    CHECK(check({random_matrix(3, 4, 1)}, [&](Tape&, const std::vector<Var>& p) {
              std::mt19937_64 fixed(5);
              return dropout(p[0], 0.5, fixed);
          }) < kTol);
    ParameterStore ps;
    Tape t(ps, false);
    const Matrix x = Matrix::Ones(50, 50);
    const Matrix y = dropout(t.constant(x), 0.3, rng).value();
    const double kept = static_cast<double>((y.array() != 0.0).count()) / 2500.0;
    CHECK(kept == doctest::Approx(0.7).epsilon(0.05));
    CHECK((y.array() == 0.0 || (y.array() - 1.0 / 0.7).abs() < 1e-12).all());
}

TEST_CASE("gradients buffer helpers") {
    ParameterStore ps;
    const auto a = ps.add("a", Matrix::Ones(1, 2));
    Gradients g(ps), h(ps);
    CHECK(g.get(a) == nullptr);
    g.at(a) << 3, 4;
    CHECK(g.squared_norm() == 25.0);
    h.add(g);
    h.scale(2.0);
    CHECK((*h.get(a))(0, 1) == 8.0);
    g.zero();
    CHECK(g.squared_norm() == 0.0);
}

TEST_CASE("backward needs a scalar on a recording tape") {
    ParameterStore ps;
    const auto a = ps.add("a", Matrix::Ones(2, 2));
    Gradients g(ps);
    Tape t(ps);
    CHECK_THROWS_AS(t.backward(t.param(a), g), InvalidArgument);
    Tape off(ps, false);
    CHECK_THROWS_AS(off.backward(cross_entropy(off.param(a), {0, 1}), g), InvalidArgument);
}
