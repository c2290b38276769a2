#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "tfcast/errors.hpp"
#include "tfcast/gradient_profile.hpp"
#include "tfcast/linalg.hpp"

using namespace tfcast;
using tfcast::testing::Gen;

TEST_CASE("matmul of a 2x2 by a column") {
  const Matrix c = matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{5}, {6}});
  CHECK(c == Matrix{{17}, {39}});
}

TEST_CASE("matmul rejects inner-dimension mismatch and names both shapes") {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
  }
}

TEST_CASE("matmul kernels agree with the triple loop on random shapes") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Gen gen(seed);
    const std::size_t n = gen.size(1, 7), k = gen.size(1, 7), m = gen.size(1, 7);
    const Matrix a = gen.matrix(n, k), b = gen.matrix(k, m);
    const Matrix expected = testing::naive_matmul(a, b);
    CHECK(testing::max_abs_difference(matmul(a, b), expected) < 1e-14);
    CHECK(testing::max_abs_difference(matmul_tn(testing::naive_transpose(a), b), expected) < 1e-14);
    CHECK(testing::max_abs_difference(matmul_nt(a, testing::naive_transpose(b)), expected) < 1e-14);

    Matrix acc = gen.matrix(n, m);
    const Matrix before = acc;
    matmul_nt_accumulate(a, testing::naive_transpose(b), acc);
    CHECK(testing::max_abs_difference(acc, before + expected) < 1e-14);
    CHECK(transpose(a) == testing::naive_transpose(a));
  }
}

TEST_CASE("hadamard product") {
  CHECK(hadamard(Matrix{{0.5, 2}}, Matrix{{4, 0.25}}) == Matrix{{2, 0.5}});
  CHECK_THROWS_AS(hadamard(Matrix(1, 2), Matrix(2, 1)), DimensionError);
}

TEST_CASE("concat_rows stacks in order") {
  const Matrix c = concat_rows(Matrix{{1}, {2}}, Matrix{{3}, {4}, {5}});
  CHECK(c == Matrix{{1}, {2}, {3}, {4}, {5}});
  CHECK_THROWS_AS(concat_rows(Matrix(2, 1), Matrix(2, 2)), DimensionError);
  CHECK(concat_rows(Matrix(0, 0), Matrix{{7}}) == Matrix{{7}});
}

TEST_CASE("element-wise arithmetic, broadcasting and reductions") {
  const Matrix a{{1, 2}, {3, 4}};
  CHECK(a + a == Matrix{{2, 4}, {6, 8}});
  CHECK(a - a == Matrix(2, 2));
  CHECK(2.0 * a == a * 2.0);
  CHECK(add_column(a, Matrix{{10}, {20}}) == Matrix{{11, 12}, {23, 24}});
  CHECK(row_sums(a) == Matrix{{3}, {7}});
  CHECK_THROWS_AS(add_column(a, Matrix{{1}}), DimensionError);
  Matrix b = a;
  CHECK_THROWS_AS(b += Matrix(1, 2), DimensionError);
}

TEST_CASE("construction and row blocks") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), DimensionError);
  CHECK(Matrix::identity(2) == Matrix{{1, 0}, {0, 1}});

  Matrix m{{1, 2}, {3, 4}, {5, 6}};
  CHECK(m.row_block(1, 2) == Matrix{{3, 4}, {5, 6}});
  m.set_row_block(0, Matrix{{9, 9}});
  CHECK(m(0, 1) == 9);
  CHECK_THROWS_AS(m.row_block(2, 2), DimensionError);
  CHECK_THROWS_AS(m.set_row_block(2, Matrix(2, 2)), DimensionError);
}

TEST_CASE("sigmoid and tanh against high-precision values") {
  CHECK(sigmoid(0.5) == doctest::Approx(0.6224593312018546).epsilon(1e-12));
  CHECK(std::tanh(0.5) == doctest::Approx(0.46211715726000974).epsilon(1e-12));
  CHECK(sigmoid(20.0) == doctest::Approx(0.9999999979388463).epsilon(1e-15));
  // Large magnitudes stay finite in both directions.
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(relu(Matrix{{-1, 0, 2}}) == Matrix{{0, 0, 2}});
}

TEST_CASE("sigmoid symmetry and derivative identities hold on random inputs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Gen gen(seed);
    Matrix x = gen.matrix(3, 4, -3.0, 3.0);
    const Matrix s = sigmoid(x);
    const Matrix s_neg = sigmoid(-1.0 * x);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(s[k] + s_neg[k] == doctest::Approx(1.0).epsilon(1e-15));

    // d/dx of sum(r ⊙ act(x)) is r ⊙ act'(x).
    const Matrix r = gen.matrix(3, 4);
    const Matrix num_s = testing::numeric_gradient([&] { return testing::weighted_sum(sigmoid(x), r); }, x);
    const Matrix num_t = testing::numeric_gradient([&] { return testing::weighted_sum(tanh(x), r); }, x);
    CHECK(testing::max_relative_error(hadamard(r, sigmoid_derivative(x)), num_s, 1e-3) < 1e-6);
    CHECK(testing::max_relative_error(hadamard(r, tanh_derivative(x)), num_t, 1e-3) < 1e-6);
    CHECK(sigmoid_derivative_from_output(s) == sigmoid_derivative(x));
  }
}

TEST_CASE("global L2 norm") {
  const Matrix a{{3, 4}};
  CHECK(l2_norm({&a}) == 5.0);
  const Matrix three{{3}}, four{{4}};
  CHECK(l2_norm({&three, &four}) == 5.0);
  CHECK_THROWS_AS(l2_norm(std::initializer_list<const Matrix*>{}), UsageError);
  CHECK(frobenius_norm(Matrix{{1, 2}, {2, 4}}) == 5.0);
}

TEST_CASE("spectral norm by power iteration") {
  CHECK(spectral_norm(Matrix{{3, 0}, {0, 1}}) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(spectral_norm(Matrix{{0, 2}, {0, 0}}) == doctest::Approx(2.0).epsilon(1e-10));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const double scale = 0.25 + 0.1 * static_cast<double>(seed);
    const Matrix q = scaled_orthogonal(6, scale, rng);
    CHECK(spectral_norm(q) == doctest::Approx(scale).epsilon(1e-9));
  }
}
