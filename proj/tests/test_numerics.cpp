#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "seqlab/num/linalg.hpp"
#include "seqlab/num/matrix.hpp"
#include "seqlab/num/rng.hpp"
#include "seqlab/num/tape.hpp"

using namespace seqlab::num;

namespace {

// Central finite differences over every entry of every parameter; the oracle
// against which analytic gradients are judged.
double fd_gradient(const std::function<double()>& eval, double* slot, double h) {
  const double saved = *slot;
  *slot = saved + h;
  const double up = eval();
  *slot = saved - h;
  const double down = eval();
  *slot = saved;
  return (up - down) / (2.0 * h);
}

double rel_err(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
  return std::abs(got - want) / denom;
}

// Builds a scalar loss from `params` via `build`, then checks every analytic
// parameter gradient against central differences.
void check_gradients(std::vector<Matrix>& params,
                     const std::function<ValueId(Tape&, const std::vector<ValueId>&)>& build,
                     double tolerance = 1e-5, double h = 1e-5) {
  auto eval = [&]() {
    Tape tape;
    std::vector<ValueId> ids;
    for (const Matrix& p : params) ids.push_back(tape.param(p));
    return tape.scalar(build(tape, ids));
  };

  Tape tape;
  std::vector<ValueId> ids;
  for (const Matrix& p : params) ids.push_back(tape.param(p));
  ValueId loss = build(tape, ids);
  tape.backward(loss);

  for (std::size_t p = 0; p < params.size(); ++p) {
    const Matrix& grad = tape.grad(ids[p]);
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double analytic = grad.data()[i];
      const double numeric = fd_gradient(eval, params[p].data() + i, h);
      CAPTURE(p);
      CAPTURE(i);
      CHECK(rel_err(analytic, numeric) <= tolerance);
    }
  }
}

}  // namespace

TEST_CASE("matmul identity maps a vector to itself") {
  Matrix id = Matrix::identity(2);
  Matrix v = Matrix::column_vector({1.0, 2.0});
  Matrix out = matmul(id, v);
  CHECK(out(0, 0) == doctest::Approx(1.0));
  CHECK(out(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("sigmoid at zero is one half") {
  Matrix z(2, 2);
  Matrix s = sigmoid(z);
  for (double v : s.values()) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("exp undoes log") {
  Matrix x = Matrix::constant(1, 1, 0.3);
  Matrix roundtrip = exp(log(x));
  CHECK(std::abs(roundtrip(0, 0) - 0.3) <= 1e-12);
}

TEST_CASE("shape mismatch raises a structured error naming the shapes") {
  Tape tape;
  ValueId a = tape.input(Matrix(2, 3));
  ValueId b = tape.input(Matrix(4, 2));
  try {
    tape.matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("node") != std::string::npos);
  }
}

TEST_CASE("backward without a recorded forward pass is an error") {
  Tape tape;
  CHECK_THROWS_AS(tape.backward(ValueId{0}), NumericError);
}

TEST_CASE("no broadcasting beyond row-vector bias addition") {
  Tape tape;
  ValueId a = tape.input(Matrix(4, 3));
  ValueId col = tape.input(Matrix(4, 1));
  CHECK_THROWS_AS(tape.add(a, col), ShapeError);
  CHECK_THROWS_AS(tape.add_row_vector(a, col), ShapeError);
}

TEST_CASE("d/dx x^2 at x = 3 is 6") {
  Tape tape;
  Matrix x = Matrix::constant(1, 1, 3.0);
  ValueId xid = tape.param(x);
  ValueId sq = tape.hadamard(xid, xid);
  ValueId loss = tape.reduce_sum(sq);
  tape.backward(loss);
  CHECK(tape.grad(xid)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("gradient of ||Wx - y||^2 w.r.t. W is 2(Wx - y)x^T") {
  RngStream rng(7, "wxy");
  Matrix w = rng.normal_matrix(3, 4, 0.0, 1.0);
  Matrix x = rng.normal_matrix(4, 1, 0.0, 1.0);
  Matrix y = rng.normal_matrix(3, 1, 0.0, 1.0);

  Tape tape;
  ValueId wid = tape.param(w);
  ValueId xid = tape.input(x);
  ValueId yid = tape.input(y);
  ValueId resid = tape.sub(tape.matmul(wid, xid), yid);
  ValueId loss = tape.reduce_sum(tape.hadamard(resid, resid));
  tape.backward(loss);

  Matrix expected = scale(matmul(sub(matmul(w, x), y), transpose(x)), 2.0);
  CHECK(max_abs_diff(tape.grad(wid), expected) <= 1e-12);
}

TEST_CASE("three-layer MLP gradient matches central finite differences") {
  RngStream rng(11, "mlp-fd");
  std::vector<Matrix> params;
  params.push_back(rng.normal_matrix(3, 5, 0.0, 0.6));  // W1
  params.push_back(rng.normal_matrix(1, 5, 0.0, 0.6));  // b1
  params.push_back(rng.normal_matrix(5, 5, 0.0, 0.6));  // W2
  params.push_back(rng.normal_matrix(1, 5, 0.0, 0.6));  // b2
  params.push_back(rng.normal_matrix(5, 2, 0.0, 0.6));  // W3
  params.push_back(rng.normal_matrix(1, 2, 0.0, 0.6));  // b3
  Matrix x = rng.normal_matrix(4, 3, 0.0, 1.0);
  Matrix target = rng.uniform_matrix(4, 2);

  check_gradients(params, [&](Tape& tape, const std::vector<ValueId>& ids) {
    ValueId h = tape.input(x);
    h = tape.sigmoid(tape.add_row_vector(tape.matmul(h, ids[0]), ids[1]));
    h = tape.sigmoid(tape.add_row_vector(tape.matmul(h, ids[2]), ids[3]));
    h = tape.sigmoid(tape.add_row_vector(tape.matmul(h, ids[4]), ids[5]));
    return tape.mse(h, tape.input(target));
  });
}

TEST_CASE("every primitive op passes finite-difference gradient checks") {
  RngStream rng(23, "primitive-fd");
  const int kInstancesPerOp = 100;
  const int kOps = 15;

  for (int which = 0; which < kOps; ++which) {
    for (int inst = 0; inst < kInstancesPerOp; ++inst) {
      const std::size_t r = 1 + rng.below(3);
      const std::size_t c = 1 + rng.below(3);
      std::vector<Matrix> params;
      params.push_back(rng.normal_matrix(r, c, 0.0, 1.0));
      params.push_back(rng.normal_matrix(r, c, 0.0, 1.0));
      params.push_back(rng.normal_matrix(c, 2, 0.0, 1.0));  // matmul rhs
      params.push_back(rng.normal_matrix(1, c, 0.0, 1.0));  // bias row
      params.push_back(rng.normal_matrix(r, 1, 0.0, 1.0));  // row scales
      // Keep relu inputs away from the kink.
      for (double& v : params[0].values()) {
        if (std::abs(v) < 0.1) v = v < 0 ? v - 0.1 : v + 0.1;
      }
      Matrix target = rng.uniform_matrix(r, c);

      check_gradients(
          params,
          [&](Tape& tape, const std::vector<ValueId>& ids) -> ValueId {
            ValueId a = ids[0];
            ValueId b = ids[1];
            switch (which) {
              case 0: return tape.reduce_sum(tape.matmul(a, ids[2]));
              case 1: return tape.reduce_sum(tape.add(a, b));
              case 2: return tape.reduce_sum(tape.sub(a, b));
              case 3: return tape.reduce_sum(tape.add_row_vector(a, ids[3]));
              case 4: return tape.reduce_sum(tape.scale(a, -1.7));
              case 5: return tape.reduce_sum(tape.hadamard(a, b));
              case 6: return tape.reduce_sum(tape.row_scale(a, ids[4]));
              case 7: return tape.reduce_sum(tape.row_sum(a));
              case 8: return tape.reduce_sum(tape.sigmoid(a));
              case 9: return tape.reduce_sum(tape.exp(tape.scale(a, 0.3)));
              case 10: return tape.reduce_sum(tape.log(tape.exp(a)));
              case 11: return tape.reduce_sum(tape.relu(a));
              case 12: return tape.reduce_mean(tape.div(a, tape.exp(tape.scale(b, 0.2))));
              case 13: return tape.mse(a, tape.input(target));
              default:
                return tape.reduce_mean(tape.concat_cols(tape.transpose(tape.transpose(a)), b));
            }
          });
    }
  }
}

TEST_CASE("forward is deterministic and backward visits each node once") {
  RngStream rng(5, "determinism");
  Matrix w = rng.normal_matrix(3, 3, 0.0, 1.0);
  Matrix x = rng.normal_matrix(2, 3, 0.0, 1.0);

  auto run = [&]() {
    Tape tape;
    ValueId wid = tape.param(w);
    ValueId out = tape.sigmoid(tape.matmul(tape.input(x), wid));
    ValueId loss = tape.reduce_mean(out);
    tape.backward(loss);
    return std::pair<double, Matrix>(tape.scalar(loss), tape.grad(wid));
  };
  auto [l1, g1] = run();
  auto [l2, g2] = run();
  CHECK(l1 == l2);
  CHECK(max_abs_diff(g1, g2) == 0.0);
}

TEST_CASE("rng streams reproduce bit-identical sequences") {
  RngStream a(42, "stream");
  RngStream b(42, "stream");
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  RngStream c(42, "stream");
  RngStream d(43, "stream");
  bool all_equal = true;
  for (int i = 0; i < 16; ++i) all_equal &= c.next_u64() == d.next_u64();
  CHECK_FALSE(all_equal);
}

TEST_CASE("derived streams are independent of parent draw position") {
  RngStream parent(9, "parent");
  RngStream child_before = parent.derive("child");
  parent.uniform();
  parent.uniform();
  RngStream child_after = parent.derive("child");
  for (int i = 0; i < 64; ++i) CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("uniform draws live in [0,1) and normals have the right moments") {
  RngStream rng(1234, "moments");
  const int n = 100000;
  double mean = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = rng.normal(0.0, 0.6);
    mean += z;
    sq += z * z;
  }
  mean /= n;
  const double stddev = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean - 0.0) <= 0.01);
  CHECK(std::abs(stddev - 0.6) <= 0.01);
}

TEST_CASE("orthogonal matrices are orthogonal to 1e-10") {
  RngStream rng(77, "orthogonal");
  for (int trial = 0; trial < 5; ++trial) {
    Matrix q = rng.orthogonal_matrix(6);
    Matrix gram = matmul(transpose(q), q);
    CHECK(max_abs_diff(gram, Matrix::identity(6)) <= 1e-10);
  }
}

TEST_CASE("symmetric eigen and least squares recover a planted solution") {
  RngStream rng(3, "lsq");
  Matrix x = rng.normal_matrix(40, 3, 0.0, 1.0);
  Matrix w = rng.normal_matrix(3, 2, 0.0, 1.0);
  Matrix y = matmul(x, w);
  auto fit = solve_least_squares(x, y);
  CHECK_FALSE(fit.degenerate);
  CHECK(max_abs_diff(fit.solution, w) <= 1e-8);

  // Duplicate column makes the Gram matrix singular; the pseudo-inverse path
  // must flag it.
  Matrix xdup(40, 4);
  for (std::size_t r = 0; r < 40; ++r) {
    for (std::size_t c = 0; c < 3; ++c) xdup(r, c) = x(r, c);
    xdup(r, 3) = x(r, 0);
  }
  auto fit2 = solve_least_squares(xdup, y);
  CHECK(fit2.degenerate);
}

TEST_CASE("matrix inverse round-trips") {
  RngStream rng(8, "inverse");
  Matrix a = rng.orthogonal_matrix(5);
  for (std::size_t i = 0; i < 5; ++i) a(i, i) += 2.0;
  Matrix id = matmul(a, inverse(a));
  CHECK(max_abs_diff(id, Matrix::identity(5)) <= 1e-10);
}
