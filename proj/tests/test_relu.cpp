#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "numlab/errors.hpp"
#include "numlab/kernels.hpp"
#include "numlab/relu_two_layer.hpp"
#include "support.hpp"

using namespace numlab;
using namespace numlab::relu;
using testing_support::Gen;

namespace {

ReluTwoLayerNet scalar_net(double w, double v, double b) {
  return ReluTwoLayerNet(Matrix::Constant(1, 1, w), Matrix::Constant(1, 1, v), Vector::Constant(1, b));
}

ReluDataset one_sample(double x, double y) {
  return ReluDataset{Matrix::Constant(1, 1, x), Matrix::Constant(1, 1, y)};
}

ReluTwoLayerNet random_net(Gen& gen, Eigen::Index n, Eigen::Index r, Eigen::Index m) {
  return ReluTwoLayerNet(gen.matrix(m, r), gen.matrix(r, n), gen.vector(r));
}

ReluDataset gaussian_data(Gen& gen, Eigen::Index N, Eigen::Index n, Eigen::Index m) {
  return ReluDataset{gen.matrix(N, n), gen.matrix(N, m)};
}

// Per-sample loops straight from the definition.
struct Reference {
  Matrix dW, dV;
  double loss = 0.0;
};

Reference reference_grads(const ReluTwoLayerNet& net, const ReluDataset& data) {
  Reference out{Matrix::Zero(net.W().rows(), net.W().cols()), Matrix::Zero(net.V().rows(), net.V().cols())};
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Vector x = data.inputs.row(i).transpose();
    Vector h(net.hidden_dim());
    Vector active(net.hidden_dim());
    for (Eigen::Index j = 0; j < net.hidden_dim(); ++j) {
      const double z = net.V().row(j).dot(x) - net.b()[j];
      h[j] = z > 0.0 ? z : 0.0;
      active[j] = z > 0.0 ? 1.0 : 0.0;
    }
    const Vector e = net.W() * h - data.targets.row(i).transpose();
    out.loss += 0.5 * e.squaredNorm();
    out.dW += e * h.transpose();
    out.dV += (active.asDiagonal() * (net.W().transpose() * e)) * x.transpose();
  }
  return out;
}

double min_abs_preactivation(const ReluTwoLayerNet& net, const ReluDataset& data) {
  const Matrix Z = (net.V() * data.inputs.transpose()).colwise() - net.b();
  return Z.cwiseAbs().minCoeff();
}

}  // namespace

TEST(ReluNet, Validation) {
  EXPECT_THROW(ReluTwoLayerNet(Matrix::Ones(1, 2), Matrix::Ones(3, 1), Vector::Ones(3)), ShapeMismatch);
  EXPECT_THROW(ReluTwoLayerNet(Matrix::Ones(1, 2), Matrix::Ones(2, 1), Vector::Ones(3)), ShapeMismatch);
  EXPECT_THROW(scalar_net(std::nan(""), 1.0, 0.0), InvalidArgument);
  EXPECT_THROW((ReluDataset{Matrix::Ones(2, 1), Matrix::Ones(3, 1)}.validate()), ShapeMismatch);
  EXPECT_THROW(grads(scalar_net(1, 1, 0), ReluDataset{Matrix::Ones(2, 2), Matrix::Ones(2, 1)}), ShapeMismatch);
}

TEST(ReluNet, PackRoundTripKeepsBias) {
  Gen gen(1);
  const auto net = random_net(gen, 2, 3, 2);
  EXPECT_EQ(net.pack().size(), 6 + 6);
  const auto back = net.with_state(net.pack());
  EXPECT_EQ(back.W(), net.W());
  EXPECT_EQ(back.V(), net.V());
  EXPECT_EQ(back.b(), net.b());
  EXPECT_THROW(net.with_state(State::Zero(3)), ShapeMismatch);
}

TEST(Forward, Examples) {
  EXPECT_EQ(forward(scalar_net(1, 1, 0), Vector::Constant(1, 2.0))[0], 2.0);
  EXPECT_EQ(forward(scalar_net(1, 1, 0), Vector::Constant(1, -2.0))[0], 0.0);
  // V x - b == 0 exactly is inactive.
  EXPECT_EQ(forward(scalar_net(5, 1, 1), Vector::Constant(1, 1.0))[0], 0.0);
}

// W g(Vx - b) equals W D(x) (Vx - b) with the 0/1 activation mask D(x).
TEST(Forward, MaskForm) {
  Gen gen(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto net = random_net(gen, gen.integer(1, 4), gen.integer(1, 6), gen.integer(1, 3));
    const Vector x = gen.vector(net.input_dim());
    const Vector z = net.V() * x - net.b();
    const Vector mask = (z.array() > 0.0).cast<double>();
    const Vector masked = net.W() * (mask.asDiagonal() * z);
    EXPECT_LT((forward(net, x) - masked).norm(), 1e-12 * std::max(1.0, masked.norm()));
  }
}

TEST(Forward, BatchMatchesPerSample) {
  Gen gen(3);
  const auto net = random_net(gen, 3, 7, 2);
  const Matrix X = gen.matrix(13, 3);
  const Matrix out = forward_batch(net, X);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    EXPECT_LT((out.row(i).transpose() - forward(net, X.row(i).transpose())).norm(), 1e-12);
}

TEST(Grads, ScalarExample) {
  const auto g = grads(scalar_net(1, 1, 0), one_sample(2.0, 0.0));
  EXPECT_DOUBLE_EQ(g.dW(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(g.dV(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(g.loss, 2.0);
  // Inactive unit: no gradient reaches V.
  const auto dead = grads(scalar_net(1, -1, 0), one_sample(2.0, 3.0));
  EXPECT_EQ(dead.dV(0, 0), 0.0);
  EXPECT_EQ(dead.dW(0, 0), 0.0);
}

TEST(Grads, MatchReferenceLoops) {
  Gen gen(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto net = random_net(gen, gen.integer(1, 4), gen.integer(1, 9), gen.integer(1, 3));
    const auto data = gaussian_data(gen, gen.integer(1, 23), net.input_dim(), net.output_dim());
    const auto g = grads(net, data);
    const auto ref = reference_grads(net, data);
    EXPECT_LT((g.dW - ref.dW).norm(), 1e-11 * std::max(1.0, ref.dW.norm()));
    EXPECT_LT((g.dV - ref.dV).norm(), 1e-11 * std::max(1.0, ref.dV.norm()));
    EXPECT_NEAR(g.loss, ref.loss, 1e-11 * std::max(1.0, ref.loss));
  }
}

// Away from kinks the loss is smooth in (W, V).
TEST(Grads, MatchFiniteDifferencesAwayFromKinks) {
  Gen gen(5);
  int checked = 0;
  while (checked < 20) {
    const auto net = random_net(gen, gen.integer(1, 3), gen.integer(1, 6), gen.integer(1, 2));
    const auto data = gaussian_data(gen, gen.integer(1, 10), net.input_dim(), net.output_dim());
    if (min_abs_preactivation(net, data) < 1e-3) continue;
    ++checked;
    const auto g = grads(net, data);
    State analytic(net.pack().size());
    analytic << g.dW.reshaped(), g.dV.reshaped();
    const auto fd = finite_diff_grad([&](const State& s) { return grads(net.with_state(s), data).loss; },
                                     net.pack(), 1e-7);
    EXPECT_LT(testing_support::rel_err(analytic, fd), 1e-6);
  }
}

TEST(GdStep, ScalarExample) {
  const auto net = scalar_net(1, 1, 0.5);
  const auto data = one_sample(2.0, 0.0);
  // z = 1.5, output 1.5: dW = 1.5 * 1.5, dV = 1.5 * 1 * 2.
  const auto next = gd_step(net, data, 0.1);
  EXPECT_DOUBLE_EQ(next.W()(0, 0), 1.0 - 0.1 * 2.25);
  EXPECT_DOUBLE_EQ(next.V()(0, 0), 1.0 - 0.1 * 3.0);
  EXPECT_EQ(next.b()(0), 0.5);

  const auto s = gd_step(scalar_net(1, 1, 0), data, 0.1);
  EXPECT_DOUBLE_EQ(s.W()(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(s.V()(0, 0), 0.6);
}

TEST(GdStep, BiasNeverMoves) {
  Gen gen(6);
  auto net = random_net(gen, 2, 5, 1);
  const Vector b0 = net.b();
  const auto data = gaussian_data(gen, 17, 2, 1);
  for (int k = 0; k < 50; ++k) net = gd_step(net, data, 0.01);
  EXPECT_EQ(net.b(), b0);
}

TEST(OutputNormCondition, Examples) {
  // f_hat(1) = 2 and ||x|| = 1, so the condition is 2 <= 1/delta.
  const auto net = scalar_net(2, 1, 0);
  const auto data = one_sample(1.0, 0.0);
  const auto ok = thm4_check(net, data, 0.5);
  EXPECT_DOUBLE_EQ(ok.lhs, 2.0);
  EXPECT_DOUBLE_EQ(ok.rhs, 2.0);
  EXPECT_TRUE(ok.satisfied);
  EXPECT_FALSE(thm4_check(net, data, 0.6).satisfied);
  EXPECT_THROW(thm4_check(net, data, -1.0), InvalidArgument);

  ReluDataset two{Matrix(2, 1), Matrix::Zero(2, 1)};
  two.inputs << 1.0, 3.0;
  const auto rep = thm4_check(net, two, 0.01);
  EXPECT_EQ(rep.argmax_index, 1u);
  EXPECT_DOUBLE_EQ(rep.lhs, 18.0);
}

// The variants must agree to rounding on every shape, including sample counts
// that leave a partial SIMD lane.
TEST(Kernels, ScalarAndAvx2Agree) {
  if (!kernels::isa_available(kernels::Isa::Avx2)) GTEST_SKIP() << "no AVX2 on this machine";
  Gen gen(7);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = gen.integer(1, 4), r = gen.integer(1, 12), m = gen.integer(1, 3);
    const std::size_t N = gen.integer(1, 37);
    const Matrix X = gen.matrix(N, n), Y = gen.matrix(N, m), V = gen.matrix(r, n), Wt = gen.matrix(r, m);
    const Vector b = gen.vector(r);
    kernels::ReluBatch bt{n, r, m, N, X.data(), Y.data(), V.data(), b.data(), Wt.data()};
    std::vector<double> scratch(kernels::scratch_size(N, m));
    Matrix dV1(r, n), dW1(r, m), dV2(r, n), dW2(r, m);
    const double l1 = kernels::scalar::relu_batch_grad(bt, dV1.data(), dW1.data(), scratch.data());
    const double l2 = kernels::avx2::relu_batch_grad(bt, dV2.data(), dW2.data(), scratch.data());
    EXPECT_NEAR(l1, l2, 1e-12 * std::max(1.0, l1));
    EXPECT_LT((dV1 - dV2).norm(), 1e-12 * std::max(1.0, dV1.norm()));
    EXPECT_LT((dW1 - dW2).norm(), 1e-12 * std::max(1.0, dW1.norm()));
    Matrix o1(N, m), o2(N, m);
    kernels::scalar::relu_batch_forward(bt, o1.data(), scratch.data());
    kernels::avx2::relu_batch_forward(bt, o2.data(), scratch.data());
    EXPECT_LT((o1 - o2).norm(), 1e-12 * std::max(1.0, o1.norm()));
  }
}

TEST(Kernels, ForceIsaPinsDispatch) {
  kernels::force_isa(kernels::Isa::Scalar);
  EXPECT_EQ(kernels::active_isa(), kernels::Isa::Scalar);
  kernels::force_isa(std::nullopt);
  EXPECT_EQ(kernels::active_isa(), kernels::detected_isa());
  EXPECT_EQ(kernels::to_string(kernels::Isa::Avx2), "avx2");
}

TEST(PiecewiseTarget, Evaluation) {
  const auto f = PiecewiseTarget::step_plus_ramp();
  EXPECT_DOUBLE_EQ(f(0.0), 0.5);
  EXPECT_DOUBLE_EQ(f(0.3), -3.0 * 0.3 + 2.0);  // right-continuous at a break
  EXPECT_DOUBLE_EQ(f(1.0), 1.0);
  PiecewiseTarget bad{{0.5}, {1.0}, {0.0}};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  PiecewiseTarget unsorted{{0.6, 0.2}, {1, 1, 1}, {0, 0, 0}};
  EXPECT_THROW(unsorted.validate(), InvalidArgument);
}

TEST(Figure2, DatasetAndInit) {
  Fig2Config cfg;
  cfg.samples = 4;
  const auto data = figure2_dataset(cfg);
  EXPECT_EQ(data.inputs(0, 0), 0.25);
  EXPECT_EQ(data.inputs(3, 0), 1.0);
  EXPECT_DOUBLE_EQ(data.targets(3, 0), 1.0);
  const auto a = figure2_init(cfg), b = figure2_init(cfg);
  EXPECT_EQ(a.V(), b.V());
  EXPECT_EQ(a.hidden_dim(), 20);
}

TEST(Figure2, ZeroTargetFromZeroOutputIsFixed) {
  Fig2Config cfg;
  cfg.width = 1;
  cfg.samples = 1;
  cfg.target = PiecewiseTarget{{}, {0.0}, {0.0}};
  cfg.output_weight_scale = 0.0;
  cfg.max_iters = 100;
  cfg.chunk_iters = 100;
  const auto rec = figure2_experiment(cfg, 0.1);
  EXPECT_EQ(rec.tail.kind, TailKind::FixedPoint);
  EXPECT_EQ(rec.f_hat.size(), rec.grid.size());
  for (double v : rec.f_hat) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(rec.thm4.satisfied);
}

TEST(Figure2, TransitionSearchValidates) {
  Fig2Config cfg;
  EXPECT_THROW(find_fixed_to_orbit_transition(cfg, 0.0, 1.0), InvalidArgument);
  EXPECT_THROW(find_fixed_to_orbit_transition(cfg, 2.0, 1.0), InvalidArgument);
  EXPECT_THROW(find_fixed_to_orbit_transition(cfg, 1.0, 2.0, 1), InvalidArgument);
}
