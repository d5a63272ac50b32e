#include <cmath>
#include <memory>

#include "numlab/errors.hpp"
#include "numlab/kernels.hpp"
#include "numlab/relu_two_layer.hpp"

namespace numlab::relu {

ReluTwoLayerNet::ReluTwoLayerNet(Matrix W, Matrix V, Vector b)
    : W_(std::move(W)), V_(std::move(V)), b_(std::move(b)) {
  if (W_.cols() != V_.rows() || b_.size() != V_.rows())
    throw ShapeMismatch("W is " + std::to_string(W_.rows()) + "x" +
                        std::to_string(W_.cols()) + ", V has " +
                        std::to_string(V_.rows()) + " rows, b has " +
                        std::to_string(b_.size()) + " entries");
  if (W_.size() == 0 || V_.size() == 0) throw ShapeMismatch("empty layer");
  if (!W_.allFinite() || !V_.allFinite() || !b_.allFinite())
    throw InvalidArgument("network parameters must be finite");
}

ReluTwoLayerNet ReluTwoLayerNet::random_normal(Eigen::Index n, Eigen::Index r,
                                               Eigen::Index m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, c) = normal(rng);
    return out;
  };
  Matrix W = draw(m, r);
  Matrix V = draw(r, n);
  Vector b = draw(r, 1);
  return ReluTwoLayerNet(std::move(W), std::move(V), std::move(b));
}

State ReluTwoLayerNet::pack() const {
  State flat(W_.size() + V_.size());
  flat.head(W_.size()) = W_.reshaped();
  flat.tail(V_.size()) = V_.reshaped();
  return flat;
}

ReluTwoLayerNet ReluTwoLayerNet::with_state(const State& flat) const {
  if (flat.size() != W_.size() + V_.size())
    throw ShapeMismatch("flat state has " + std::to_string(flat.size()) + " entries");
  ReluTwoLayerNet out = *this;
  out.W_ = flat.head(W_.size()).reshaped(W_.rows(), W_.cols());
  out.V_ = flat.tail(V_.size()).reshaped(V_.rows(), V_.cols());
  return out;
}

void ReluDataset::validate() const {
  if (inputs.rows() == 0) throw InvalidArgument("dataset is empty");
  if (inputs.rows() != targets.rows())
    throw ShapeMismatch("inputs and targets differ in sample count");
}

namespace {

void check_shapes(const ReluTwoLayerNet& net, const ReluDataset& data) {
  data.validate();
  if (data.inputs.cols() != net.input_dim() || data.targets.cols() != net.output_dim())
    throw ShapeMismatch("dataset is " + std::to_string(data.inputs.cols()) + " -> " +
                        std::to_string(data.targets.cols()) + ", net is " +
                        std::to_string(net.input_dim()) + " -> " +
                        std::to_string(net.output_dim()));
}

// Kernel operands for one network; W is transposed once per call.
struct Workspace {
  Matrix Wt;
  Matrix dV;
  Matrix dWt;
  std::vector<double> scratch;

  kernels::ReluBatch bind(const ReluTwoLayerNet& net, const Matrix& X,
                          const Matrix* Y) {
    Wt = net.W().transpose();
    scratch.resize(kernels::scratch_size(static_cast<std::size_t>(X.rows()),
                                        static_cast<std::size_t>(net.output_dim())));
    kernels::ReluBatch bt;
    bt.n = static_cast<std::size_t>(net.input_dim());
    bt.r = static_cast<std::size_t>(net.hidden_dim());
    bt.m = static_cast<std::size_t>(net.output_dim());
    bt.N = static_cast<std::size_t>(X.rows());
    bt.X = X.data();
    bt.Y = Y ? Y->data() : nullptr;
    bt.V = net.V().data();
    bt.b = net.b().data();
    bt.Wt = Wt.data();
    return bt;
  }

  double gradients(const ReluTwoLayerNet& net, const ReluDataset& data) {
    const auto bt = bind(net, data.inputs, &data.targets);
    dV.resize(net.hidden_dim(), net.input_dim());
    dWt.resize(net.hidden_dim(), net.output_dim());
    return kernels::relu_batch_grad(bt, dV.data(), dWt.data(), scratch.data());
  }
};

}  // namespace

Vector forward(const ReluTwoLayerNet& net, const Vector& x) {
  if (x.size() != net.input_dim()) throw ShapeMismatch("input dimension mismatch");
  const Vector z = net.V() * x - net.b();
  return net.W() * z.cwiseMax(0.0);
}

Matrix forward_batch(const ReluTwoLayerNet& net, const Matrix& inputs) {
  if (inputs.cols() != net.input_dim()) throw ShapeMismatch("input dimension mismatch");
  Workspace ws;
  const auto bt = ws.bind(net, inputs, nullptr);
  Matrix out(inputs.rows(), net.output_dim());
  kernels::relu_batch_forward(bt, out.data(), ws.scratch.data());
  return out;
}

Gradients grads(const ReluTwoLayerNet& net, const ReluDataset& data) {
  check_shapes(net, data);
  Workspace ws;
  Gradients g;
  g.loss = ws.gradients(net, data);
  g.dW = ws.dWt.transpose();
  g.dV = std::move(ws.dV);
  return g;
}

ReluTwoLayerNet gd_step(const ReluTwoLayerNet& net, const ReluDataset& data,
                        double step_size) {
  const Gradients g = grads(net, data);
  ReluTwoLayerNet next = net;
  next.W() -= step_size * g.dW;
  next.V() -= step_size * g.dV;
  return next;
}

Thm4Report thm4_check(const ReluTwoLayerNet& net, const ReluDataset& data,
                      double step_size) {
  check_shapes(net, data);
  if (!(step_size > 0.0)) throw InvalidArgument("step size must be positive");
  const Matrix out = forward_batch(net, data.inputs);
  Thm4Report rep;
  rep.rhs = 1.0 / step_size;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double v = data.inputs.row(i).norm() * out.row(i).norm();
    if (v > rep.lhs || i == 0) {
      rep.lhs = v;
      rep.argmax_index = static_cast<std::size_t>(i);
    }
  }
  rep.satisfied = rep.lhs <= rep.rhs;
  return rep;
}

Dynamics make_dynamics(const ReluTwoLayerNet& shape, const ReluDataset& data,
                       double step_size) {
  check_shapes(shape, data);
  auto ws = std::make_shared<Workspace>();
  auto data_ptr = std::make_shared<const ReluDataset>(data);
  auto net = std::make_shared<ReluTwoLayerNet>(shape);
  const Eigen::Index w_size = shape.W().size();
  Dynamics dyn;
  dyn.step = [=](const State& x) {
    *net = net->with_state(x);
    ws->gradients(*net, *data_ptr);
    State next = x;
    next.head(w_size) -= step_size * ws->dWt.transpose().reshaped();
    next.tail(ws->dV.size()) -= step_size * ws->dV.reshaped();
    return next;
  };
  dyn.loss = [=](const State& x) {
    Workspace local;
    return local.gradients(net->with_state(x), *data_ptr);
  };
  dyn.grad_norm = gd_grad_norm(step_size);
  return dyn;
}

TrainResult train(const ReluTwoLayerNet& init, const ReluDataset& data,
                  const GDConfig& cfg) {
  const Dynamics dyn = make_dynamics(init, data, cfg.step_size);
  Trajectory traj = iterate(dyn, init.pack(), cfg);
  TrainResult out{init.with_state(traj.final_state()), std::move(traj)};
  out.converged = out.trajectory.stop == StopReason::Converged;
  out.iterations = out.trajectory.final_iter();
  out.final_grad_norm = out.trajectory.final_grad_norm();
  return out;
}

}  // namespace numlab::relu
