#include <cmath>

#include "terrasense/metric_learn.hpp"

namespace terrasense::metric {

Eigen::VectorXd triplet_margins(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p, const Eigen::MatrixXd& n,
                                double alpha) {
  if (a.rows() != p.rows() || a.rows() != n.rows() || a.cols() != p.cols() || a.cols() != n.cols()) {
    throw InputError("triplet loss: embedding shapes differ");
  }
  const Eigen::VectorXd dap = (a - p).colwise().squaredNorm().transpose();
  const Eigen::VectorXd dan = (a - n).colwise().squaredNorm().transpose();
  return (dap.array() + alpha - dan.array()).matrix();
}

TripletLoss triplet_loss(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p, const Eigen::MatrixXd& n, double alpha) {
  if (!(alpha > 0.0)) throw InputError("triplet loss: alpha must be positive");
  const Eigen::VectorXd margin = triplet_margins(a, p, n, alpha);
  TripletLoss out;
  out.grad_anchor = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  out.grad_positive = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  out.grad_negative = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  const auto b = a.cols();
  if (b == 0) return out;
  const double scale = 2.0 / static_cast<double>(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    if (!(margin(i) > 0.0)) continue;
    out.loss += margin(i);
    ++out.active;
    out.grad_anchor.col(i) = scale * (n.col(i) - p.col(i));
    out.grad_positive.col(i) = -scale * (a.col(i) - p.col(i));
    out.grad_negative.col(i) = scale * (a.col(i) - n.col(i));
  }
  out.loss /= static_cast<double>(b);
  return out;
}

ReconstructionLoss reconstruction_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) throw InputError("reconstruction loss: shapes differ");
  ReconstructionLoss out;
  if (x.cols() == 0) {
    out.grad = Eigen::MatrixXd::Zero(x.rows(), 0);
    return out;
  }
  const Eigen::MatrixXd diff = x_hat - x;
  const double b = static_cast<double>(x.cols());
  out.loss = diff.squaredNorm() / b;
  out.grad = (2.0 / b) * diff;
  return out;
}

double combined_loss(double lt, double lr, double beta) { return beta * lt + (1.0 - beta) * lr; }

}  // namespace terrasense::metric
