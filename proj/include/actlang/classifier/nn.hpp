#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace actlang::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
struct Param {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value = Mat<Scalar>::Zero(rows, cols);
    grad = Mat<Scalar>::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
void xavier_uniform(Param<Scalar>& p, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> dist(-a, a);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
}

template <typename Scalar>
void normal_init(Param<Scalar>& p, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
}

// Y = X W + b, W stored in x out.
template <typename Scalar>
struct Linear {
  Param<Scalar> W;
  Param<Scalar> b;

  void init(const std::string& name, Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
    W.name = name + ".weight";
    b.name = name + ".bias";
    W.resize(in, out);
    b.resize(1, out);
    xavier_uniform(W, rng);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x) const {
    Mat<Scalar> y = x * W.value;
    y.rowwise() += b.value.row(0);
    return y;
  }

  // Accumulates parameter gradients and returns dL/dx.
  Mat<Scalar> backward(const Mat<Scalar>& x, const Mat<Scalar>& dy) {
    W.grad.noalias() += x.transpose() * dy;
    b.grad.row(0) += dy.colwise().sum();
    return dy * W.value.transpose();
  }

  void backward_params_only(const Mat<Scalar>& x, const Mat<Scalar>& dy) {
    W.grad.noalias() += x.transpose() * dy;
    b.grad.row(0) += dy.colwise().sum();
  }
};

template <typename Scalar>
struct LayerNorm {
  Param<Scalar> gamma;
  Param<Scalar> beta;
  static constexpr double kEps = 1e-5;

  struct Cache {
    Mat<Scalar> xhat;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
  };

  void init(const std::string& name, Eigen::Index dim) {
    gamma.name = name + ".weight";
    beta.name = name + ".bias";
    gamma.resize(1, dim);
    beta.resize(1, dim);
    gamma.value.setOnes();
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache) const {
    const auto n = x.rows();
    const auto d = x.cols();
    Mat<Scalar> xhat(n, d);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Scalar mu = x.row(r).mean();
      const Scalar var = (x.row(r).array() - mu).square().mean();
      inv(r) = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kEps));
      xhat.row(r) = (x.row(r).array() - mu) * inv(r);
    }
    Mat<Scalar> y = xhat.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv);
    }
    return y;
  }

  Mat<Scalar> backward(const Cache& c, const Mat<Scalar>& dy) {
    gamma.grad.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    beta.grad.row(0) += dy.colwise().sum();
    Mat<Scalar> dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    Mat<Scalar> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const Scalar m1 = dxhat.row(r).mean();
      const Scalar m2 = (dxhat.row(r).array() * c.xhat.row(r).array()).mean();
      dx.row(r) = c.inv_std(r) * (dxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2);
    }
    return dx;
  }
};

// Row-wise softmax in place, numerically stabilised.
template <typename Scalar>
void softmax_rows(Mat<Scalar>& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Scalar m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp();
    s.row(r) /= s.row(r).sum();
  }
}

// Inverted dropout mask: entries are 0 or 1/(1-p).
template <typename Scalar>
Mat<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
  Mat<Scalar> m(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const Scalar scale = static_cast<Scalar>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : Scalar(0);
  return m;
}

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay over a fixed parameter list.
template <typename Scalar>
class AdamW {
 public:
  AdamW(std::vector<Param<Scalar>*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    const auto step = static_cast<Scalar>(cfg_.lr / bc1);
    const auto decay = static_cast<Scalar>(1.0 - cfg_.lr * cfg_.weight_decay);
    const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
    const auto eps = static_cast<Scalar>(cfg_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      p.value *= decay;
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= step * m_[i].array() / ((v_[i].array() * inv_bc2).sqrt() + eps);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

 private:
  std::vector<Param<Scalar>*> params_;
  AdamWConfig cfg_;
  std::vector<Mat<Scalar>> m_, v_;
  long t_ = 0;
};

}  // namespace actlang::nn
