#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rolnn/common.hpp"

namespace rolnn::ad {

using rolnn::Mat;
using rolnn::Vec;

// Reverse-accumulation trace at dense-operation granularity. Each evaluation
// of a loss builds a fresh trace; backward() sweeps it once. Node values and
// adjoints are Eigen matrices (column vectors are n x 1).
enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kNeg,
  kScaleC,      // c * a, c compile-time constant double
  kScaleS,      // s * a, s a 1x1 tensor
  kMulElem,
  kDivElem,
  kMatMul,      // A B
  kMatTMul,     // A^T B
  kAct,         // z + s*tanh(z), s a 1x1 tensor
  kActInv,      // inverse of kAct (elementwise Newton at value level)
  kActDeriv,    // 1 + s*sech^2(z)
  kSoftplus,
  kDot,         // a.b -> 1x1
  kSqNorm,      // |a|^2 -> 1x1
  kSymFromVech, // lower-triangle vector -> symmetric d x d
  kCholSolve,   // A^{-1} b, A SPD
  kVcat,        // vertical concat of column vectors (extras)
};

struct Node {
  Op op;
  int a = -1, b = -1;
  int extra_begin = 0, extra_len = 0;
  double c = 0.0;
  Mat val;
};

class Tape {
 public:
  void clear() {
    nodes_.clear();
    extras_.clear();
    adj_.clear();
  }
  std::size_t size() const { return nodes_.size(); }

  const Mat& val(int id) const { return nodes_[id].val; }
  const Mat& adj(int id) const { return adj_[id]; }

  int leaf(const Mat& v) { return push_(Op::kLeaf, -1, -1, v); }
  int constant(const Mat& v) { return push_(Op::kConst, -1, -1, v); }
  int constant(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(m);
  }

  int add(int a, int b) { return push_(Op::kAdd, a, b, nodes_[a].val + nodes_[b].val); }
  int sub(int a, int b) { return push_(Op::kSub, a, b, nodes_[a].val - nodes_[b].val); }
  int neg(int a) { return push_(Op::kNeg, a, -1, -nodes_[a].val); }
  int scale(int a, double c) {
    int id = push_(Op::kScaleC, a, -1, c * nodes_[a].val);
    nodes_[id].c = c;
    return id;
  }
  int scale_by(int a, int s) {
    return push_(Op::kScaleS, a, s, nodes_[s].val(0, 0) * nodes_[a].val);
  }
  int mul_elem(int a, int b) {
    return push_(Op::kMulElem, a, b, nodes_[a].val.cwiseProduct(nodes_[b].val));
  }
  int div_elem(int a, int b) {
    return push_(Op::kDivElem, a, b, nodes_[a].val.cwiseQuotient(nodes_[b].val));
  }
  int matmul(int a, int b) {
    return push_(Op::kMatMul, a, b, nodes_[a].val * nodes_[b].val);
  }
  int matTmul(int a, int b) {
    return push_(Op::kMatTMul, a, b, nodes_[a].val.transpose() * nodes_[b].val);
  }
  int softplus(int a) {
    Mat y = nodes_[a].val.unaryExpr([](double x) {
      return x > 30.0 ? x : std::log1p(std::exp(x));
    });
    return push_(Op::kSoftplus, a, -1, std::move(y));
  }
  int act(int z, int s) {
    double sv = nodes_[s].val(0, 0);
    Mat y = nodes_[z].val.unaryExpr([sv](double x) { return x + sv * std::tanh(x); });
    return push_(Op::kAct, z, s, std::move(y));
  }
  int act_inv(int y, int s) {
    double sv = nodes_[s].val(0, 0);
    Mat z = nodes_[y].val.unaryExpr([sv](double v) { return act_invert(v, sv); });
    return push_(Op::kActInv, y, s, std::move(z));
  }
  int act_deriv(int z, int s) {
    double sv = nodes_[s].val(0, 0);
    Mat y = nodes_[z].val.unaryExpr([sv](double x) {
      double t = std::tanh(x);
      return 1.0 + sv * (1.0 - t * t);
    });
    return push_(Op::kActDeriv, z, s, std::move(y));
  }
  int dot(int a, int b) {
    Mat m(1, 1);
    m(0, 0) = nodes_[a].val.cwiseProduct(nodes_[b].val).sum();
    return push_(Op::kDot, a, b, std::move(m));
  }
  int sqnorm(int a) {
    Mat m(1, 1);
    m(0, 0) = nodes_[a].val.squaredNorm();
    return push_(Op::kSqNorm, a, -1, std::move(m));
  }
  int sym_from_vech(int v, int d) {
    Mat s(d, d);
    const Mat& x = nodes_[v].val;
    int k = 0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) {
        s(i, j) = s(j, i) = x(k++, 0);
      }
    int id = push_(Op::kSymFromVech, v, -1, std::move(s));
    nodes_[id].c = d;
    return id;
  }
  int chol_solve(int a, int b) {
    Eigen::LLT<Mat> llt(nodes_[a].val);
    if (llt.info() != Eigen::Success)
      throw NumericError("tape: Cholesky failure in chol_solve");
    return push_(Op::kCholSolve, a, b, llt.solve(nodes_[b].val));
  }
  int vcat(const std::vector<int>& parts) {
    int rows = 0;
    for (int p : parts) rows += static_cast<int>(nodes_[p].val.rows());
    Mat y(rows, 1);
    int r = 0;
    for (int p : parts) {
      int pr = static_cast<int>(nodes_[p].val.rows());
      y.block(r, 0, pr, 1) = nodes_[p].val;
      r += pr;
    }
    int id = push_(Op::kVcat, -1, -1, std::move(y));
    nodes_[id].extra_begin = static_cast<int>(extras_.size());
    nodes_[id].extra_len = static_cast<int>(parts.size());
    extras_.insert(extras_.end(), parts.begin(), parts.end());
    return id;
  }

  // Reverse sweep from a scalar (1x1) node.
  void backward(int loss) {
    adj_.assign(nodes_.size(), Mat());
    touch_(loss);
    adj_[loss](0, 0) = 1.0;
    for (int i = loss; i >= 0; --i) {
      if (adj_[i].size() == 0) continue;
      const Node& n = nodes_[i];
      const Mat& g = adj_[i];
      switch (n.op) {
        case Op::kLeaf:
        case Op::kConst:
          break;
        case Op::kAdd:
          acc_(n.a, g);
          acc_(n.b, g);
          break;
        case Op::kSub:
          acc_(n.a, g);
          acc_(n.b, -g);
          break;
        case Op::kNeg:
          acc_(n.a, -g);
          break;
        case Op::kScaleC:
          acc_(n.a, n.c * g);
          break;
        case Op::kScaleS: {
          acc_(n.a, nodes_[n.b].val(0, 0) * g);
          Mat gs(1, 1);
          gs(0, 0) = nodes_[n.a].val.cwiseProduct(g).sum();
          acc_(n.b, gs);
          break;
        }
        case Op::kMulElem:
          acc_(n.a, g.cwiseProduct(nodes_[n.b].val));
          acc_(n.b, g.cwiseProduct(nodes_[n.a].val));
          break;
        case Op::kDivElem: {
          Mat ga = g.cwiseQuotient(nodes_[n.b].val);
          acc_(n.a, ga);
          acc_(n.b, -ga.cwiseProduct(n.val));
          break;
        }
        case Op::kMatMul:
          acc_(n.a, g * nodes_[n.b].val.transpose());
          acc_(n.b, nodes_[n.a].val.transpose() * g);
          break;
        case Op::kMatTMul:
          acc_(n.a, nodes_[n.b].val * g.transpose());
          acc_(n.b, nodes_[n.a].val * g);
          break;
        case Op::kAct: {
          double sv = nodes_[n.b].val(0, 0);
          Mat t = nodes_[n.a].val.array().tanh().matrix();
          acc_(n.a, g.cwiseProduct((1.0 + sv * (1.0 - t.array().square())).matrix()));
          Mat gs(1, 1);
          gs(0, 0) = g.cwiseProduct(t).sum();
          acc_(n.b, gs);
          break;
        }
        case Op::kActInv: {
          // z = actinv(y, s): dz/dy = 1/sig'(z), dz/ds = -tanh(z)/sig'(z).
          double sv = nodes_[n.b].val(0, 0);
          Mat t = n.val.array().tanh().matrix();
          Mat dp = (1.0 + sv * (1.0 - t.array().square())).matrix();
          Mat gz = g.cwiseQuotient(dp);
          acc_(n.a, gz);
          Mat gs(1, 1);
          gs(0, 0) = -gz.cwiseProduct(t).sum();
          acc_(n.b, gs);
          break;
        }
        case Op::kActDeriv: {
          // y = 1 + s*sech^2(z): dy/dz = -2 s tanh(z) sech^2(z), dy/ds = sech^2(z).
          double sv = nodes_[n.b].val(0, 0);
          Eigen::ArrayXXd t = nodes_[n.a].val.array().tanh();
          Eigen::ArrayXXd sech2 = 1.0 - t.square();
          acc_(n.a, (g.array() * (-2.0 * sv) * t * sech2).matrix());
          Mat gs(1, 1);
          gs(0, 0) = (g.array() * sech2).sum();
          acc_(n.b, gs);
          break;
        }
        case Op::kSoftplus: {
          Mat s = nodes_[n.a].val.unaryExpr([](double x) { return sigmoid_(x); });
          acc_(n.a, g.cwiseProduct(s));
          break;
        }
        case Op::kDot: {
          double gv = g(0, 0);
          acc_(n.a, gv * nodes_[n.b].val);
          acc_(n.b, gv * nodes_[n.a].val);
          break;
        }
        case Op::kSqNorm:
          acc_(n.a, 2.0 * g(0, 0) * nodes_[n.a].val);
          break;
        case Op::kSymFromVech: {
          int d = static_cast<int>(n.c);
          Mat gv(d * (d + 1) / 2, 1);
          int k = 0;
          for (int r = 0; r < d; ++r)
            for (int cj = 0; cj <= r; ++cj)
              gv(k++, 0) = (r == cj) ? g(r, cj) : g(r, cj) + g(cj, r);
          acc_(n.a, gv);
          break;
        }
        case Op::kCholSolve: {
          Eigen::LLT<Mat> llt(nodes_[n.a].val);
          Mat gb = llt.solve(g);
          acc_(n.b, gb);
          acc_(n.a, -gb * n.val.transpose());
          break;
        }
        case Op::kVcat: {
          int r = 0;
          for (int k = 0; k < n.extra_len; ++k) {
            int p = extras_[n.extra_begin + k];
            int pr = static_cast<int>(nodes_[p].val.rows());
            acc_(p, g.block(r, 0, pr, 1));
            r += pr;
          }
          break;
        }
      }
    }
  }

  // Elementwise Newton for z + s*tanh(z) = y; contraction |s| < 1 guarantees
  // a unique root.
  static double act_invert(double y, double s) {
    double z = y;
    for (int it = 0; it < 100; ++it) {
      double t = std::tanh(z);
      double f = z + s * t - y;
      double fp = 1.0 + s * (1.0 - t * t);
      double step = f / fp;
      z -= step;
      if (std::abs(step) < 1e-15 * (1.0 + std::abs(z))) return z;
    }
    throw NumericError("activation inversion did not converge");
  }

 private:
  static double sigmoid_(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  int push_(Op op, int a, int b, Mat v) {
    nodes_.push_back(Node{op, a, b, 0, 0, 0.0, std::move(v)});
    return static_cast<int>(nodes_.size()) - 1;
  }
  void touch_(int i) {
    if (adj_[i].size() == 0) adj_[i] = Mat::Zero(nodes_[i].val.rows(), nodes_[i].val.cols());
  }
  void acc_(int i, const Mat& g) {
    touch_(i);
    adj_[i] += g;
  }

  std::vector<Node> nodes_;
  std::vector<int> extras_;
  std::vector<Mat> adj_;
};

}  // namespace rolnn::ad
