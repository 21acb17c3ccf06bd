#pragma once

#include <map>
#include <string>
#include <vector>

#include "rolnn/common.hpp"

namespace rolnn::manifolds {

// --- SPD exponential-map layer primitives ------------------------------

// Matrix exponential of a symmetric matrix via eigendecomposition.
// Input asymmetry beyond tol is rejected.
Mat sym_expm(const Mat& s, double sym_tol = 1e-10);

// Inverse map; requires strictly positive eigenvalues.
Mat sym_logm(const Mat& p);

// Scaling-and-squaring Taylor expm for symmetric matrices together with its
// Frechet (directional) derivative d expm(S)[E]. Same series as the tape
// path in training, so values agree between inference and training.
void expm_taylor(const Mat& s, Mat* out);
void expm_taylor_frechet(const Mat& s, const Mat& e, Mat* out, Mat* dout);
int expm_squarings(double fro_norm);
inline constexpr int kExpmTaylorOrder = 13;

// --- Biorthogonal pairs -------------------------------------------------

// Decoder weight phi and encoder weight psi of one constrained-AE layer,
// with psi^T phi = I on the lower-dimensional side.
struct BiorthogonalPair {
  Mat phi;   // n_l x n_{l-1}
  Mat psi;   // n_l x n_{l-1}
  Vec bias;  // length n_l

  double constraint_residual() const {
    int k = static_cast<int>(phi.cols());
    return (psi.transpose() * phi - Mat::Identity(k, k)).norm();
  }
};

// psi <- psi (phi^T psi)^{-1}; restores psi^T phi = I exactly (one small
// solve). Throws when phi^T psi is ill-conditioned.
BiorthogonalPair biorthogonal_retract(const BiorthogonalPair& pair,
                                      double cond_cap = 1e12,
                                      const std::string& layer_name = "");

// --- Parameter container -------------------------------------------------

enum class ManifoldTag : std::uint8_t {
  kEuclidean = 0,
  kBiorthPhi = 1,
  kBiorthPsi = 2,
};

struct ParamBlock {
  std::string name;
  Mat value;
  ManifoldTag tag = ManifoldTag::kEuclidean;
  std::string group = "lnn";  // learning-rate group ("ae" or "lnn")
  int pair = -1;              // for kBiorthPsi: index of the partner phi block
};

struct ParamVector {
  std::vector<ParamBlock> blocks;

  int add(const std::string& name, const Mat& value,
          ManifoldTag tag = ManifoldTag::kEuclidean,
          const std::string& group = "lnn") {
    blocks.push_back({name, value, tag, group, -1});
    return static_cast<int>(blocks.size()) - 1;
  }
  int find(const std::string& name) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].name == name) return static_cast<int>(i);
    return -1;
  }
  Mat& operator[](const std::string& name) {
    int i = find(name);
    if (i < 0) throw NumericError("unknown parameter block: " + name);
    return blocks[static_cast<std::size_t>(i)].value;
  }
  const Mat& at(const std::string& name) const {
    int i = find(name);
    if (i < 0) throw NumericError("unknown parameter block: " + name);
    return blocks[static_cast<std::size_t>(i)].value;
  }
  long total_size() const {
    long s = 0;
    for (const auto& b : blocks) s += b.value.size();
    return s;
  }
  double squared_norm() const {
    double s = 0;
    for (const auto& b : blocks) s += b.value.squaredNorm();
    return s;
  }
  // Max biorthogonality residual over all registered pairs.
  double max_constraint_residual() const;
};

// --- Riemannian Adam -----------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with moments kept in the ambient representation; biorthogonal psi
// blocks are retracted after each Euclidean update.
class RiemannianAdam {
 public:
  explicit RiemannianAdam(const AdamConfig& cfg = {}) : cfg_(cfg) {}

  void step(ParamVector& params, const std::vector<Mat>& grads,
            const std::map<std::string, double>& lr_by_group);

  long iterations() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

// --- Checkpoint format ----------------------------------------------------

// Self-describing binary container of named blocks (shape + manifold tag +
// little-endian f64 data). Hyperparameters travel in a JSON sidecar written
// by the caller.
void save_checkpoint(const std::string& path, const ParamVector& params);
ParamVector load_checkpoint(const std::string& path);

}  // namespace rolnn::manifolds
