#include "rolnn/manifolds.hpp"

#include <Eigen/Eigenvalues>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

// Checkpoint payloads are little-endian f64 by format definition.
static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace rolnn::manifolds {

Mat sym_expm(const Mat& s, double sym_tol) {
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > sym_tol)
    throw NumericError("sym_expm: input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  Vec lam = es.eigenvalues().array().exp();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Mat sym_logm(const Mat& p) {
  if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw NumericError("sym_logm: input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(p);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericError("sym_logm: non-positive eigenvalue");
  Vec lam = es.eigenvalues().array().log();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

int expm_squarings(double fro_norm) {
  int m = 0;
  while (fro_norm > 0.25 && m < 40) {
    fro_norm *= 0.5;
    ++m;
  }
  return m;
}

void expm_taylor(const Mat& s, Mat* out) {
  const int d = static_cast<int>(s.rows());
  const int m = expm_squarings(s.norm());
  Mat x = s / std::pow(2.0, m);
  Mat term = Mat::Identity(d, d);
  Mat acc = Mat::Identity(d, d);
  double fact = 1.0;
  for (int k = 1; k <= kExpmTaylorOrder; ++k) {
    term = x * term;
    fact /= k;
    acc += fact * term;
  }
  for (int k = 0; k < m; ++k) acc = acc * acc;
  *out = acc;
}

void expm_taylor_frechet(const Mat& s, const Mat& e, Mat* out, Mat* dout) {
  const int d = static_cast<int>(s.rows());
  const int m = expm_squarings(s.norm());
  const double scale = std::pow(2.0, -m);
  Mat x = s * scale;
  Mat ex = e * scale;
  // M_k = X^k, D_k = d(X^k)[E]; sum the Taylor series of both.
  Mat mk = Mat::Identity(d, d);
  Mat dk = Mat::Zero(d, d);
  Mat t = Mat::Identity(d, d);
  Mat l = Mat::Zero(d, d);
  double fact = 1.0;
  for (int k = 1; k <= kExpmTaylorOrder; ++k) {
    dk = ex * mk + x * dk;
    mk = x * mk;
    fact /= k;
    t += fact * mk;
    l += fact * dk;
  }
  for (int k = 0; k < m; ++k) {
    l = t * l + l * t;
    t = t * t;
  }
  *out = t;
  *dout = l;
}

BiorthogonalPair biorthogonal_retract(const BiorthogonalPair& pair,
                                      double cond_cap,
                                      const std::string& layer_name) {
  Mat g = pair.phi.transpose() * pair.psi;
  Eigen::JacobiSVD<Mat> svd(g);
  double smin = svd.singularValues().minCoeff();
  double smax = svd.singularValues().maxCoeff();
  if (smin <= 0.0 || smax / smin > cond_cap)
    throw NumericError("biorthogonal retraction: ill-conditioned phi^T psi" +
                       (layer_name.empty() ? std::string() : " in layer " + layer_name));
  BiorthogonalPair out = pair;
  out.psi = pair.psi * g.inverse();
  return out;
}

double ParamVector::max_constraint_residual() const {
  double worst = 0.0;
  for (const auto& b : blocks) {
    if (b.tag != ManifoldTag::kBiorthPsi || b.pair < 0) continue;
    const Mat& phi = blocks[static_cast<std::size_t>(b.pair)].value;
    int k = static_cast<int>(phi.cols());
    worst = std::max(worst,
                     (b.value.transpose() * phi - Mat::Identity(k, k)).norm());
  }
  return worst;
}

void RiemannianAdam::step(ParamVector& params, const std::vector<Mat>& grads,
                          const std::map<std::string, double>& lr_by_group) {
  if (grads.size() != params.blocks.size())
    throw NumericError("adam: gradient/parameter block count mismatch");
  if (m_.empty()) {
    m_.resize(params.blocks.size());
    v_.resize(params.blocks.size());
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
      m_[i] = Mat::Zero(params.blocks[i].value.rows(), params.blocks[i].value.cols());
      v_[i] = m_[i];
    }
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    ParamBlock& blk = params.blocks[i];
    const Mat& g = grads[i];
    if (!g.allFinite())
      throw NumericError("adam: non-finite gradient in block " + blk.name);
    auto it = lr_by_group.find(blk.group);
    double lr = it == lr_by_group.end() ? 0.0 : it->second;
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    blk.value -= lr * mhat.cwiseQuotient(
                          (vhat.cwiseSqrt().array() + cfg_.eps).matrix());
  }
  // Restore the biorthogonality constraint after the ambient update.
  for (auto& blk : params.blocks) {
    if (blk.tag != ManifoldTag::kBiorthPsi || blk.pair < 0) continue;
    const Mat& phi = params.blocks[static_cast<std::size_t>(blk.pair)].value;
    BiorthogonalPair pair{phi, blk.value, Vec()};
    blk.value = biorthogonal_retract(pair, 1e12, blk.name).psi;
  }
}

namespace {

constexpr char kMagic[8] = {'R', 'L', 'N', 'N', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamVector& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path);
  f.write(kMagic, 8);
  write_pod<std::uint32_t>(f, 1u);  // version
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(params.blocks.size()));
  for (const auto& b : params.blocks) {
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(b.name.size()));
    f.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    write_pod<std::uint8_t>(f, static_cast<std::uint8_t>(b.tag));
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(b.group.size()));
    f.write(b.group.data(), static_cast<std::streamsize>(b.group.size()));
    write_pod<std::int32_t>(f, b.pair);
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(b.value.rows()));
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(b.value.cols()));
    f.write(reinterpret_cast<const char*>(b.value.data()),
            static_cast<std::streamsize>(sizeof(double)) * b.value.size());
  }
  if (!f) throw IoError("checkpoint write failed: " + path);
}

ParamVector load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("bad checkpoint magic: " + path);
  auto version = read_pod<std::uint32_t>(f);
  if (version != 1u) throw IoError("unsupported checkpoint version");
  auto nblocks = read_pod<std::uint32_t>(f);
  ParamVector params;
  for (std::uint32_t i = 0; i < nblocks; ++i) {
    ParamBlock b;
    auto nlen = read_pod<std::uint32_t>(f);
    b.name.resize(nlen);
    f.read(b.name.data(), nlen);
    b.tag = static_cast<ManifoldTag>(read_pod<std::uint8_t>(f));
    auto glen = read_pod<std::uint32_t>(f);
    b.group.resize(glen);
    f.read(b.group.data(), glen);
    b.pair = read_pod<std::int32_t>(f);
    auto rows = read_pod<std::uint32_t>(f);
    auto cols = read_pod<std::uint32_t>(f);
    b.value.resize(rows, cols);
    f.read(reinterpret_cast<char*>(b.value.data()),
           static_cast<std::streamsize>(sizeof(double)) * b.value.size());
    params.blocks.push_back(std::move(b));
  }
  if (!f) throw IoError("truncated checkpoint: " + path);
  return params;
}

}  // namespace rolnn::manifolds
