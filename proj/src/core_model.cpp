#include "rsense/core_model.hpp"

#include <algorithm>
#include <cmath>

namespace rsense {

GroundTruth gen_ground_truth(int n, int r, std::span<const double> spectrum, Seed seed) {
  require(r >= 1 && r <= n, "gen_ground_truth: need 1 <= r <= n");
  require(static_cast<int>(spectrum.size()) == r, "gen_ground_truth: spectrum must have r entries");
  for (double s : spectrum) require(s > 0.0, "gen_ground_truth: spectrum entries must be positive");

  Rng rng(seed);
  const Matrix g = gaussian_matrix(n, r, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, r);
  const Matrix rfac = qr.matrixQR().topLeftCorner(r, r).triangularView<Eigen::Upper>();
  // Sign fix makes Q Haar-distributed rather than biased by the QR convention.
  for (int j = 0; j < r; ++j)
    if (rfac(j, j) < 0.0) q.col(j) *= -1.0;

  std::vector<double> sorted(spectrum.begin(), spectrum.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  GroundTruth gt;
  gt.n = n;
  gt.r = r;
  gt.spectrum = Eigen::Map<const Vector>(sorted.data(), r);
  gt.factor = q * gt.spectrum.cwiseSqrt().asDiagonal();
  gt.matrix = symmetrize(gt.factor * gt.factor.transpose());
  return gt;
}

SensingOperator::SensingOperator(int n, const std::vector<Matrix>& mats) : n_(n) {
  require(n >= 1, "SensingOperator: n must be positive");
  require(!mats.empty(), "SensingOperator: need at least one measurement");
  design_.resize(static_cast<Eigen::Index>(mats.size()), static_cast<Eigen::Index>(n) * n);
  for (std::size_t i = 0; i < mats.size(); ++i) {
    const Matrix& a = mats[i];
    require(a.rows() == n && a.cols() == n, "SensingOperator: sensing matrix has wrong shape");
    require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
            "SensingOperator: sensing matrices must be symmetric");
    design_.row(static_cast<Eigen::Index>(i)) = a.reshaped().transpose();
  }
}

Matrix SensingOperator::sensing_matrix(int i) const {
  require(i >= 0 && i < m(), "SensingOperator: measurement index out of range");
  return design_.row(i).reshaped(n_, n_);
}

Vector SensingOperator::apply(const Matrix& M) const {
  require(M.rows() == n_ && M.cols() == n_, "SensingOperator::apply: dimension mismatch");
  return design_ * M.reshaped();
}

Matrix SensingOperator::adjoint(const Vector& v) const {
  require(v.size() == m(), "SensingOperator::adjoint: dimension mismatch");
  const Vector flat = design_.transpose() * v;
  return flat.reshaped(n_, n_);
}

SensingOperator gen_gaussian_operator(int n, int m, Seed seed) {
  require(n >= 1, "gen_gaussian_operator: n must be positive");
  require(m >= 1, "gen_gaussian_operator: m must be positive");
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  std::vector<Matrix> mats;
  mats.reserve(m);
  for (int i = 0; i < m; ++i) mats.push_back(scale * symmetrize(gaussian_matrix(n, n, rng)));
  return SensingOperator(n, mats);
}

SensingOperator make_basis_operator(int n) {
  std::vector<Matrix> mats;
  mats.reserve(static_cast<std::size_t>(n) * n);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      Matrix e = Matrix::Zero(n, n);
      e(a, b) = 1.0;
      mats.push_back(symmetrize(e));
    }
  return SensingOperator(n, mats);
}

Matrix random_low_rank_symmetric(int n, int rank, Rng& rng) {
  require(rank >= 1 && rank <= n, "random_low_rank_symmetric: need 1 <= rank <= n");
  const int pos = (rank + 1) / 2;
  const int neg = rank / 2;
  const Matrix g = gaussian_matrix(n, pos, rng);
  Matrix x = g * g.transpose();
  if (neg > 0) {
    const Matrix h = gaussian_matrix(n, neg, rng);
    x -= h * h.transpose();
  }
  x = symmetrize(x);
  return x / x.norm();
}

RipEstimate estimate_rip(const SensingOperator& op, int rank, int trials, Seed seed) {
  require(trials >= 1, "estimate_rip: trials must be >= 1");
  require(rank >= 1 && rank <= op.n(), "estimate_rip: need 1 <= rank <= n");
  RipEstimate est{0.0, rank, trials, seed};
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    const Matrix x = random_low_rank_symmetric(op.n(), rank, rng);
    const double ratio = op.apply(x).squaredNorm() / x.squaredNorm();
    est.delta_hat = std::max(est.delta_hat, std::abs(ratio - 1.0));
  }
  return est;
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string NoiseModel::kind_name() const {
  return std::visit(Overloaded{[](const noise::Gaussian&) { return std::string("gaussian"); },
                               [](const noise::SubGaussianScaled&) { return std::string("sub_gaussian_scaled"); },
                               [](const noise::Uniform&) { return std::string("uniform"); },
                               [](const noise::Laplace&) { return std::string("laplace"); },
                               [](const noise::StudentT&) { return std::string("student_t"); }},
                    kind);
}

std::vector<double> NoiseModel::params() const {
  return std::visit(Overloaded{[](const noise::Gaussian& g) { return std::vector<double>{g.sigma}; },
                               [](const noise::SubGaussianScaled& g) { return std::vector<double>{g.sigma0}; },
                               [](const noise::Uniform& u) { return std::vector<double>{u.a, u.b}; },
                               [](const noise::Laplace& l) { return std::vector<double>{l.scale}; },
                               [](const noise::StudentT& t) { return std::vector<double>{t.dof, t.scale}; }},
                    kind);
}

NoiseModel NoiseModel::from_name(const std::string& kind, std::span<const double> p, bool centered) {
  auto need = [&](std::size_t count) {
    require(p.size() == count, "noise model '" + kind + "' expects " + std::to_string(count) + " parameter(s)");
  };
  NoiseModel model;
  model.centered = centered;
  if (kind == "gaussian") {
    need(1);
    model.kind = noise::Gaussian{p[0]};
  } else if (kind == "sub_gaussian_scaled") {
    need(1);
    model.kind = noise::SubGaussianScaled{p[0]};
  } else if (kind == "uniform") {
    need(2);
    model.kind = noise::Uniform{p[0], p[1]};
  } else if (kind == "laplace") {
    need(1);
    model.kind = noise::Laplace{p[0]};
  } else if (kind == "student_t") {
    need(2);
    model.kind = noise::StudentT{p[0], p[1]};
  } else {
    throw InvalidArgument("unknown noise kind '" + kind + "'");
  }
  model.validate();
  return model;
}

void NoiseModel::validate() const {
  std::visit(Overloaded{[](const noise::Gaussian& g) { require(g.sigma >= 0.0, "gaussian noise: sigma must be >= 0"); },
                        [](const noise::SubGaussianScaled& g) {
                          require(g.sigma0 >= 0.0, "sub_gaussian_scaled noise: sigma0 must be >= 0");
                        },
                        [](const noise::Uniform& u) { require(u.a < u.b, "uniform noise: need a < b"); },
                        [](const noise::Laplace& l) { require(l.scale > 0.0, "laplace noise: scale must be > 0"); },
                        [](const noise::StudentT& t) {
                          require(t.dof > 0.0, "student_t noise: dof must be > 0");
                          require(t.scale > 0.0, "student_t noise: scale must be > 0");
                        }},
             kind);
}

Vector sample_noise(const NoiseModel& model, int m, Seed seed) {
  require(m >= 1, "sample_noise: m must be >= 1");
  model.validate();
  Rng rng(seed);
  Vector w(m);
  std::visit(Overloaded{[&](const noise::Gaussian& g) {
                          std::normal_distribution<double> d(0.0, 1.0);
                          for (int i = 0; i < m; ++i) w(i) = g.sigma * d(rng);
                        },
                        [&](const noise::SubGaussianScaled& g) {
                          std::normal_distribution<double> d(0.0, 1.0);
                          const double s = g.sigma0 / std::sqrt(static_cast<double>(m));
                          for (int i = 0; i < m; ++i) w(i) = s * d(rng);
                        },
                        [&](const noise::Uniform& u) {
                          std::uniform_real_distribution<double> d(u.a, u.b);
                          for (int i = 0; i < m; ++i) w(i) = d(rng);
                        },
                        [&](const noise::Laplace& l) {
                          std::uniform_real_distribution<double> d(-0.5, 0.5);
                          for (int i = 0; i < m; ++i) {
                            const double u = d(rng);
                            w(i) = -l.scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
                          }
                        },
                        [&](const noise::StudentT& t) {
                          std::student_t_distribution<double> d(t.dof);
                          for (int i = 0; i < m; ++i) w(i) = t.scale * d(rng);
                        }},
             model.kind);
  if (model.centered) w.array() -= w.mean();
  return w;
}

double prob_norm_bound(double eps, int m, double sigma) {
  require(eps > 0.0, "prob_norm_bound: eps must be > 0");
  require(sigma > 0.0, "prob_norm_bound: sigma must be > 0");
  require(m >= 1, "prob_norm_bound: m must be >= 1");
  const double raw = 1.0 - 2.0 * std::exp(-eps * eps / (16.0 * m * sigma * sigma));
  return std::clamp(raw, 0.0, 1.0);
}

ProblemInstance make_instance(const InstanceSpec& spec) {
  require(spec.m >= 1, "make_instance: m must be >= 1");
  ProblemInstance inst;
  inst.seed = spec.seed;
  inst.truth = gen_ground_truth(spec.n, spec.r, spec.spectrum, derive_seed(spec.seed, {0}));
  inst.op = gen_gaussian_operator(spec.n, spec.m, derive_seed(spec.seed, {1}));
  inst.noise = sample_noise(spec.noise, spec.m, derive_seed(spec.seed, {2}));
  if (spec.noise_norm) {
    require(*spec.noise_norm >= 0.0, "make_instance: noise_norm must be >= 0");
    const double norm = inst.noise.norm();
    if (norm > 0.0) inst.noise *= *spec.noise_norm / norm;
  }
  inst.measurements = inst.op.apply(inst.truth.matrix) + inst.noise;
  return inst;
}

ProblemInstance with_noise(const ProblemInstance& base, Vector noise) {
  require(noise.size() == base.op.m(), "with_noise: noise length must equal m");
  ProblemInstance inst = base;
  inst.noise = std::move(noise);
  inst.measurements = inst.op.apply(inst.truth.matrix) + inst.noise;
  return inst;
}

}  // namespace rsense
