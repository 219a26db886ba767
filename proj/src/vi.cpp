#include "gencaps/vi.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>

namespace gencaps {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
constexpr double kEntryFloor = 1e-300;

double xlogy_ratio(double r, double a) { return r > 0.0 ? r * std::log(r / a) : 0.0; }

Eigen::MatrixXd random_init(std::size_t num_observed, std::size_t num_slots, PriorKind kind,
                            std::mt19937_64& rng, const SinkhornOptions& sk) {
  const auto n = static_cast<Eigen::Index>(num_slots);
  const auto m = static_cast<Eigen::Index>(num_observed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) r(i, j) = std::max(u(rng), kEntryFloor);
  }
  if (kind == PriorKind::ds) return sinkhorn_scale(std::move(r), sk).matrix;
  r.bottomRows(n - m).setZero();
  r.topRows(m).array().colwise() /= r.topRows(m).rowwise().sum().array();
  return r;
}

}  // namespace

std::string_view to_string(PriorKind kind) { return kind == PriorKind::ds ? "gcm-ds" : "gcm-gmm"; }

ModelPrior ModelPrior::standard(std::size_t num_slots, double lambda) {
  ModelPrior p;
  const auto n = static_cast<Eigen::Index>(num_slots);
  p.assignment = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(num_slots));
  p.lambda = lambda;
  return p;
}

Vec4 pose_data_term(std::span<const Vec2> points, const TemplateLibrary& lib,
                    const Eigen::MatrixXd& r, std::size_t k) {
  Vec4 acc = Vec4::Zero();
  const auto& tmpl = lib.at(k);
  for (std::size_t m = 0; m < points.size(); ++m) {
    for (std::size_t n = 0; n < tmpl.size(); ++n) {
      const double w = r(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(lib.slot(k, n)));
      acc += w * tmpl.predictor(n).transpose() * points[m];
    }
  }
  return acc;
}

Posteriors update_pose_posterior(std::span<const Vec2> points, const TemplateLibrary& lib,
                                 const Eigen::MatrixXd& r, const ModelPrior& prior) {
  const auto m_obs = static_cast<Eigen::Index>(points.size());
  // Vec2 is a packed pair of doubles, so the scene maps onto a 2 x M matrix.
  const Eigen::Map<const Eigen::Matrix<double, 2, Eigen::Dynamic>> x(
      reinterpret_cast<const double*>(points.data()), 2, m_obs);

  Posteriors out(lib.num_objects());
  for (std::size_t k = 0; k < lib.num_objects(); ++k) {
    const auto& tmpl = lib.at(k);
    Mat4 gram = Mat4::Zero();
    Vec4 info = Vec4::Zero();
    for (std::size_t n = 0; n < tmpl.size(); ++n) {
      const auto col = static_cast<Eigen::Index>(lib.slot(k, n));
      const auto w = r.col(col).head(m_obs);
      const double mass = w.sum();
      const Vec2 weighted = x * w;
      const auto& f = tmpl.predictor(n);
      gram.noalias() += mass * f.transpose() * f;
      info.noalias() += f.transpose() * weighted;
    }
    auto& post = out[k];
    post.precision = prior.precision0 + prior.lambda * gram;
    const Vec4 rhs = prior.precision0 * prior.mu0 + prior.lambda * info;
    post.mu = post.precision.llt().solve(rhs);
  }
  return out;
}

Eigen::MatrixXd update_log_rho(std::span<const Vec2> points, const TemplateLibrary& lib,
                               const Posteriors& posteriors, const ModelPrior& prior) {
  const auto m_obs = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd log_rho = prior.assignment.array().log().matrix();
  const double base = -kLog2Pi + std::log(prior.lambda);

  for (std::size_t k = 0; k < lib.num_objects(); ++k) {
    const auto& post = posteriors.at(k);
    const Eigen::LLT<Mat4> llt(post.precision);
    const auto& tmpl = lib.at(k);
    for (std::size_t n = 0; n < tmpl.size(); ++n) {
      const auto& f = tmpl.predictor(n);
      const auto col = static_cast<Eigen::Index>(lib.slot(k, n));
      // trace(F^T F Lambda^-1) = ||L^-1 F^T||_F^2 with Lambda = L L^T.
      const Eigen::Matrix<double, kPoseDim, 2> half = llt.matrixL().solve(f.transpose());
      const double trace = half.squaredNorm();
      const Vec2 pred = f * post.mu;
      for (Eigen::Index m = 0; m < m_obs; ++m) {
        const double quad = (points[static_cast<std::size_t>(m)] - pred).squaredNorm();
        log_rho(m, col) += base - 0.5 * prior.lambda * (quad + trace);
      }
    }
  }
  return log_rho;
}

Eigen::MatrixXd update_q_z(const Eigen::MatrixXd& log_rho, std::size_t num_observed,
                           PriorKind kind, const SinkhornOptions& sinkhorn, bool strict) {
  if (!log_rho.allFinite()) throw std::invalid_argument("update_q_z: log rho must be finite");
  const auto m_obs = static_cast<Eigen::Index>(num_observed);
  Eigen::MatrixXd r = log_rho;
  r.colwise() -= r.rowwise().maxCoeff();
  r = r.array().exp().max(kEntryFloor).matrix();
  if (kind == PriorKind::ds) {
    if (strict) return sinkhorn_knopp(r, sinkhorn.tol, sinkhorn.max_iters);
    auto res = sinkhorn_scale(std::move(r), sinkhorn);
    return std::move(res.matrix);
  }

  r.bottomRows(r.rows() - m_obs).setZero();
  r.topRows(m_obs).array().colwise() /= r.topRows(m_obs).rowwise().sum().array();
  return r;
}

double kl_pose(const Posteriors& posteriors, const ModelPrior& prior) {
  const double logdet0 = 2.0 * prior.precision0.llt().matrixLLT().diagonal().array().log().sum();
  double kl = 0.0;
  for (const auto& post : posteriors) {
    const Eigen::LLT<Mat4> llt(post.precision);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const Vec4 d = post.mu - prior.mu0;
    const double trace = llt.solve(prior.precision0).trace();
    // The leading constant is d/2 = 2 for four pose dimensions.
    kl -= 0.5 * kPoseDim + 0.5 * logdet0 - 0.5 * logdet - 0.5 * d.dot(prior.precision0 * d) -
          0.5 * trace;
  }
  return kl;
}

ElboTerms elbo(std::span<const Vec2> points, const TemplateLibrary& lib, const Eigen::MatrixXd& r,
               const Posteriors& posteriors, const ModelPrior& prior, PriorKind kind) {
  const auto m_obs = static_cast<Eigen::Index>(points.size());
  const auto n_slots = static_cast<Eigen::Index>(lib.num_slots());
  const double base = -kLog2Pi + std::log(prior.lambda);

  ElboTerms t;
  for (std::size_t k = 0; k < lib.num_objects(); ++k) {
    const auto& post = posteriors.at(k);
    const Eigen::LLT<Mat4> llt(post.precision);
    const auto& tmpl = lib.at(k);
    for (std::size_t n = 0; n < tmpl.size(); ++n) {
      const auto& f = tmpl.predictor(n);
      const auto col = static_cast<Eigen::Index>(lib.slot(k, n));
      const Eigen::Matrix<double, kPoseDim, 2> half = llt.matrixL().solve(f.transpose());
      const double trace = half.squaredNorm();
      const Vec2 pred = f * post.mu;
      for (Eigen::Index m = 0; m < m_obs; ++m) {
        const double w = r(m, col);
        if (w == 0.0) continue;
        const double quad = (points[static_cast<std::size_t>(m)] - pred).squaredNorm();
        t.expected_loglik += w * (base - 0.5 * prior.lambda * (quad + trace));
      }
    }
  }
  t.kl_y = kl_pose(posteriors, prior);
  const Eigen::Index rows = kind == PriorKind::ds ? n_slots : m_obs;
  for (Eigen::Index m = 0; m < rows; ++m) {
    for (Eigen::Index c = 0; c < n_slots; ++c) {
      t.kl_z += xlogy_ratio(r(m, c), prior.assignment(m, c));
    }
  }
  return t;
}

VIResult run_vi_once(std::span<const Vec2> points, const TemplateLibrary& lib,
                     const VIConfig& cfg, std::uint64_t init_seed) {
  const std::size_t m_obs = points.size();
  std::mt19937_64 rng(init_seed);
  ModelPrior prior = ModelPrior::standard(lib.num_slots(), cfg.lambda_init);
  prior.mu0 = cfg.mu0;
  prior.precision0 = cfg.precision0;

  VIResult res;
  res.r = random_init(m_obs, lib.num_slots(), cfg.prior_kind, rng, cfg.sinkhorn);
  double previous = std::numeric_limits<double>::quiet_NaN();
  int stage_iters = 0;
  for (;;) {
    res.posteriors = update_pose_posterior(points, lib, res.r, prior);
    const auto log_rho = update_log_rho(points, lib, res.posteriors, prior);
    res.r = update_q_z(log_rho, m_obs, cfg.prior_kind, cfg.sinkhorn, cfg.strict_sinkhorn);
    const double current = elbo(points, lib, res.r, res.posteriors, prior, cfg.prior_kind).total();
    res.elbo_trace.push_back(current);
    res.lambda_trace.push_back(prior.lambda);
    ++stage_iters;

    const bool settled =
        std::isfinite(previous) && std::abs(current - previous) <= cfg.rel_tol * std::abs(current);
    if (settled || stage_iters >= cfg.max_iters_per_stage) {
      if (prior.lambda < cfg.lambda_max) {
        prior.lambda = std::min(prior.lambda * cfg.anneal_factor, cfg.lambda_max);
        previous = std::numeric_limits<double>::quiet_NaN();
        stage_iters = 0;
        continue;
      }
      res.converged = settled;
      break;
    }
    previous = current;
  }
  res.final_elbo = res.elbo_trace.back();
  res.restarts_used = 1;
  return res;
}

bool violates_sparsity(const Eigen::MatrixXd& r, std::size_t num_observed,
                       const TemplateLibrary& lib) {
  const auto m_obs = static_cast<Eigen::Index>(num_observed);
  for (std::size_t k = 0; k < lib.num_objects(); ++k) {
    const auto block = r.block(0, static_cast<Eigen::Index>(lib.offset(k)), m_obs,
                               static_cast<Eigen::Index>(lib.at(k).size()));
    if (block.maxCoeff() > 0.9 && block.sum() < 2.0) return true;
  }
  return false;
}

VIResult run_vi(std::span<const Vec2> points, const TemplateLibrary& lib, const VIConfig& cfg) {
  if (points.empty()) throw std::invalid_argument("run_vi: empty scene");
  if (points.size() > lib.num_slots()) {
    throw std::invalid_argument("run_vi: scene has more points than template slots");
  }
  if (cfg.restarts < 1) throw std::invalid_argument("run_vi: restarts must be >= 1");

  std::uint64_t next_seed = cfg.seed;
  int attempts = 0;
  auto attempt = [&]() -> std::optional<VIResult> {
    ++attempts;
    try {
      return run_vi_once(points, lib, cfg, std::mt19937_64(next_seed++)());
    } catch (const SinkhornError&) {
      return std::nullopt;
    }
  };

  std::optional<VIResult> best;
  auto consider = [&](std::optional<VIResult>& cand) {
    if (cand && (!best || cand->final_elbo > best->final_elbo)) best = std::move(cand);
  };
  for (int i = 0; i < cfg.restarts; ++i) {
    auto cand = attempt();
    consider(cand);
  }

  bool degenerate = !best || violates_sparsity(best->r, points.size(), lib);
  for (int retry = 0; degenerate && retry < cfg.sparsity_retries; ++retry) {
    auto cand = attempt();
    if (cand && !violates_sparsity(cand->r, points.size(), lib)) {
      best = std::move(cand);
      degenerate = false;
    } else {
      consider(cand);
    }
  }

  if (!best) {
    // Every run hit a Sinkhorn failure: fall back to the prior.
    VIResult fallback;
    const ModelPrior prior = ModelPrior::standard(lib.num_slots(), cfg.lambda_init);
    fallback.r = prior.assignment;
    if (cfg.prior_kind == PriorKind::gmm) {
      fallback.r.bottomRows(fallback.r.rows() - static_cast<Eigen::Index>(points.size())).setZero();
    }
    fallback.posteriors = Posteriors(lib.num_objects());
    best = std::move(fallback);
  }
  best->restarts_used = attempts;
  best->degenerate = degenerate;
  return std::move(*best);
}

ExtractedPartition extract_partition(const Eigen::MatrixXd& r, std::size_t num_observed,
                                     const TemplateLibrary& lib) {
  const std::size_t n_slots = lib.num_slots();
  const std::size_t n_obj = lib.num_objects();
  const auto m_obs = static_cast<Eigen::Index>(num_observed);
  if (num_observed > n_slots || r.rows() != static_cast<Eigen::Index>(n_slots) ||
      r.cols() != static_cast<Eigen::Index>(n_slots)) {
    throw std::invalid_argument("extract_partition: R shape does not match the library");
  }

  ExtractedPartition out;
  out.labels.assign(n_slots, 0);
  out.object_present.assign(n_obj, false);

  std::vector<std::size_t> owner(num_observed);
  std::vector<std::size_t> count(n_obj, 0);
  for (Eigen::Index m = 0; m < m_obs; ++m) {
    std::size_t best_k = 0;
    double best_mass = -1.0;
    bool tied = false;
    for (std::size_t k = 0; k < n_obj; ++k) {
      const double mass = r.row(m)
                              .segment(static_cast<Eigen::Index>(lib.offset(k)),
                                       static_cast<Eigen::Index>(lib.at(k).size()))
                              .sum();
      if (mass > best_mass) {
        best_mass = mass;
        best_k = k;
        tied = false;
      } else if (mass == best_mass) {
        tied = true;
      }
    }
    if (tied) out.degenerate = true;
    owner[static_cast<std::size_t>(m)] = best_k;
    ++count[best_k];
  }

  for (std::size_t k = 0; k < n_obj; ++k) {
    out.object_present[k] = count[k] >= 2;
    if (count[k] > lib.at(k).size()) out.degenerate = true;
  }
  for (std::size_t m = 0; m < num_observed; ++m) {
    if (out.object_present[owner[m]]) out.labels[m] = static_cast<int>(owner[m]) + 1;
  }

  std::size_t next_unobserved = num_observed;
  for (std::size_t k = 0; k < n_obj && next_unobserved < n_slots; ++k) {
    if (!out.object_present[k]) continue;
    for (std::size_t n = 0; n < lib.at(k).size() && next_unobserved < n_slots; ++n) {
      const double mass = r.col(static_cast<Eigen::Index>(lib.slot(k, n))).head(m_obs).sum();
      if (mass < 0.5) out.labels[next_unobserved++] = static_cast<int>(k) + 1;
    }
  }
  return out;
}

}  // namespace gencaps
