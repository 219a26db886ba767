#pragma once

// Mean-field variational inference for the generative capsule model.
//
// q(Y) is a Gaussian per object; q(Z) is a responsibility matrix R whose
// rows are the M observed points followed by N - M dummy rows and whose
// columns are the flattened (object, part) slots. Two priors over Z:
//
//   PriorKind::ds   doubly-stochastic relaxation of a permutation prior;
//                   R is square and normalized with Sinkhorn-Knopp.
//   PriorKind::gmm  independent categorical per observed point; dummy rows
//                   are unused and kept at zero.

#include "gencaps/geometry.hpp"
#include "gencaps/sinkhorn.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace gencaps {

enum class PriorKind { ds, gmm };

std::string_view to_string(PriorKind kind);

struct ModelPrior {
  Vec4 mu0 = Vec4::Zero();
  Mat4 precision0 = Mat4::Identity();
  /// Prior assignment weights a_mnk, N x N.
  Eigen::MatrixXd assignment;
  /// Observation precision.
  double lambda = 500.0;

  /// mu0 = 0, precision0 = I, a = 1/N.
  static ModelPrior standard(std::size_t num_slots, double lambda);
};

struct PosePosterior {
  Vec4 mu = Vec4::Zero();
  Mat4 precision = Mat4::Identity();
};

using Posteriors = std::vector<PosePosterior, Eigen::aligned_allocator<PosePosterior>>;

/// sum_m sum_n r_mnk F_kn^T x_m over observed rows: the data part of the
/// information vector of object k, before scaling by lambda.
Vec4 pose_data_term(std::span<const Vec2> points, const TemplateLibrary& lib,
                    const Eigen::MatrixXd& r, std::size_t k);

/// Closed-form q(Y) update given R. Only observed rows contribute.
Posteriors update_pose_posterior(std::span<const Vec2> points, const TemplateLibrary& lib,
                                 const Eigen::MatrixXd& r, const ModelPrior& prior);

/// N x N matrix of log rho. Observed rows carry the expected Gaussian
/// log-likelihood (with the trace(F^T F Lambda^-1) term); dummy rows carry
/// log a only.
Eigen::MatrixXd update_log_rho(std::span<const Vec2> points, const TemplateLibrary& lib,
                               const Posteriors& posteriors, const ModelPrior& prior);

/// Normalizes log rho into responsibilities. For ds: subtract each row's
/// maximum, exponentiate with a 1e-300 floor, then Sinkhorn. With `strict`
/// a Sinkhorn failure propagates; otherwise the last iterate is returned
/// (columns exact, rows within the reached deviation). For gmm: softmax of
/// each observed row; dummy rows set to 0.
Eigen::MatrixXd update_q_z(const Eigen::MatrixXd& log_rho, std::size_t num_observed,
                           PriorKind kind, const SinkhornOptions& sinkhorn = {1e-10, 1000},
                           bool strict = true);

struct ElboTerms {
  double expected_loglik = 0.0;
  double kl_y = 0.0;
  double kl_z = 0.0;
  double total() const { return expected_loglik - kl_y - kl_z; }
};

/// Evidence lower bound of (R, q(Y)). KL(q(Z)||p(Z)) runs over all N rows
/// for ds and over the observed rows for gmm; 0 log 0 is taken as 0.
ElboTerms elbo(std::span<const Vec2> points, const TemplateLibrary& lib, const Eigen::MatrixXd& r,
               const Posteriors& posteriors, const ModelPrior& prior, PriorKind kind);

/// KL(N(mu, precision^-1) || N(mu0, precision0^-1)) summed over objects.
double kl_pose(const Posteriors& posteriors, const ModelPrior& prior);

struct VIConfig {
  PriorKind prior_kind = PriorKind::ds;
  double lambda_init = 500.0;
  double lambda_max = 10000.0;
  double anneal_factor = 10.0;
  int restarts = 5;
  std::uint64_t seed = 0;
  /// A lambda stage ends when |dL| <= rel_tol * |L| or after this many cycles.
  double rel_tol = 1e-6;
  int max_iters_per_stage = 200;
  /// Extra fresh initializations tried when the sparsity rule fires.
  int sparsity_retries = 5;
  SinkhornOptions sinkhorn{1e-10, 1000};
  /// Abort a run when Sinkhorn misses its tolerance instead of continuing
  /// with the last iterate.
  bool strict_sinkhorn = false;
  Vec4 mu0 = Vec4::Zero();
  Mat4 precision0 = Mat4::Identity();
};

struct VIResult {
  Eigen::MatrixXd r;
  Posteriors posteriors;
  std::vector<double> elbo_trace;
  /// lambda in force for each entry of elbo_trace.
  std::vector<double> lambda_trace;
  double final_elbo = 0.0;
  int restarts_used = 0;
  bool converged = false;
  /// Sparsity rule still violated after the retry budget, or every run failed.
  bool degenerate = false;
};

/// One annealed coordinate-ascent run from a random R.
VIResult run_vi_once(std::span<const Vec2> points, const TemplateLibrary& lib,
                     const VIConfig& cfg, std::uint64_t init_seed);

/// True when some object holds an entry above 0.9 yet explains fewer than
/// two points in total (observed rows only).
bool violates_sparsity(const Eigen::MatrixXd& r, std::size_t num_observed,
                       const TemplateLibrary& lib);

/// Best-of-restarts by final ELBO followed by the sparsity re-run rule.
/// Throws std::invalid_argument for an empty scene or M > N.
VIResult run_vi(std::span<const Vec2> points, const TemplateLibrary& lib, const VIConfig& cfg);

struct ExtractedPartition {
  /// Label per universe element: elements [0, M) are the observed points,
  /// [M, N) stand for unobserved slots. 0 = missing, k+1 = object k.
  std::vector<int> labels;
  std::vector<bool> object_present;
  bool degenerate = false;
};

/// Hard partition from R. Each observed point goes to the object with the
/// largest summed responsibility (ties to the lowest index); objects with
/// fewer than 2 points are dissolved into the missing set; parts of a
/// surviving object whose observed column mass is below 0.5 occupy
/// unobserved elements labelled with that object. `degenerate` is set on a
/// tie or when an object receives more points than it has parts.
ExtractedPartition extract_partition(const Eigen::MatrixXd& r, std::size_t num_observed,
                                     const TemplateLibrary& lib);

}  // namespace gencaps
