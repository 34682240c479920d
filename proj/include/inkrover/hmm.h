// include/inkrover/hmm.h
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Discrete and diagonal-Gaussian-mixture HMMs: scaled forward-backward,
// Baum-Welch re-estimation, log-domain Viterbi and mixture growth.

#ifndef INKROVER_HMM_H_
#define INKROVER_HMM_H_

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "inkrover/features.h"

namespace inkrover {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Topology { kErgodic, kLeftToRight };

/// b_j(k): probs[j][k].
struct DiscreteEmission {
  std::vector<std::vector<double>> probs;
  std::size_t num_symbols() const { return probs.empty() ? 0 : probs.front().size(); }
};

struct Gaussian {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> var;  // diagonal

  friend bool operator==(const Gaussian&, const Gaussian&) = default;
};

inline constexpr std::size_t kMaxMixtureComponents = 48;

struct GaussianMixtureEmission {
  std::size_t dim = 0;
  std::vector<std::vector<Gaussian>> states;
};

using Emission = std::variant<DiscreteEmission, GaussianMixtureEmission>;

/// lambda = (A, B, pi). Left-to-right models only allow a_ii and a_i,i+1.
/// `exit` is the probability of leaving the final state; it is what links a
/// character model to the next one when models are concatenated, so the last
/// row of A sums to 1 - exit. Models that are not chained keep exit = 0.
struct HmmModel {
  std::vector<double> pi;
  Matrix trans;
  double exit = 0.0;
  Emission emission;
  Topology topology = Topology::kErgodic;

  std::size_t num_states() const { return pi.size(); }
  bool is_gaussian() const { return std::holds_alternative<GaussianMixtureEmission>(emission); }
  const DiscreteEmission& discrete() const;
  const GaussianMixtureEmission& gmm() const;
  GaussianMixtureEmission& gmm();

  /// Throws InvariantError naming the first broken invariant.
  void validate(double tol = 1e-9, double variance_floor = 0.0) const;
};

/// Non-owning view of an observation sequence: either discrete symbols or
/// feature frames.
class ObsRef {
 public:
  ObsRef(std::span<const int> symbols) : symbols_(symbols), is_symbols_(true) {}
  ObsRef(const std::vector<int>& symbols) : ObsRef(std::span<const int>(symbols)) {}
  ObsRef(const FeatureSequence& frames) : frames_(&frames), is_symbols_(false) {}

  bool is_symbols() const { return is_symbols_; }
  std::span<const int> symbols() const { return symbols_; }
  const FeatureSequence& frames() const { return *frames_; }
  std::size_t size() const { return is_symbols_ ? symbols_.size() : frames_->frames.size(); }

 private:
  std::span<const int> symbols_;
  const FeatureSequence* frames_ = nullptr;
  bool is_symbols_;
};

struct TrellisOptions {
  /// Only paths that occupy the final state at the last frame count, and
  /// they are weighted by the model's exit probability.
  bool end_in_final = false;
};

/// log b_j(o_t) for every frame (rows) and state (columns). Throws
/// EmissionMismatch when the observation type or range does not fit.
Matrix log_emissions(const HmmModel& model, ObsRef obs);

/// Log-density of one frame under a diagonal Gaussian mixture.
double log_mixture_density(const std::vector<Gaussian>& mixture, std::span<const double> frame);

/// A mixture with its normalizing constants and inverse variances cached,
/// for scoring many frames.
class CompiledMixture {
 public:
  explicit CompiledMixture(const std::vector<Gaussian>& mixture);
  double log_density(std::span<const double> frame) const;
  /// log(weight_m) + log N(frame; component m), one entry per component.
  void component_log_densities(std::span<const double> frame, std::vector<double>& out) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> log_const_;  // log w - 0.5 * sum log(2 pi var)
  std::vector<double> mean_;       // component-major
  std::vector<double> inv_var_;
};

/// Per-frame normalized forward variables. With S_t = exp(log_scale[t]),
/// the unscaled alpha_t(i) equals alpha(t, i) * S_1 * ... * S_t.
struct ForwardResult {
  Matrix alpha;
  std::vector<double> log_scale;
  /// log of the termination factor; 0 unless end_in_final.
  double log_terminal = 0.0;
  double log_likelihood = 0.0;  // sum(log_scale) + log_terminal
};

/// Backward variables scaled with the forward factors, so that
/// sum_i alpha(t, i) * beta(t, i) = 1 for every t and the unscaled product
/// reconstructs P(O | lambda).
struct BackwardResult {
  Matrix beta;
  std::vector<double> log_scale;
  double log_terminal = 0.0;
};

ForwardResult forward(const HmmModel& model, ObsRef obs, const TrellisOptions& opts = {});
BackwardResult backward(const HmmModel& model, ObsRef obs, const TrellisOptions& opts = {});

struct TrellisPosteriors {
  double log_likelihood = 0.0;
  Matrix gamma;             // T x N
  std::vector<Matrix> xi;   // T-1 matrices of N x N
  Matrix alpha;             // scaled
  Matrix beta;              // scaled
  std::vector<double> log_scale;
  double log_terminal = 0.0;

  /// log of sum_i alpha_t(i) beta_t(i) with the scale factors put back.
  double log_alpha_beta(std::size_t t) const;
};

TrellisPosteriors posteriors(const HmmModel& model, ObsRef obs, const TrellisOptions& opts = {});

struct ViterbiResult {
  std::vector<int> path;
  double log_prob = 0.0;
  /// backpointers(t, j): best predecessor of state j at frame t (row 0 is 0).
  std::vector<std::vector<int>> backpointers;
};

/// Log-domain Viterbi. Ties go to the lowest state index, both in the
/// recursion and in the termination.
ViterbiResult viterbi(const HmmModel& model, ObsRef obs, const TrellisOptions& opts = {});

struct ReestimateOptions {
  TrellisOptions trellis;
  double variance_floor = 1e-3;
};

struct ReestimateResult {
  HmmModel model;
  double log_likelihood_before = 0.0;
  double log_likelihood_after = 0.0;
  std::size_t skipped = 0;  // sequences with zero probability
};

/// Baum-Welch sufficient statistics. Statistics from several sequences, or
/// from state blocks of concatenated models, are pooled before maximize().
struct SufficientStats {
  std::vector<double> pi;
  Matrix trans;                  // sum_{t<T} xi_t(i, j)
  std::vector<double> from_occ;  // sum_{t<T} gamma_t(i)
  std::vector<double> final_occ; // gamma_T(i), plus exits when built by add_block
  std::vector<double> occ;       // sum_t gamma_t(i)
  Matrix symbol;                 // discrete: sum_{t: o_t = k} gamma_t(j)
  std::vector<std::vector<double>> comp_occ;
  std::vector<std::vector<std::vector<double>>> comp_sum, comp_sq;
  double log_likelihood = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;  // sequences with zero probability

  SufficientStats() = default;
  explicit SufficientStats(const HmmModel& model);

  void accumulate(const HmmModel& model, ObsRef obs, const TrellisOptions& opts = {});

  /// Adds states [offset, offset + N) of `whole`, N being this object's
  /// state count. Transitions from the block's last state into state
  /// offset + N are counted as exits of the block.
  void add_block(const SufficientStats& whole, std::size_t offset);

  /// New parameters for `model`. With end_in_final the exit probability is
  /// re-estimated from the final-state statistics.
  HmmModel maximize(const HmmModel& model, const ReestimateOptions& opts) const;
};

/// One Baum-Welch iteration over the batch, with sufficient statistics
/// summed across sequences before normalizing.
ReestimateResult reestimate(const HmmModel& model, std::span<const ObsRef> batch,
                            const ReestimateOptions& opts = {});

struct TrainConfig {
  double theta = 1e-4;
  std::size_t max_iterations = 48;
  double variance_floor = 1e-3;
  std::size_t target_components = 1;

  void validate() const;
};

struct IterationLog {
  std::size_t iteration = 0;
  double log_likelihood = 0.0;
  double improvement = 0.0;
};

struct TrainResult {
  HmmModel model;
  double initial_log_likelihood = 0.0;
  std::vector<IterationLog> log;
  std::size_t skipped = 0;
};

/// Repeats Baum-Welch until the log-likelihood improves by less than theta
/// or max_iterations is reached.
TrainResult train(const HmmModel& model, std::span<const ObsRef> batch, const TrainConfig& cfg,
                  const TrellisOptions& trellis = {});

/// One growth step: splits the heaviest component of every state with fewer than
/// `target_components` components: weight halved, means moved by +-0.2
/// standard deviations per dimension.
HmmModel split_mixtures(const HmmModel& model, std::size_t target_components);

struct SampleResult {
  std::vector<int> states;
  std::vector<int> symbols;   // discrete models
  FeatureSequence frames;     // Gaussian models
};

SampleResult sample(const HmmModel& model, std::size_t length, std::uint64_t seed);

/// Left-to-right single-Gaussian model initialized by cutting every sequence
/// into `num_states` equal segments. Self-loops come from the mean segment
/// length; the final state leaves with the same rate through `exit`.
HmmModel flat_start(std::span<const FeatureSequence> sequences, std::size_t num_states,
                    double variance_floor);

}  // namespace inkrover

#endif  // INKROVER_HMM_H_
