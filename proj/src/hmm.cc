// src/hmm.cc
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

#include "inkrover/hmm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "inkrover/error.h"

namespace inkrover {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

double log_sum_exp(std::span<const double> terms) {
  if (terms.size() == 1) return terms[0];
  const double best = *std::max_element(terms.begin(), terms.end());
  if (best == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : terms) sum += std::exp(v - best);
  return best + std::log(sum);
}

// Non-zero transitions grouped by destination, sources ascending.
struct Arc {
  std::size_t from;
  double prob;
};

std::vector<std::vector<Arc>> incoming_arcs(const Matrix& trans) {
  std::vector<std::vector<Arc>> in(trans.cols());
  for (std::size_t i = 0; i < trans.rows(); ++i) {
    for (std::size_t j = 0; j < trans.cols(); ++j) {
      if (trans(i, j) > 0.0) in[j].push_back({i, trans(i, j)});
    }
  }
  return in;
}

std::vector<std::vector<Arc>> outgoing_arcs(const Matrix& trans) {
  std::vector<std::vector<Arc>> out(trans.rows());
  for (std::size_t i = 0; i < trans.rows(); ++i) {
    for (std::size_t j = 0; j < trans.cols(); ++j) {
      if (trans(i, j) > 0.0) out[i].push_back({j, trans(i, j)});
    }
  }
  return out;
}

// Termination weights: 1 everywhere, or exit on the final state only.
std::vector<double> terminal_weights(const HmmModel& model, const TrellisOptions& opts) {
  const std::size_t n = model.num_states();
  if (!opts.end_in_final) return std::vector<double>(n, 1.0);
  std::vector<double> w(n, 0.0);
  w[n - 1] = model.exit;
  return w;
}

// Emission likelihoods shifted by the per-frame maximum of the log table.
struct ShiftedEmissions {
  Matrix b;                  // exp(log b - shift)
  std::vector<double> shift;
};

ShiftedEmissions shifted_emissions(const Matrix& log_b) {
  ShiftedEmissions out{Matrix(log_b.rows(), log_b.cols()), std::vector<double>(log_b.rows())};
  for (std::size_t t = 0; t < log_b.rows(); ++t) {
    const auto row = log_b.row(t);
    const double m = *std::max_element(row.begin(), row.end());
    if (m == kNegInf) {
      throw ZeroProbability("every state has zero emission probability at frame " +
                                std::to_string(t),
                            t);
    }
    out.shift[t] = m;
    for (std::size_t j = 0; j < row.size(); ++j) out.b(t, j) = std::exp(row[j] - m);
  }
  return out;
}

ForwardResult forward_pass(const HmmModel& model, const ShiftedEmissions& em,
                           const std::vector<std::vector<Arc>>& in, const TrellisOptions& opts) {
  const std::size_t n = model.num_states();
  const std::size_t len = em.b.rows();
  ForwardResult r{Matrix(len, n), std::vector<double>(len), 0.0, 0.0};
  for (std::size_t t = 0; t < len; ++t) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double a;
      if (t == 0) {
        a = model.pi[j];
      } else {
        a = 0.0;
        for (const Arc& arc : in[j]) a += r.alpha(t - 1, arc.from) * arc.prob;
      }
      a *= em.b(t, j);
      r.alpha(t, j) = a;
      sum += a;
    }
    if (!(sum > 0.0)) {
      throw ZeroProbability("no state sequence reaches frame " + std::to_string(t), t);
    }
    for (std::size_t j = 0; j < n; ++j) r.alpha(t, j) /= sum;
    r.log_scale[t] = std::log(sum) + em.shift[t];
    r.log_likelihood += r.log_scale[t];
  }
  if (opts.end_in_final) {
    const auto w = terminal_weights(model, opts);
    double term = 0.0;
    for (std::size_t j = 0; j < n; ++j) term += r.alpha(len - 1, j) * w[j];
    if (!(term > 0.0)) {
      throw ZeroProbability("no state sequence ends in the final state", len - 1);
    }
    r.log_terminal = std::log(term);
    r.log_likelihood += r.log_terminal;
  }
  return r;
}

Matrix backward_pass(const HmmModel& model, const ShiftedEmissions& em,
                     const std::vector<std::vector<Arc>>& out, const ForwardResult& fw,
                     const TrellisOptions& opts) {
  const std::size_t n = model.num_states();
  const std::size_t len = em.b.rows();
  Matrix beta(len, n);
  const auto w = terminal_weights(model, opts);
  const double term = std::exp(fw.log_terminal);
  for (std::size_t j = 0; j < n; ++j) beta(len - 1, j) = w[j] / term;
  for (std::size_t t = len - 1; t-- > 0;) {
    // Same scale factor as forward at t+1, without the log shift.
    const double s = std::exp(fw.log_scale[t + 1] - em.shift[t + 1]);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const Arc& arc : out[i]) acc += arc.prob * em.b(t + 1, arc.from) * beta(t + 1, arc.from);
      beta(t, i) = acc / s;
    }
  }
  return beta;
}

void accumulate(const HmmModel& model, ObsRef obs, const TrellisOptions& opts,
                const std::vector<std::vector<Arc>>& in, const std::vector<std::vector<Arc>>& out,
                SufficientStats& st) {
  // Gaussian component scores are kept for the responsibilities below.
  std::vector<CompiledMixture> compiled;
  std::vector<std::size_t> comp_offset;
  std::vector<double> comp_cache;
  Matrix log_b;
  if (model.is_gaussian() && !obs.is_symbols()) {
    const auto& g = model.gmm();
    const auto& seq = obs.frames();
    if (seq.dim != g.dim) throw EmissionMismatch("feature dimension does not match the model");
    const std::size_t n = model.num_states();
    std::size_t width = 0;
    for (const auto& mix : g.states) {
      compiled.emplace_back(mix);
      comp_offset.push_back(width);
      width += mix.size();
    }
    const std::size_t len = seq.frames.size();
    log_b = Matrix(len, n);
    comp_cache.resize(len * width);
    std::vector<double> lp;
    for (std::size_t t = 0; t < len; ++t) {
      if (seq.frames[t].size() != g.dim) throw EmissionMismatch("frame dimension does not match the model");
      for (std::size_t j = 0; j < n; ++j) {
        compiled[j].component_log_densities(seq.frames[t], lp);
        std::copy(lp.begin(), lp.end(), comp_cache.begin() + static_cast<std::ptrdiff_t>(t * width + comp_offset[j]));
        log_b(t, j) = log_sum_exp(lp);
      }
    }
  } else {
    log_b = log_emissions(model, obs);
  }
  ShiftedEmissions em;
  ForwardResult fw;
  try {
    em = shifted_emissions(log_b);
    fw = forward_pass(model, em, in, opts);
  } catch (const ZeroProbability&) {
    ++st.skipped;
    return;
  }
  const Matrix beta = backward_pass(model, em, out, fw, opts);
  const std::size_t n = model.num_states();
  const std::size_t len = log_b.rows();
  ++st.used;
  st.log_likelihood += fw.log_likelihood;

  std::vector<double> gamma(n);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < n; ++i) gamma[i] = fw.alpha(t, i) * beta(t, i);
    if (t == 0) {
      for (std::size_t i = 0; i < n; ++i) st.pi[i] += gamma[i];
    }
    if (t + 1 < len) {
      const double s = std::exp(fw.log_scale[t + 1] - em.shift[t + 1]);
      for (std::size_t i = 0; i < n; ++i) {
        st.from_occ[i] += gamma[i];
        if (fw.alpha(t, i) == 0.0) continue;
        for (const Arc& arc : out[i]) {
          st.trans(i, arc.from) +=
              fw.alpha(t, i) * arc.prob * em.b(t + 1, arc.from) * beta(t + 1, arc.from) / s;
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) st.final_occ[i] += gamma[i];
    }
    for (std::size_t i = 0; i < n; ++i) st.occ[i] += gamma[i];

    if (obs.is_symbols()) {
      const auto k = static_cast<std::size_t>(obs.symbols()[t]);
      for (std::size_t j = 0; j < n; ++j) st.symbol(j, k) += gamma[j];
    } else {
      const auto& frame = obs.frames().frames[t];
      const auto& g = model.gmm();
      const std::size_t width = comp_cache.size() / len;
      for (std::size_t j = 0; j < n; ++j) {
        if (gamma[j] < 1e-12) continue;
        // Component responsibilities within state j.
        const double* lp = comp_cache.data() + t * width + comp_offset[j];
        const std::size_t mcount = g.states[j].size();
        const double mx = *std::max_element(lp, lp + mcount);
        double z = 0.0;
        for (std::size_t m = 0; m < mcount; ++m) z += std::exp(lp[m] - mx);
        for (std::size_t m = 0; m < mcount; ++m) {
          const double r = gamma[j] * std::exp(lp[m] - mx) / z;
          if (r == 0.0) continue;
          st.comp_occ[j][m] += r;
          auto& sum = st.comp_sum[j][m];
          auto& sq = st.comp_sq[j][m];
          for (std::size_t d = 0; d < g.dim; ++d) {
            sum[d] += r * frame[d];
            sq[d] += r * frame[d] * frame[d];
          }
        }
      }
    }
  }
}

HmmModel maximize(const HmmModel& model, const SufficientStats& st, const ReestimateOptions& opts) {
  HmmModel next = model;
  const std::size_t n = model.num_states();
  const bool ends = opts.trellis.end_in_final;

  double pi_mass = 0.0;
  for (double v : st.pi) pi_mass += v;
  if (pi_mass > 0.0) {
    for (std::size_t i = 0; i < n; ++i) next.pi[i] = st.pi[i] / pi_mass;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const bool last = i + 1 == n;
    double den = st.from_occ[i];
    if (last && ends) den += st.final_occ[i];
    if (!(den > 0.0)) continue;  // unvisited: keep the prior row
    for (std::size_t j = 0; j < n; ++j) next.trans(i, j) = st.trans(i, j) / den;
    if (last) {
      if (ends) {
        next.exit = st.final_occ[i] / den;
      } else if (model.exit > 0.0) {
        for (std::size_t j = 0; j < n; ++j) next.trans(i, j) *= 1.0 - model.exit;
      }
    }
  }

  if (!model.is_gaussian()) {
    auto& probs = std::get<DiscreteEmission>(next.emission).probs;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(st.occ[j] > 0.0)) continue;
      for (std::size_t k = 0; k < probs[j].size(); ++k) probs[j][k] = st.symbol(j, k) / st.occ[j];
    }
    return next;
  }

  auto& g = next.gmm();
  for (std::size_t j = 0; j < n; ++j) {
    auto& mix = g.states[j];
    double total = 0.0;
    for (double v : st.comp_occ[j]) total += v;
    if (!(total > 1e-10)) continue;
    for (std::size_t m = 0; m < mix.size(); ++m) {
      const double occ = st.comp_occ[j][m];
      mix[m].weight = occ / total;
      if (occ < 1e-8) continue;  // starved component keeps its shape
      for (std::size_t d = 0; d < g.dim; ++d) {
        const double mean = st.comp_sum[j][m][d] / occ;
        const double var = st.comp_sq[j][m][d] / occ - mean * mean;
        mix[m].mean[d] = mean;
        mix[m].var[d] = std::max(var, opts.variance_floor);
      }
    }
    // Keep every component reachable.
    constexpr double kMinWeight = 1e-6;
    double wsum = 0.0;
    for (auto& c : mix) wsum += (c.weight = std::max(c.weight, kMinWeight));
    for (auto& c : mix) c.weight /= wsum;
  }
  return next;
}

}  // namespace

SufficientStats::SufficientStats(const HmmModel& model) {
  const std::size_t n = model.num_states();
  pi.assign(n, 0.0);
  trans = Matrix(n, n);
  from_occ.assign(n, 0.0);
  final_occ.assign(n, 0.0);
  occ.assign(n, 0.0);
  if (model.is_gaussian()) {
    const auto& g = model.gmm();
    comp_occ.resize(n);
    comp_sum.resize(n);
    comp_sq.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t m = g.states[j].size();
      comp_occ[j].assign(m, 0.0);
      comp_sum[j].assign(m, std::vector<double>(g.dim, 0.0));
      comp_sq[j].assign(m, std::vector<double>(g.dim, 0.0));
    }
  } else {
    symbol = Matrix(n, model.discrete().num_symbols());
  }
}

void SufficientStats::accumulate(const HmmModel& model, ObsRef obs, const TrellisOptions& opts) {
  inkrover::accumulate(model, obs, opts, incoming_arcs(model.trans), outgoing_arcs(model.trans), *this);
}

void SufficientStats::add_block(const SufficientStats& whole, std::size_t offset) {
  const std::size_t n = pi.size();
  if (offset + n > whole.pi.size()) throw DimensionMismatch("state block exceeds the source statistics");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = offset + i;
    pi[i] += whole.pi[src];
    for (std::size_t j = 0; j < n; ++j) trans(i, j) += whole.trans(src, offset + j);
    from_occ[i] += whole.from_occ[src];
    final_occ[i] += whole.final_occ[src];
    occ[i] += whole.occ[src];
    for (std::size_t k = 0; k < symbol.cols(); ++k) symbol(i, k) += whole.symbol(src, k);
    if (i < comp_occ.size()) {
      if (whole.comp_occ[src].size() != comp_occ[i].size())
        throw DimensionMismatch("mixture sizes differ between pooled statistics");
      for (std::size_t m = 0; m < comp_occ[i].size(); ++m) {
        comp_occ[i][m] += whole.comp_occ[src][m];
        for (std::size_t d = 0; d < comp_sum[i][m].size(); ++d) {
          comp_sum[i][m][d] += whole.comp_sum[src][m][d];
          comp_sq[i][m][d] += whole.comp_sq[src][m][d];
        }
      }
    }
  }
  if (offset + n < whole.pi.size()) {
    const double leave = whole.trans(offset + n - 1, offset + n);
    from_occ[n - 1] -= leave;
    final_occ[n - 1] += leave;
  }
  log_likelihood += whole.log_likelihood;
  used += whole.used;
  skipped += whole.skipped;
}

HmmModel SufficientStats::maximize(const HmmModel& model, const ReestimateOptions& opts) const {
  return inkrover::maximize(model, *this, opts);
}

const DiscreteEmission& HmmModel::discrete() const {
  if (const auto* d = std::get_if<DiscreteEmission>(&emission)) return *d;
  throw EmissionMismatch("model has Gaussian mixture emissions, not discrete");
}

const GaussianMixtureEmission& HmmModel::gmm() const {
  if (const auto* g = std::get_if<GaussianMixtureEmission>(&emission)) return *g;
  throw NotGaussian("model has discrete emissions, not Gaussian mixtures");
}

GaussianMixtureEmission& HmmModel::gmm() {
  if (auto* g = std::get_if<GaussianMixtureEmission>(&emission)) return *g;
  throw NotGaussian("model has discrete emissions, not Gaussian mixtures");
}

void HmmModel::validate(double tol, double variance_floor) const {
  const std::size_t n = num_states();
  if (n == 0) throw InvariantError("model has no states");
  if (trans.rows() != n || trans.cols() != n) throw InvariantError("transition matrix is not N x N");
  auto check_dist = [&](std::span<const double> p, double mass, const std::string& what) {
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvariantError(what + " has a negative or non-finite entry");
      sum += v;
    }
    if (std::abs(sum - mass) > tol) {
      throw InvariantError(what + " sums to " + std::to_string(sum) + ", expected " +
                           std::to_string(mass));
    }
  };
  check_dist(pi, 1.0, "pi");
  if (!(exit >= 0.0 && exit <= 1.0)) throw InvariantError("exit probability outside [0, 1]");
  for (std::size_t i = 0; i < n; ++i) {
    check_dist(trans.row(i), i + 1 == n ? 1.0 - exit : 1.0, "row " + std::to_string(i) + " of A");
    if (topology == Topology::kLeftToRight) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && j != i + 1 && trans(i, j) != 0.0) {
          throw InvariantError("left-to-right model has transition " + std::to_string(i) + "->" +
                               std::to_string(j));
        }
      }
    }
  }
  if (const auto* d = std::get_if<DiscreteEmission>(&emission)) {
    if (d->probs.size() != n) throw InvariantError("emission table has wrong state count");
    for (std::size_t j = 0; j < n; ++j) {
      if (d->probs[j].size() != d->num_symbols()) throw InvariantError("ragged emission table");
      check_dist(d->probs[j], 1.0, "emissions of state " + std::to_string(j));
    }
  } else {
    const auto& g = std::get<GaussianMixtureEmission>(emission);
    if (g.states.size() != n) throw InvariantError("mixture table has wrong state count");
    for (std::size_t j = 0; j < n; ++j) {
      const auto& mix = g.states[j];
      if (mix.empty() || mix.size() > kMaxMixtureComponents) {
        throw InvariantError("state " + std::to_string(j) + " has " + std::to_string(mix.size()) +
                             " mixture components");
      }
      std::vector<double> w;
      for (const auto& c : mix) {
        if (c.mean.size() != g.dim || c.var.size() != g.dim) {
          throw InvariantError("mixture component dimension mismatch in state " + std::to_string(j));
        }
        for (double v : c.var) {
          if (!(v > 0.0) || v < variance_floor) {
            throw InvariantError("variance below floor in state " + std::to_string(j));
          }
        }
        w.push_back(c.weight);
      }
      check_dist(w, 1.0, "mixture weights of state " + std::to_string(j));
    }
  }
}

CompiledMixture::CompiledMixture(const std::vector<Gaussian>& mixture)
    : dim_(mixture.empty() ? 0 : mixture.front().mean.size()) {
  for (const auto& c : mixture) {
    double lc = safe_log(c.weight);
    for (std::size_t d = 0; d < dim_; ++d) {
      lc -= 0.5 * (kLog2Pi + std::log(c.var[d]));
      mean_.push_back(c.mean[d]);
      inv_var_.push_back(1.0 / c.var[d]);
    }
    log_const_.push_back(lc);
  }
}

void CompiledMixture::component_log_densities(std::span<const double> frame,
                                              std::vector<double>& out) const {
  out.resize(log_const_.size());
  for (std::size_t m = 0; m < log_const_.size(); ++m) {
    const double* mu = mean_.data() + m * dim_;
    const double* iv = inv_var_.data() + m * dim_;
    double acc = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      const double diff = frame[d] - mu[d];
      acc += diff * diff * iv[d];
    }
    out[m] = log_const_[m] - 0.5 * acc;
  }
}

double CompiledMixture::log_density(std::span<const double> frame) const {
  thread_local std::vector<double> terms;
  component_log_densities(frame, terms);
  return log_sum_exp(terms);
}

double log_mixture_density(const std::vector<Gaussian>& mixture, std::span<const double> frame) {
  return CompiledMixture(mixture).log_density(frame);
}

Matrix log_emissions(const HmmModel& model, ObsRef obs) {
  const std::size_t n = model.num_states();
  const std::size_t len = obs.size();
  if (len == 0) throw EmissionMismatch("observation sequence is empty");
  Matrix out(len, n);
  if (obs.is_symbols()) {
    const auto* d = std::get_if<DiscreteEmission>(&model.emission);
    if (!d) throw EmissionMismatch("symbol observations need a discrete model");
    const std::size_t m = d->num_symbols();
    for (std::size_t t = 0; t < len; ++t) {
      const int k = obs.symbols()[t];
      if (k < 0 || static_cast<std::size_t>(k) >= m) {
        throw EmissionMismatch("symbol " + std::to_string(k) + " at frame " + std::to_string(t) +
                               " outside [0, " + std::to_string(m) + ")");
      }
      for (std::size_t j = 0; j < n; ++j) out(t, j) = safe_log(d->probs[j][static_cast<std::size_t>(k)]);
    }
    return out;
  }
  const auto* g = std::get_if<GaussianMixtureEmission>(&model.emission);
  if (!g) throw EmissionMismatch("feature observations need a Gaussian mixture model");
  const auto& seq = obs.frames();
  if (seq.dim != g->dim) {
    throw EmissionMismatch("feature dimension " + std::to_string(seq.dim) + " does not match model " +
                           std::to_string(g->dim));
  }
  std::vector<CompiledMixture> compiled;
  compiled.reserve(n);
  for (const auto& mix : g->states) compiled.emplace_back(mix);
  for (std::size_t t = 0; t < len; ++t) {
    if (seq.frames[t].size() != g->dim) throw EmissionMismatch("ragged feature frame " + std::to_string(t));
    for (std::size_t j = 0; j < n; ++j) out(t, j) = compiled[j].log_density(seq.frames[t]);
  }
  return out;
}

ForwardResult forward(const HmmModel& model, ObsRef obs, const TrellisOptions& opts) {
  const auto em = shifted_emissions(log_emissions(model, obs));
  return forward_pass(model, em, incoming_arcs(model.trans), opts);
}

BackwardResult backward(const HmmModel& model, ObsRef obs, const TrellisOptions& opts) {
  const auto em = shifted_emissions(log_emissions(model, obs));
  const auto fw = forward_pass(model, em, incoming_arcs(model.trans), opts);
  return {backward_pass(model, em, outgoing_arcs(model.trans), fw, opts), fw.log_scale,
          fw.log_terminal};
}

double TrellisPosteriors::log_alpha_beta(std::size_t t) const {
  double dot = 0.0;
  for (std::size_t i = 0; i < alpha.cols(); ++i) dot += alpha(t, i) * beta(t, i);
  double total = log_terminal;
  for (double s : log_scale) total += s;
  return std::log(dot) + total;
}

TrellisPosteriors posteriors(const HmmModel& model, ObsRef obs, const TrellisOptions& opts) {
  const auto em = shifted_emissions(log_emissions(model, obs));
  const auto out_arcs = outgoing_arcs(model.trans);
  auto fw = forward_pass(model, em, incoming_arcs(model.trans), opts);
  Matrix beta = backward_pass(model, em, out_arcs, fw, opts);
  const std::size_t n = model.num_states();
  const std::size_t len = em.b.rows();

  TrellisPosteriors p;
  p.log_likelihood = fw.log_likelihood;
  p.gamma = Matrix(len, n);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < n; ++i) p.gamma(t, i) = fw.alpha(t, i) * beta(t, i);
  }
  p.xi.reserve(len > 0 ? len - 1 : 0);
  for (std::size_t t = 0; t + 1 < len; ++t) {
    Matrix xi(n, n);
    const double s = std::exp(fw.log_scale[t + 1] - em.shift[t + 1]);
    for (std::size_t i = 0; i < n; ++i) {
      for (const Arc& arc : out_arcs[i]) {
        xi(i, arc.from) = fw.alpha(t, i) * arc.prob * em.b(t + 1, arc.from) * beta(t + 1, arc.from) / s;
      }
    }
    p.xi.push_back(std::move(xi));
  }
  p.alpha = std::move(fw.alpha);
  p.beta = std::move(beta);
  p.log_scale = std::move(fw.log_scale);
  p.log_terminal = fw.log_terminal;
  return p;
}

ViterbiResult viterbi(const HmmModel& model, ObsRef obs, const TrellisOptions& opts) {
  const Matrix log_b = log_emissions(model, obs);
  const std::size_t n = model.num_states();
  const std::size_t len = log_b.rows();
  const auto in = incoming_arcs(model.trans);
  std::vector<std::vector<double>> log_in(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (const Arc& arc : in[j]) log_in[j].push_back(std::log(arc.prob));
  }

  ViterbiResult r;
  r.backpointers.assign(len, std::vector<int>(n, 0));
  std::vector<double> delta(n), next(n);
  for (std::size_t j = 0; j < n; ++j) delta[j] = safe_log(model.pi[j]) + log_b(0, j);
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (std::size_t k = 0; k < in[j].size(); ++k) {
        const double v = delta[in[j][k].from] + log_in[j][k];
        if (v > best) {
          best = v;
          arg = static_cast<int>(in[j][k].from);
        }
      }
      next[j] = best + log_b(t, j);
      r.backpointers[t][j] = arg;
    }
    std::swap(delta, next);
  }

  const auto w = terminal_weights(model, opts);
  double best = kNegInf;
  int last = -1;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = delta[j] + (opts.end_in_final ? safe_log(w[j]) : 0.0);
    if (v > best) {
      best = v;
      last = static_cast<int>(j);
    }
  }
  if (last < 0) throw ZeroProbability("no state path has non-zero probability", len - 1);
  r.log_prob = best;
  r.path.assign(len, 0);
  r.path[len - 1] = last;
  for (std::size_t t = len - 1; t > 0; --t) {
    r.path[t - 1] = r.backpointers[t][static_cast<std::size_t>(r.path[t])];
  }
  return r;
}

ReestimateResult reestimate(const HmmModel& model, std::span<const ObsRef> batch,
                            const ReestimateOptions& opts) {
  if (batch.empty()) throw NoDecodableSequences("re-estimation batch is empty");
  const auto in = incoming_arcs(model.trans);
  const auto out = outgoing_arcs(model.trans);
  SufficientStats st(model);
  for (const ObsRef& obs : batch) accumulate(model, obs, opts.trellis, in, out, st);
  if (st.used == 0) throw NoDecodableSequences("no sequence in the batch has non-zero probability");

  ReestimateResult r{maximize(model, st, opts), st.log_likelihood, 0.0, st.skipped};
  const auto in2 = incoming_arcs(r.model.trans);
  for (const ObsRef& obs : batch) {
    try {
      const auto em = shifted_emissions(log_emissions(r.model, obs));
      r.log_likelihood_after += forward_pass(r.model, em, in2, opts.trellis).log_likelihood;
    } catch (const ZeroProbability&) {
    }
  }
  return r;
}

void TrainConfig::validate() const {
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (max_iterations == 0) throw ConfigError("max_iterations must be positive");
  if (!(variance_floor > 0.0)) throw ConfigError("variance_floor must be positive");
  if (target_components == 0 || target_components > kMaxMixtureComponents) {
    throw ConfigError("target_components must be in [1, 48]");
  }
}

TrainResult train(const HmmModel& model, std::span<const ObsRef> batch, const TrainConfig& cfg,
                  const TrellisOptions& trellis) {
  cfg.validate();
  if (batch.empty()) throw NoDecodableSequences("training batch is empty");
  const ReestimateOptions ropts{trellis, cfg.variance_floor};

  auto e_step = [&](const HmmModel& m) {
    const auto in = incoming_arcs(m.trans);
    const auto out = outgoing_arcs(m.trans);
    SufficientStats st(m);
    for (const ObsRef& obs : batch) accumulate(m, obs, trellis, in, out, st);
    return st;
  };

  TrainResult result{model, 0.0, {}, 0};
  SufficientStats stats = e_step(model);
  if (stats.used == 0) throw NoDecodableSequences("no sequence in the batch has non-zero probability");
  result.initial_log_likelihood = stats.log_likelihood;
  result.skipped = stats.skipped;
  double previous = stats.log_likelihood;
  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    HmmModel next = maximize(result.model, stats, ropts);
    SufficientStats next_stats = e_step(next);
    if (next_stats.used == 0) break;
    const double improvement = next_stats.log_likelihood - previous;
    result.model = std::move(next);
    result.log.push_back({it, next_stats.log_likelihood, improvement});
    result.skipped = next_stats.skipped;
    if (improvement < cfg.theta) break;
    previous = next_stats.log_likelihood;
    stats = std::move(next_stats);
  }
  return result;
}

HmmModel split_mixtures(const HmmModel& model, std::size_t target_components) {
  if (!model.is_gaussian()) throw NotGaussian("mixture splitting needs Gaussian emissions");
  const std::size_t target = std::min(target_components, kMaxMixtureComponents);
  HmmModel next = model;
  for (auto& mix : next.gmm().states) {
    if (mix.size() >= target) continue;
    std::size_t heaviest = 0;
    for (std::size_t m = 1; m < mix.size(); ++m) {
      if (mix[m].weight > mix[heaviest].weight) heaviest = m;
    }
    Gaussian plus = mix[heaviest];
    Gaussian& minus = mix[heaviest];
    for (std::size_t d = 0; d < minus.mean.size(); ++d) {
      const double offset = 0.2 * std::sqrt(minus.var[d]);
      minus.mean[d] -= offset;
      plus.mean[d] += offset;
    }
    minus.weight *= 0.5;
    plus.weight = minus.weight;
    mix.insert(mix.begin() + static_cast<std::ptrdiff_t>(heaviest) + 1, std::move(plus));
  }
  return next;
}

namespace {

std::size_t draw(std::span<const double> probs, std::mt19937_64& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double total = 0.0;
  for (double p : probs) total += p;
  u *= total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  return last_positive;
}

}  // namespace

SampleResult sample(const HmmModel& model, std::size_t length, std::uint64_t seed) {
  if (length == 0) throw ConfigError("sample length must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SampleResult r;
  if (model.is_gaussian()) {
    r.frames.dim = model.gmm().dim;
    r.frames.source = FeatureSource::kOnline;
  }
  std::size_t state = draw(model.pi, rng);
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) state = draw(model.trans.row(state), rng);
    r.states.push_back(static_cast<int>(state));
    if (model.is_gaussian()) {
      const auto& mix = model.gmm().states[state];
      std::vector<double> w;
      for (const auto& c : mix) w.push_back(c.weight);
      const auto& c = mix[draw(w, rng)];
      FeatureVector f(c.mean.size());
      for (std::size_t d = 0; d < f.size(); ++d) f[d] = c.mean[d] + std::sqrt(c.var[d]) * normal(rng);
      r.frames.frames.push_back(std::move(f));
    } else {
      r.symbols.push_back(static_cast<int>(draw(model.discrete().probs[state], rng)));
    }
  }
  return r;
}

HmmModel flat_start(std::span<const FeatureSequence> sequences, std::size_t num_states,
                    double variance_floor) {
  if (sequences.empty()) throw NoDecodableSequences("flat start needs at least one sequence");
  if (num_states == 0) throw ConfigError("flat start needs at least one state");
  const std::size_t dim = sequences.front().dim;
  std::vector<double> count(num_states, 0.0);
  std::vector<std::vector<double>> sum(num_states, std::vector<double>(dim, 0.0));
  std::vector<std::vector<double>> sq = sum;
  std::vector<double> all_sum(dim, 0.0), all_sq(dim, 0.0);
  double all_count = 0.0, frames = 0.0;
  for (const auto& seq : sequences) {
    if (seq.dim != dim) throw DimensionMismatch("flat start sequences mix dimensions");
    const std::size_t len = seq.frames.size();
    frames += static_cast<double>(len);
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t j = t * num_states / len;
      count[j] += 1.0;
      all_count += 1.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double v = seq.frames[t][d];
        sum[j][d] += v;
        sq[j][d] += v * v;
        all_sum[d] += v;
        all_sq[d] += v * v;
      }
    }
  }
  if (all_count == 0.0) throw NoDecodableSequences("flat start sequences are empty");

  HmmModel model;
  model.topology = Topology::kLeftToRight;
  model.pi.assign(num_states, 0.0);
  model.pi[0] = 1.0;
  const double stay_frames = std::max(1.0, frames / static_cast<double>(sequences.size()) /
                                                 static_cast<double>(num_states));
  const double leave = 1.0 / stay_frames;
  model.trans = Matrix(num_states, num_states);
  for (std::size_t i = 0; i < num_states; ++i) {
    model.trans(i, i) = 1.0 - leave;
    if (i + 1 < num_states) model.trans(i, i + 1) = leave;
  }
  model.exit = leave;
  if (leave >= 1.0) {
    // Sequences shorter than the state count: allow no self-loop at all.
    for (std::size_t i = 0; i < num_states; ++i) model.trans(i, i) = 0.0;
  }

  GaussianMixtureEmission g;
  g.dim = dim;
  for (std::size_t j = 0; j < num_states; ++j) {
    Gaussian c;
    c.mean.resize(dim);
    c.var.resize(dim);
    const bool own = count[j] > 0.0;
    const double n = own ? count[j] : all_count;
    for (std::size_t d = 0; d < dim; ++d) {
      const double s = own ? sum[j][d] : all_sum[d];
      const double s2 = own ? sq[j][d] : all_sq[d];
      c.mean[d] = s / n;
      c.var[d] = std::max(variance_floor, s2 / n - c.mean[d] * c.mean[d]);
    }
    g.states.push_back({std::move(c)});
  }
  model.emission = std::move(g);
  return model;
}

}  // namespace inkrover
