// tests/acceptance.cc
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

// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// on the command line to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hmm_oracle.h"
#include "inkrover/experiment.h"
#include "inkrover/hmm.h"
#include "inkrover/preprocess.h"
#include "inkrover/rover.h"
#include "inkrover/scoring.h"
#include "inkrover/synth.h"
#include "rover_check.h"
#include "score_fixtures.h"

using namespace inkrover;

#ifndef INKROVER_CONFIG_DIR
#define INKROVER_CONFIG_DIR "configs"
#endif

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::size_t failures = 0;
  std::string first_failure;

  void fail(const std::string& why) {
    if (failures++ == 0) first_failure = why;
    pass = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)); }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1
Outcome baum_welch_monotonicity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::size_t iterations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 4, m = 2 + rng() % 3;
    const auto model = oracle::random_discrete_model(rng, n, m);
    std::vector<std::vector<int>> data;
    const std::size_t count = 1 + rng() % 5;
    for (std::size_t s = 0; s < count; ++s) data.push_back(oracle::random_symbols(rng, 5 + rng() % 26, m));
    std::vector<ObsRef> refs(data.begin(), data.end());
    TrainConfig cfg;
    cfg.theta = 1e-300;
    cfg.max_iterations = 30;
    const auto r = train(model, refs, cfg);
    double prev = r.initial_log_likelihood;
    for (const auto& entry : r.log) {
      ++iterations;
      if (entry.log_likelihood < prev - 1e-9)
        o.fail(fmt("model %.0f iteration %.0f drops by %.3g", trial, static_cast<double>(entry.iteration),
                   prev - entry.log_likelihood));
      prev = entry.log_likelihood;
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 30) o.fail(fmt("took %.1f s", secs));
  o.detail = fmt("200 models, %.0f iterations, %.2f s", static_cast<double>(iterations), secs);
  return o;
}

struct SmallInstance {
  HmmModel model;
  std::vector<int> obs;
};

std::vector<SmallInstance> small_instances() {
  std::mt19937_64 rng(202);
  std::vector<SmallInstance> out;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 4, m = 2 + rng() % 3, len = 1 + rng() % 7;
    auto model = oracle::random_discrete_model(rng, n, m);
    // Every fourth model is symmetric so that Viterbi ties occur.
    if (trial % 4 == 3) {
      for (auto& p : model.pi) p = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) model.trans(i, j) = 1.0 / static_cast<double>(n);
      auto& probs = std::get<DiscreteEmission>(model.emission).probs;
      for (auto& row : probs) row = probs.front();
    }
    out.push_back({std::move(model), oracle::random_symbols(rng, len, m)});
  }
  return out;
}

// 2
Outcome viterbi_oracle() {
  Outcome o;
  std::size_t ties = 0, k = 0;
  for (const auto& inst : small_instances()) {
    const auto v = viterbi(inst.model, inst.obs);
    const auto best = oracle::best_path(inst.model, inst.obs);
    ties += inst.model.num_states() > 1 && k % 4 == 3;
    if (v.path != best.path) o.fail(fmt("instance %.0f: path differs", k));
    if (!rel_close(v.log_prob, best.log_prob, 1e-10))
      o.fail(fmt("instance %.0f: log P* %.17g vs %.17g", k, v.log_prob, best.log_prob));
    ++k;
  }
  o.detail = fmt("100 models (%.0f with tied paths)", static_cast<double>(ties));
  return o;
}

// 3
Outcome forward_backward_identity() {
  Outcome o;
  std::size_t k = 0;
  double worst = 0;
  for (const auto& inst : small_instances()) {
    const auto p = posteriors(inst.model, inst.obs);
    const double truth = oracle::likelihood(inst.model, inst.obs);
    const std::size_t n = inst.model.num_states(), len = inst.obs.size();
    for (std::size_t t = 0; t < len; ++t) {
      const double got = std::exp(p.log_alpha_beta(t));
      worst = std::max(worst, std::abs(got - truth) / truth);
      if (!rel_close(got, truth, 1e-9)) o.fail(fmt("instance %.0f t=%.0f: sum alpha*beta off", k, t));
      double sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sum += p.gamma(t, i);
        if (t + 1 < len) {
          double row = 0;
          for (std::size_t j = 0; j < n; ++j) row += p.xi[t](i, j);
          if (std::abs(row - p.gamma(t, i)) > 1e-9) o.fail(fmt("instance %.0f t=%.0f: xi row sum", k, t));
        }
      }
      if (std::abs(sum - 1.0) > 1e-9) o.fail(fmt("instance %.0f t=%.0f: gamma sum %.17g", k, t, sum));
    }
    ++k;
  }
  o.detail = fmt("100 models, worst relative error %.2g", worst);
  return o;
}

// 4
Outcome reestimation_formulas() {
  Outcome o;
  std::mt19937_64 rng(404);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 3, m = 2 + rng() % 3;
    const auto model = oracle::random_discrete_model(rng, n, m);
    std::vector<std::vector<int>> batch;
    const std::size_t count = 1 + rng() % 3;
    for (std::size_t s = 0; s < count; ++s) batch.push_back(oracle::random_symbols(rng, 1 + rng() % 8, m));
    std::vector<ObsRef> refs(batch.begin(), batch.end());
    const auto got = reestimate(model, refs).model;
    const auto want = oracle::baum_welch_step(model, batch);
    auto cmp = [&](double a, double b) {
      worst = std::max(worst, std::abs(a - b));
      if (std::abs(a - b) > 1e-8) o.fail(fmt("instance %.0f: %.17g vs %.17g", trial, a, b));
    };
    for (std::size_t i = 0; i < n; ++i) {
      cmp(got.pi[i], want.pi[i]);
      for (std::size_t j = 0; j < n; ++j) cmp(got.trans(i, j), want.trans(i, j));
      for (std::size_t s = 0; s < m; ++s) cmp(got.discrete().probs[i][s], want.discrete().probs[i][s]);
    }
  }
  o.detail = fmt("200 instances, worst deviation %.2g", worst);
  return o;
}

HmmModel two_state_gaussian(double mu0, double mu1, double var, double stay) {
  HmmModel m;
  m.pi = {0.5, 0.5};
  m.trans = Matrix(2, 2);
  m.trans(0, 0) = m.trans(1, 1) = stay;
  m.trans(0, 1) = m.trans(1, 0) = 1.0 - stay;
  GaussianMixtureEmission e;
  e.dim = 1;
  e.states = {{Gaussian{1.0, {mu0}, {var}}}, {Gaussian{1.0, {mu1}, {var}}}};
  m.emission = std::move(e);
  return m;
}

// 5
Outcome parameter_recovery() {
  Outcome o;
  const auto truth = two_state_gaussian(0.0, 3.0, 1.0, 0.9);
  std::vector<FeatureSequence> data;
  double sum[2] = {0, 0}, count[2] = {0, 0};
  for (int s = 0; s < 50; ++s) {
    auto drawn = sample(truth, 100, 5000 + s);
    for (std::size_t t = 0; t < drawn.states.size(); ++t) {
      sum[drawn.states[t]] += drawn.frames.frames[t][0];
      count[drawn.states[t]] += 1;
    }
    data.push_back(std::move(drawn.frames));
  }
  std::vector<ObsRef> refs(data.begin(), data.end());
  const auto r = train(two_state_gaussian(-1.0, 1.0, 2.0, 0.5), refs, TrainConfig{});
  const double m0 = r.model.gmm().states[0][0].mean[0], m1 = r.model.gmm().states[1][0].mean[0];
  const double dist = std::hypot(m0 - 0.0, m1 - 3.0);
  if (dist >= 0.1) o.fail(fmt("L2 distance %.4f", dist));
  o.detail = fmt("means %.4f, %.4f; L2 error %.4f", m0, m1, dist) +
             fmt(" (%.4f from the state-path sample means)", std::hypot(m0 - sum[0] / count[0], m1 - sum[1] / count[1]));
  return o;
}

// 6
Outcome rover_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto seqs = rover_check::all_sequences(3, 5);
  const SystemRanking ranking{"s0", "s1", "s2"};
  std::size_t checked = 0;
  std::vector<HypothesisTranscript> hyps[3];
  for (int s = 0; s < 3; ++s)
    for (const auto& q : seqs) hyps[s].push_back(rover_check::transcript(q, s));
  for (std::size_t ia = 0; ia < seqs.size(); ++ia) {
    const auto& a = seqs[ia];
    const auto wa = align_hypothesis({}, hyps[0][ia], {});
    oracle::Grid ga;
    oracle::align(ga, a);
    for (std::size_t ib = 0; ib < seqs.size(); ++ib) {
      const auto& b = seqs[ib];
      if (!rover_check::canonical({&a, &b})) continue;
      const auto wab = align_hypothesis(wa, hyps[1][ib], {});
      oracle::Grid gab = ga;
      oracle::align(gab, b);
      for (std::size_t ic = 0; ic < seqs.size(); ++ic) {
        const auto& c = seqs[ic];
        if (!rover_check::canonical({&a, &b, &c})) continue;
        const auto abc = align_hypothesis(wab, hyps[2][ic], {});
        oracle::Grid g = gab;
        oracle::align(g, c);
        const auto why = rover_check::compare(abc, g) + rover_check::compare_vote(vote(abc, ranking), g);
        if (!why.empty()) o.fail("triple " + std::to_string(ia) + "/" + std::to_string(ib) + "/" + std::to_string(ic) + ": " + why);
        ++checked;
      }
    }
  }
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> x(rng() % 12), y(rng() % 12);
    for (auto& v : x) v = static_cast<int>(rng() % 5);
    for (auto& v : y) v = static_cast<int>(rng() % 5);
    auto w = align_hypothesis({}, rover_check::transcript(x, 0), {});
    w = align_hypothesis(w, rover_check::transcript(y, 1), {});
    if (w.costs.back() != oracle::edit_distance(x, y)) o.fail(fmt("pair %.0f: cost %.0f", trial, w.costs.back()));
  }
  o.detail = fmt("%.0f canonical triples, 1000 pairs, %.1f s", static_cast<double>(checked), seconds_since(t0));
  return o;
}

RasterImage line_fixture() {
  RasterImage img(200, 80);
  const int base = 50;
  for (int x = 10; x < 190; ++x)
    for (int y = base - 2; y <= base; ++y) img.at(x, y) = 255;
  for (int x = 12; x < 190; x += 14) {
    for (int y = base - 14; y <= base; ++y) img.at(x, y) = img.at(x + 1, y) = 255;
    for (int y = base - 10; y <= base - 8; ++y)
      for (int dx = 0; dx < 8; ++dx) img.at(x + dx, y) = 255;
  }
  return img;
}

// Bars tall enough that a 1 degree shear moves their ends by more than a
// pixel.
RasterImage bar_fixture() {
  RasterImage img(160, 120);
  for (int x = 10; x < 150; x += 14)
    for (int y = 20; y < 100; ++y)
      for (int w = 0; w < 3; ++w) img.at(x + w, y) = 255;
  return img;
}

// 7
Outcome preprocessing_round_trips() {
  Outcome o;
  SynthConfig cfg;
  cfg.jitter_sigma = 0.3;
  cfg.hook_probability = 1.0;
  cfg.max_slant_deg = 15;
  cfg.min_words = 2;
  cfg.max_words = 4;
  cfg.seed = 707;
  const auto lex = make_lexicon(synth_alphabet(10), 30, 1, 4, 7);
  std::size_t hooks = 0, removed = 0, untouched = 0;
  for (std::uint64_t batch = 0; hooks < 10000; ++batch) {
    cfg.seed = 707 + batch;
    const auto data = synth_dataset(cfg, lex, 500);
    for (const auto& d : data.defects) {
      const auto out = dehook_stroke(data.lines[d.line].strokes[d.stroke], PreprocessConfig{});
      ++hooks;
      removed += out.points.back() == d.before.points.back();
      untouched += out == d.before;
    }
  }
  const double hook_rate = 100.0 * static_cast<double>(removed) / static_cast<double>(hooks);
  if (removed * 100 < hooks * 99) o.fail(fmt("hooks removed %.2f%%", hook_rate));

  SynthConfig gcfg;
  gcfg.gap_probability = 1.0;
  gcfg.jitter_sigma = 0.3;
  gcfg.max_slant_deg = 15;
  gcfg.seed = 708;
  const auto gdata = synth_dataset(gcfg, lex, 400);
  std::size_t gaps = 0, exact = 0;
  for (const auto& d : gdata.defects) {
    const auto& s = gdata.lines[d.line].strokes[d.stroke];
    const auto filled = interpolate_gaps(s, PreprocessConfig{}, gcfg.point_spacing);
    ++gaps;
    const Point a = s.points[d.point], b = s.points[d.point + 1];
    const int nx = static_cast<int>(std::ceil(std::abs(b.x - a.x) / gcfg.point_spacing - 1e-9));
    const int ny = static_cast<int>(std::ceil(std::abs(b.y - a.y) / gcfg.point_spacing - 1e-9));
    const auto cells = bresenham_line({0, 0}, {b.x < a.x ? -nx : nx, b.y < a.y ? -ny : ny});
    bool ok = filled.points.size() == s.points.size() + cells.size() - 2;
    for (std::size_t k = 1; ok && k + 1 < cells.size(); ++k) {
      const Point& p = filled.points[d.point + k];
      const double x = a.x + (nx ? std::abs(cells[k].x) / double(nx) : 0.0) * (b.x - a.x);
      const double y = a.y + (ny ? std::abs(cells[k].y) / double(ny) : 0.0) * (b.y - a.y);
      ok = std::abs(p.x - x) < 1e-9 && std::abs(p.y - y) < 1e-9;
    }
    if (ok) {
      ++exact;
    } else {
      o.fail(fmt("gap in line %.0f stroke %.0f not on the Bresenham cells", static_cast<double>(d.line),
                 static_cast<double>(d.stroke)));
    }
  }

  double worst_skew = 0;
  const auto flat = line_fixture();
  for (double deg = -15; deg <= 15.001; deg += 0.5) {
    const auto r = rotate_image(flat, deg);
    const auto back = correct_skew(r, estimate_baseline(r).skew_deg);
    worst_skew = std::max(worst_skew, std::abs(estimate_baseline(back).skew_deg));
  }
  if (worst_skew > 0.5) o.fail(fmt("skew residual %.2f deg", worst_skew));

  double worst_slant = 0;
  const auto bars = bar_fixture();
  for (double deg = -30; deg <= 30.001; deg += 0.5)
    worst_slant = std::max(worst_slant, std::abs(estimate_slant(shear_image(bars, deg)) - deg));
  if (worst_slant > 1.0) o.fail(fmt("slant error %.2f deg", worst_slant));

  o.detail = fmt("hooks removed %.0f/%.0f", static_cast<double>(removed), static_cast<double>(hooks)) +
             fmt(" (%.2f%%, %.2f%% strokes exact)", hook_rate,
                 100.0 * static_cast<double>(untouched) / static_cast<double>(hooks)) +
             fmt("; gaps exact %.0f/%.0f", static_cast<double>(exact), static_cast<double>(gaps)) +
             fmt("; skew residual <= %.2f deg, slant error <= %.2f deg", worst_skew, worst_slant);
  return o;
}

// 8
Outcome end_to_end() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = load_experiment_config(std::string(INKROVER_CONFIG_DIR) + "/paper_repro.cfg");
  std::size_t wins = 0;
  double delta_sum = 0, best_sum = 0, combined_sum = 0;
  const int seeds = 100;
  for (int seed = 1; seed <= seeds; ++seed) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto r = run_experiment(cfg);
    wins += r.combined.recognition_rate > r.best.recognition_rate;
    delta_sum += r.delta_rate();
    best_sum += r.best.recognition_rate;
    combined_sum += r.combined.recognition_rate;
  }
  const double secs = seconds_since(t0);
  if (wins < 80) o.fail(fmt("combination wins on %.0f/100 seeds", static_cast<double>(wins)));
  if (secs >= 600) o.fail(fmt("took %.0f s", secs));
  o.detail = fmt("combination wins on %.0f/100 seeds; mean best single %.1f%%, ", static_cast<double>(wins),
                 best_sum / seeds) +
             fmt("mean combined %.1f%%, mean change %+.2f; %.0f s", combined_sum / seeds, delta_sum / seeds, secs);
  return o;
}

// 9
Outcome metric_correctness() {
  Outcome o;
  std::size_t n = 0;
  for (const auto& f : score_fixtures()) {
    ++n;
    const auto r = recognition_rate(words_of(f.hyp), words_of(f.ref));
    if (r.n_correct != f.correct || r.n_substitutions != f.sub || r.n_deletions != f.del || r.n_insertions != f.ins ||
        format_percent(r.recognition_rate) != f.rate || format_percent(r.accuracy) != f.accuracy)
      o.fail(std::string("fixture '") + f.ref + "' / '" + f.hyp + "'");
  }
  if (n != 20) o.fail(fmt("%.0f fixtures", static_cast<double>(n)));
  ScoreReport off, on, comb;
  off.recognition_rate = 68.4;
  off.accuracy = 62.8;
  on.recognition_rate = 74.6;
  on.accuracy = 66.3;
  comb.recognition_rate = 76.0;
  comb.accuracy = 68.2;
  const auto t1 = format_system_table("Single systems", {{"Offline", off}, {"Online", on}});
  if (t1 != "Single systems\n\n| System | Recognition Rate | Precision |\n|---|---|---|\n"
            "| Offline | 68.4% | 62.8% |\n| Online | 74.6% | 66.3% |\n")
    o.fail("single-system table layout");
  const auto t2 = format_combination_table("Combination", {"Online", on}, {"Combination of all", comb});
  if (t2 != "Combination\n\n| System | Recognition Rate | Precision |\n|---|---|---|\n"
            "| Highest Single System (Online) | 74.6% | 66.3% |\n| Combination of all | 76.0% | 68.2% |\n"
            "| Change | +1.4% | +1.9% |\n")
    o.fail("combination table layout:\n" + t2);
  o.detail = fmt("%.0f fixtures exact; both table layouts exact", static_cast<double>(n));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "Baum-Welch monotonicity", baum_welch_monotonicity},
      {2, "Viterbi oracle equivalence", viterbi_oracle},
      {3, "forward-backward identity", forward_backward_identity},
      {4, "re-estimation formulas", reestimation_formulas},
      {5, "parameter recovery", parameter_recovery},
      {6, "ROVER oracle", rover_oracle},
      {7, "preprocessing round trips", preprocessing_round_trips},
      {8, "end-to-end combination gain", end_to_end},
      {9, "metric correctness", metric_correctness},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s %d %s: %s", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    if (!o.pass) std::printf(" [%zu failures; first: %s]", o.failures, o.first_failure.c_str());
    std::printf("\n");
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
