// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "blindtrack/attack.hpp"
#include "blindtrack/eval.hpp"
#include "blindtrack/service.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace bt = blindtrack;
using bt::oracle::Bitmap;

namespace {

// Tolerances.
constexpr int kGeometryCases = 1000;
constexpr double kGeometrySeconds = 60.0;
constexpr std::size_t kTraces = 200;
constexpr int kToyModels = 50;
constexpr double kPosteriorTol = 1e-9;
constexpr double kKnownAt10 = 0.90;
constexpr double kUnknownAt10 = 0.80;
constexpr double kSmallAreaShare = 0.90;
constexpr double kDetectionGain = 0.20;
constexpr double kAprioriDrift = 0.05;
constexpr double kTouchAt5 = 0.99;
constexpr double kKnownMs = 10.0;
constexpr double kUnknownMs = 50.0;
constexpr std::size_t kAttackTraces = 100;
constexpr std::size_t kServiceTraces = 10;

constexpr std::uint64_t kEvalSeed = 1000;
constexpr std::uint64_t kTrainSeed = 9000;

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Share of traces (that reach `click`) whose area is at most 1%.
double small_area_share(const std::vector<bt::ClickRow>& rows, std::size_t click) {
  std::size_t n = 0, small = 0;
  for (const bt::ClickRow& r : rows) {
    if (r.click != click) continue;
    ++n;
    small += r.area_pct <= 1.0;
  }
  return n ? static_cast<double>(small) / static_cast<double>(n) : std::nan("");
}

void geometry() {
  std::mt19937_64 rng(7);
  const auto t0 = std::chrono::steady_clock::now();
  int bad = 0;
  for (int i = 0; i < kGeometryCases; ++i) {
    const int w = std::uniform_int_distribution<int>(1, 32)(rng);
    const int h = std::uniform_int_distribution<int>(1, 32)(rng);
    const bt::Region a = bt::oracle::random_region(rng, w, h);
    const bt::Region b = bt::oracle::random_region(rng, w, h);
    const Bitmap ba = Bitmap::of(a, w, h), bb = Bitmap::of(b, w, h);
    const bt::Delta d{std::uniform_int_distribution<int>(-40, 40)(rng),
                      std::uniform_int_distribution<int>(-40, 40)(rng)};
    const bt::Rect screen{0, 0, w, h};
    bool ok = Bitmap::of(a.translate_clip(d, screen), w, h) == ba.translate_clip(d) &&
              Bitmap::of(a.intersect(b), w, h) == ba.both(bb) &&
              Bitmap::of(a.subtract(b), w, h) == ba.minus(bb) &&
              Bitmap::of(a.unite(b), w, h) == ba.either(bb) &&
              a.area() == static_cast<std::int64_t>(ba.count());
    const bt::Point p{std::uniform_int_distribution<int>(0, w - 1)(rng),
                      std::uniform_int_distribution<int>(0, h - 1)(rng)};
    ok = ok && a.contains(p) == ba.at(p.x, p.y);
    bad += !ok;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report("geometry_oracle", bad == 0 && secs < kGeometrySeconds,
         fmt("%d cases, %d mismatches, %.2f s", kGeometryCases, bad, secs));
}

void soundness(const std::shared_ptr<const bt::UiModel>& m, const std::vector<bt::CorpusTrace>& corpus) {
  bt::EstimatorConfig cfg;
  cfg.prune_epsilon = 0.0;
  std::vector<std::size_t> violations(corpus.size(), 0);
  std::vector<char> overflow(corpus.size(), 0);
  bt::parallel_for(corpus.size(), [&](std::size_t i) {
    auto est = bt::Estimator::init_known(m, m->start_index(), std::nullopt, cfg);
    bt::TerminalState truth = bt::boot_state(*m);
    try {
      for (const bt::InputEvent& e : corpus[i].trace.events) {
        est.observe(e);
        truth = bt::apply_event(*m, std::move(truth), e);
        const bool held = std::any_of(est.trackers().begin(), est.trackers().end(), [&](const bt::Tracker& t) {
          return t.state == truth.state && t.prob > 0.0 && t.region.contains(truth.cursor);
        });
        violations[i] += !held;
      }
    } catch (const bt::TrackerOverflow&) {
      overflow[i] = 1;
    }
  });
  std::size_t v = 0, o = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    v += violations[i];
    o += overflow[i];
  }
  report("soundness", v == 0 && o == 0,
         fmt("%zu traces, %zu violations, %zu overflows", corpus.size(), v, o));
}

void posterior() {
  std::mt19937_64 rng(31337);
  double worst = 0.0;
  int runs = 0;
  for (int i = 0; i < kToyModels; ++i) {
    const auto model = std::make_shared<const bt::UiModel>(bt::oracle::toy_model(rng));
    const bt::Trace tr = bt::oracle::toy_trace(rng, *model);
    for (auto scheme : {bt::TransitionScheme::kEqualTransitions, bt::TransitionScheme::kElementArea})
      for (bool detect : {false, true}) {
        bt::EstimatorConfig cfg;
        cfg.transition_scheme = scheme;
        cfg.element_detection = detect;
        cfg.prune_epsilon = 0.0;
        worst = std::max(worst, bt::oracle::posterior_gap(model, tr, std::nullopt, cfg));
        ++runs;
      }
  }
  report("posterior_exactness", worst <= kPosteriorTol,
         fmt("%d model/config runs, max gap %.3g", runs, worst));
}

struct Matrix {
  double base = 0, detect = 0, apriori = 0;
};

void accuracy(const std::shared_ptr<const bt::UiModel>& m, const std::vector<bt::CorpusTrace>& corpus,
              const bt::WeightTable& weights) {
  const auto weighted = std::make_shared<const bt::UiModel>(bt::with_weights(*m, weights));
  Matrix mx[2];
  std::vector<bt::ClickRow> det_rows[2];
  for (int s = 0; s < 2; ++s) {
    bt::TrackOptions o;
    o.start = s == 0 ? bt::StartMode::kKnown : bt::StartMode::kUnknown;
    o.config.element_detection = false;
    mx[s].base = bt::correct_rate_at(bt::track_corpus(m, corpus, o), 10);
    o.config.element_detection = true;
    det_rows[s] = bt::track_corpus(m, corpus, o);
    mx[s].detect = bt::correct_rate_at(det_rows[s], 10);
    o.config.a_priori = true;
    mx[s].apriori = bt::correct_rate_at(bt::track_corpus(weighted, corpus, o), 10);
  }
  report("accuracy_correct_state", mx[0].detect >= kKnownAt10 && mx[1].detect >= kUnknownAt10,
         fmt("click 10: known %.3f (>= %.2f), unknown %.3f (>= %.2f)", mx[0].detect, kKnownAt10,
             mx[1].detect, kUnknownAt10));
  const double ka = small_area_share(det_rows[0], 5), ua = small_area_share(det_rows[1], 10);
  report("accuracy_area", ka >= kSmallAreaShare && ua >= kSmallAreaShare,
         fmt("area <= 1%%: known@5 %.3f, unknown@10 %.3f (>= %.2f)", ka, ua, kSmallAreaShare));
  bool ok = true;
  std::string detail;
  for (int s = 0; s < 2; ++s) {
    ok = ok && mx[s].detect - mx[s].base >= kDetectionGain &&
         std::abs(mx[s].apriori - mx[s].detect) <= kAprioriDrift;
    detail += fmt("%s base %.3f +detection %.3f +a priori %.3f; ", s == 0 ? "known" : "unknown",
                  mx[s].base, mx[s].detect, mx[s].apriori);
  }
  report("option_matrix", ok, detail.substr(0, detail.size() - 2));

  bt::TrackOptions touch;
  touch.touchscreen = true;
  const double t5 = bt::correct_rate_at(bt::track_corpus(m, corpus, touch), 5);
  report("touchscreen", t5 >= kTouchAt5, fmt("click 5: %.3f (>= %.2f)", t5, kTouchAt5));
}

void performance(const std::shared_ptr<const bt::UiModel>& m, const std::vector<bt::CorpusTrace>& corpus) {
  // Sequential so timings are not shared with other workers.
  double med10[2];
  for (int s = 0; s < 2; ++s) {
    bt::TrackOptions o;
    o.start = s == 0 ? bt::StartMode::kKnown : bt::StartMode::kUnknown;
    std::vector<bt::ClickRow> rows;
    for (const bt::CorpusTrace& c : corpus) {
      auto r = bt::track_trace(m, c.trace, o, c.id);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    const auto curve = bt::summarize(rows, 20);
    std::printf("  growth %s:", s == 0 ? "known" : "unknown");
    for (const bt::CurvePoint& p : curve)
      if (p.click % 2 == 0 || p.click == 1) std::printf(" %zu:%.3fms/%.0f", p.click, p.median_ms, p.mean_trackers);
    std::printf("\n");
    std::vector<double> at10;
    for (const bt::ClickRow& r : rows)
      if (r.click == 10) at10.push_back(r.click_ms);
    med10[s] = median(at10);
  }
  report("performance", med10[0] < kKnownMs && med10[1] < kUnknownMs,
         fmt("median per click at click 10: known %.3f ms (< %.0f), unknown %.3f ms (< %.0f)", med10[0],
             kKnownMs, med10[1], kUnknownMs));
}

// Whether the clean trace edits the target while the estimator is ready.
bool edits_while_ready(const std::shared_ptr<const bt::UiModel>& m, const bt::Trace& tr,
                       const bt::AttackSpec& spec) {
  const bt::StateIndex target = *m->state_index(m->target_states.front());
  auto est = bt::Estimator::init_known(m, m->start_index(), std::nullopt, {});
  bt::TerminalState t = bt::boot_state(*m);
  for (const bt::InputEvent& e : tr.events) {
    const bt::TerminalState before = t;
    t = bt::apply_event(*m, std::move(t), e);
    est.observe(e);
    const auto a = before.values.find(spec.target_element);
    const auto b = t.values.find(spec.target_element);
    const bool changed = a != before.values.end() && b != t.values.end() && !bt::values_equal(a->second, b->second);
    if (changed && t.state == target && est.attack_ready(target)) return true;
  }
  return false;
}

void attacks(const std::shared_ptr<const bt::UiModel>& m, const std::vector<bt::CorpusTrace>& all) {
  std::vector<bt::CorpusTrace> corpus;
  for (const bt::CorpusTrace& c : all) {
    const bt::TerminalState end = bt::run_trace(*m, c.trace).back();
    if (m->is_target_state(end.state) || m->state(end.state).id == "done") corpus.push_back(c);
    if (corpus.size() == kAttackTraces) break;
  }
  bool ok = corpus.size() == kAttackTraces;
  std::string detail = fmt("%zu traces; ", corpus.size());
  for (int step : {10, 125, 250}) {
    const auto spec = bt::parse_attack_spec(fmt("confirmation:rate=180@%d", step));
    const auto out = bt::attack_corpus(m, corpus, spec);
    std::size_t launched = 0, good = 0, bounded = 0;
    for (const bt::AttackOutcome& o : out) {
      if (!o.launched) continue;
      ++launched;
      good += o.success && o.restored && o.net_zero;
      bounded += o.visible_ms <= static_cast<std::int64_t>(o.injected_event_count + 1) * step;
    }
    ok = ok && launched > 0 && good == launched && bounded == launched;
    detail += fmt("confirmation@%d %zu/%zu ok, %zu/%zu bounded; ", step, good, launched, bounded, launched);
  }
  report("attack_confirmation", ok, detail.substr(0, detail.size() - 2));

  ok = true;
  detail.clear();
  for (const char* text : {"element:rate=180@10", "element:rate=180@125", "element:rate=180@250"}) {
    const auto spec = bt::parse_attack_spec(text);
    const auto out = bt::attack_corpus(m, corpus, spec);
    std::size_t eligible = 0, good = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!edits_while_ready(m, corpus[i].trace, spec)) continue;
      ++eligible;
      good += out[i].success;
    }
    ok = ok && eligible > 0 && good == eligible;
    detail += fmt("%s %zu/%zu; ", text, good, eligible);
  }
  report("attack_element", ok, detail.substr(0, detail.size() - 2));
}

void service(const std::shared_ptr<const bt::UiModel>& m, const std::vector<bt::CorpusTrace>& corpus) {
  bt::ModelRegistry reg;
  reg.add(m);
  bt::InterposerService svc(std::move(reg), bt::ServiceOptions{"127.0.0.1", 0, false, false});
  std::thread server([&] { svc.run(); });
  std::size_t same = 0, runs = 0;
  std::string error;
  try {
    for (const char* text : {"confirmation:rate=180@10", "element:amplitude=7.5@125"}) {
      const auto spec = bt::parse_attack_spec(text);
      for (std::size_t i = 0; i < kServiceTraces && i < corpus.size(); ++i) {
        const auto got = bt::stream_trace("127.0.0.1", svc.port(), m->name, spec, corpus[i].trace);
        const auto want = bt::run_attack(m, corpus[i].trace, spec);
        ++runs;
        same += got.decision_log == want.decision_log;
      }
    }
  } catch (const std::exception& e) {
    error = e.what();
  }
  svc.stop();
  server.join();
  report("service_equivalence", error.empty() && runs > 0 && same == runs,
         error.empty() ? fmt("%zu/%zu identical decision logs", same, runs) : "error: " + error);
}

}  // namespace

int main() {
  const auto m = bt::test::pacemaker();
  const auto eval = bt::test::corpus(kTraces, kEvalSeed);
  std::vector<bt::Trace> train;
  for (bt::CorpusTrace& c : bt::test::corpus(kTraces, kTrainSeed)) train.push_back(std::move(c.trace));
  const bt::WeightTable weights = bt::profile_weights(*m, train);

  geometry();
  soundness(m, eval);
  posterior();
  accuracy(m, eval, weights);
  performance(m, eval);
  attacks(m, eval);
  service(m, eval);
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
