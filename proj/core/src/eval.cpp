#include "blindtrack/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <limits>
#include <mutex>
#include <thread>

#include "blindtrack/generator.hpp"
#include "blindtrack/terminal_sim.hpp"

namespace blindtrack {

std::string_view to_string(StartMode m) { return m == StartMode::kKnown ? "known" : "unknown"; }

std::optional<StartMode> start_mode_from_string(std::string_view text) {
  if (text == "known") return StartMode::kKnown;
  if (text == "unknown") return StartMode::kUnknown;
  return std::nullopt;
}

std::vector<ClickRow> track_trace(const std::shared_ptr<const UiModel>& model,
                                  const Trace& input, const TrackOptions& opts,
                                  const std::string& trace_id) {
  const UiModel& m = *model;
  Trace trace = opts.touchscreen && input.meta.mode == InputMode::kRelativeMouse
                    ? to_touchscreen(m, input)
                    : input;
  EstimatorConfig cfg = opts.config;
  cfg.input_mode = trace.meta.mode;

  TerminalState truth = boot_state(m);
  std::size_t begin = 0;
  if (opts.start == StartMode::kUnknown) {
    begin = static_cast<std::size_t>(std::floor(opts.cut_fraction * trace.events.size()));
    for (std::size_t i = 0; i < begin; ++i) truth = apply_event(m, std::move(truth), trace.events[i]);
    // Never start in the middle of a press.
    while (begin < trace.events.size() && truth.pressed) {
      truth = apply_event(m, std::move(truth), trace.events[begin++]);
    }
  }
  Estimator est = opts.start == StartMode::kKnown
                      ? Estimator::init_known(model, m.start_index(), std::nullopt, cfg)
                      : Estimator::init_unknown(model, cfg);
  const double screen = static_cast<double>(m.screen().area());
  std::vector<ClickRow> rows;
  for (std::size_t i = begin; i < trace.events.size(); ++i) {
    const InputEvent& e = trace.events[i];
    truth = apply_event(m, std::move(truth), e);
    const auto t0 = std::chrono::steady_clock::now();
    const Observation obs = est.observe(e);
    const auto t1 = std::chrono::steady_clock::now();
    if (!obs.click) continue;
    const Estimate es = est.estimate();
    ClickRow row;
    row.trace_id = trace_id;
    row.click = est.clicks_observed();
    row.area_pct = 100.0 * static_cast<double>(es.combined_region.area()) / screen;
    row.correct = es.top_state == truth.state;
    row.top_prob = es.top_prob;
    row.true_prob = es.state_probs[truth.state];
    row.trackers = es.tracker_count;
    row.click_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CurvePoint> summarize(const std::vector<ClickRow>& rows, std::size_t max_click) {
  std::vector<CurvePoint> out(max_click);
  std::vector<std::vector<double>> ms(max_click);
  for (const ClickRow& r : rows) {
    if (r.click == 0 || r.click > max_click) continue;
    CurvePoint& c = out[r.click - 1];
    ++c.traces;
    c.correct_rate += r.correct ? 1.0 : 0.0;
    c.mean_area_pct += r.area_pct;
    c.small_area_rate += r.area_pct <= 1.0 ? 1.0 : 0.0;
    c.mean_trackers += static_cast<double>(r.trackers);
    ms[r.click - 1].push_back(r.click_ms);
  }
  for (std::size_t k = 0; k < max_click; ++k) {
    CurvePoint& c = out[k];
    c.click = k + 1;
    if (c.traces == 0) continue;
    const double n = static_cast<double>(c.traces);
    c.correct_rate /= n;
    c.mean_area_pct /= n;
    c.small_area_rate /= n;
    c.mean_trackers /= n;
    auto& v = ms[k];
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    c.median_ms = v[v.size() / 2];
  }
  return out;
}

double correct_rate_at(const std::vector<ClickRow>& rows, std::size_t click) {
  std::size_t n = 0;
  std::size_t ok = 0;
  for (const ClickRow& r : rows) {
    if (r.click != click) continue;
    ++n;
    ok += r.correct ? 1 : 0;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN()
                : static_cast<double>(ok) / static_cast<double>(n);
}

WeightTable profile_weights(const UiModel& model, const std::vector<Trace>& traces) {
  std::map<std::pair<StateIndex, std::string>, long> counts;
  for (const Trace& trace : traces) {
    TerminalState t = boot_state(model);
    for (const InputEvent& e : trace.events) {
      const bool releasing = t.pressed && !t.dragging &&
                             (std::holds_alternative<ButtonUp>(e.payload) ||
                              std::holds_alternative<TouchUp>(e.payload));
      const StateIndex s = t.state;
      TerminalState next = apply_event(model, t, e);
      if (releasing && std::abs(next.press_travel_x) < model.drag_threshold) {
        if (const UiElement* hit = element_at(model, s, next.cursor)) ++counts[{s, hit->id}];
      }
      t = std::move(next);
    }
  }
  WeightTable table;
  for (StateIndex s = 0; s < model.states.size(); ++s) {
    for (const UiElement& e : model.states[s].elements) {
      const auto it = counts.find({s, e.id});
      const long c = it == counts.end() ? 0 : it->second;
      table.entries.push_back({model.states[s].id, e.id, static_cast<double>(c + 1)});
    }
  }
  return table;
}

std::vector<CorpusTrace> generate_corpus(const UiModel& model, const UserProfile& profile,
                                         const Task& task, std::size_t n, std::uint64_t seed,
                                         std::size_t first_index) {
  std::vector<CorpusTrace> out(n);
  parallel_for(n, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "trace_%04zu", first_index + i);
    out[i] = {id, generate(model, profile, task, seed + first_index + i)};
  });
  return out;
}

void write_corpus(const UiModel& model, const std::vector<CorpusTrace>& corpus,
                  const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) throw std::runtime_error("cannot write manifest in '" + dir + "'");
  manifest << "id,file,seed,events,clicks\n";
  for (const CorpusTrace& c : corpus) {
    const std::string file = c.id + ".trace";
    save_trace_file(c.trace, (fs::path(dir) / file).string());
    manifest << c.id << ',' << file << ','
             << (c.trace.meta.seed ? std::to_string(*c.trace.meta.seed) : std::string()) << ','
             << c.trace.events.size() << ',' << count_clicks(model, c.trace) << '\n';
  }
}

std::vector<CorpusTrace> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a trace directory: '" + dir + "'");
  std::vector<std::pair<std::string, fs::path>> files;
  const fs::path manifest = fs::path(dir) / "manifest.csv";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    std::getline(in, line);
    if (line.rfind("id,file", 0) != 0) throw std::runtime_error(manifest.string() + ": bad header");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string id;
      std::string file;
      std::getline(row, id, ',');
      std::getline(row, file, ',');
      if (id.empty() || file.empty()) throw std::runtime_error(manifest.string() + ": bad row '" + line + "'");
      files.emplace_back(id, fs::path(dir) / file);
    }
  } else {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".trace") {
        files.emplace_back(e.path().stem().string(), e.path());
      }
    }
    std::sort(files.begin(), files.end());
  }
  std::vector<CorpusTrace> out(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    try {
      out[i] = {files[i].first, load_trace_file(files[i].second.string())};
    } catch (const TraceError& e) {
      throw TraceError(e.index(), files[i].second.string() + ": " + e.what());
    }
  });
  return out;
}

std::vector<ClickRow> track_corpus(const std::shared_ptr<const UiModel>& model,
                                   const std::vector<CorpusTrace>& corpus,
                                   const TrackOptions& opts) {
  std::vector<std::vector<ClickRow>> per(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    per[i] = track_trace(model, corpus[i].trace, opts, corpus[i].id);
  });
  std::vector<ClickRow> rows;
  for (auto& p : per) rows.insert(rows.end(), p.begin(), p.end());
  std::stable_sort(rows.begin(), rows.end(), [](const ClickRow& a, const ClickRow& b) {
    return a.trace_id != b.trace_id ? a.trace_id < b.trace_id : a.click < b.click;
  });
  return rows;
}

std::vector<AttackOutcome> attack_corpus(const std::shared_ptr<const UiModel>& model,
                                         const std::vector<CorpusTrace>& corpus,
                                         const AttackSpec& spec, const EstimatorConfig& cfg) {
  std::vector<AttackOutcome> out(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    out[i] = run_attack(model, corpus[i].trace, spec, std::nullopt, cfg);
  });
  return out;
}

unsigned worker_threads() {
  if (const char* env = std::getenv("BLINDTRACK_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned k = static_cast<unsigned>(std::min<std::size_t>(worker_threads(), n));
  if (k <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < k; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace blindtrack
