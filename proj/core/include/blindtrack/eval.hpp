#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "blindtrack/attack.hpp"
#include "blindtrack/estimator.hpp"
#include "blindtrack/generator.hpp"
#include "blindtrack/trace.hpp"
#include "blindtrack/ui_model.hpp"

namespace blindtrack {

enum class StartMode { kKnown, kUnknown };

std::string_view to_string(StartMode m);
std::optional<StartMode> start_mode_from_string(std::string_view text);

struct TrackOptions {
  StartMode start = StartMode::kKnown;
  EstimatorConfig config;
  /// Convert relative traces to touch before tracking.
  bool touchscreen = false;
  /// Unknown start drops this leading fraction of each trace's events.
  double cut_fraction = 0.1;
};

/// Tracker statistics after one click.
struct ClickRow {
  std::string trace_id;
  std::size_t click = 0;
  double area_pct = 0.0;
  bool correct = false;
  double top_prob = 0.0;
  double true_prob = 0.0;
  std::size_t trackers = 0;
  double click_ms = 0.0;
};

/// Runs the estimator along one trace next to the oracle and reports a row
/// per click. With an unknown start the first `cut_fraction` of the events
/// is skipped (moved forward to the next released-button boundary).
std::vector<ClickRow> track_trace(const std::shared_ptr<const UiModel>& model,
                                  const Trace& trace, const TrackOptions& opts,
                                  const std::string& trace_id);

struct CurvePoint {
  std::size_t click = 0;
  std::size_t traces = 0;
  double correct_rate = 0.0;
  double mean_area_pct = 0.0;
  /// Fraction of traces whose area is at most 1% of the screen.
  double small_area_rate = 0.0;
  double median_ms = 0.0;
  double mean_trackers = 0.0;
};

/// Per-click aggregates over all traces long enough to reach that click.
std::vector<CurvePoint> summarize(const std::vector<ClickRow>& rows, std::size_t max_click);

/// Correct-state rate at `click` (NaN when no trace reaches it).
double correct_rate_at(const std::vector<ClickRow>& rows, std::size_t click);

/// Laplace-smoothed (+1) click counts per state and transition element,
/// taken from oracle replays of the training traces.
WeightTable profile_weights(const UiModel& model, const std::vector<Trace>& traces);

/// A trace with its corpus id (file stem).
struct CorpusTrace {
  std::string id;
  Trace trace;
};

/// `n` generated traces with seeds seed, seed+1, ... and ids trace_0000, ...
std::vector<CorpusTrace> generate_corpus(const UiModel& model, const UserProfile& profile,
                                         const Task& task, std::size_t n, std::uint64_t seed,
                                         std::size_t first_index = 0);

/// Writes <id>.trace files and manifest.csv (id,file,seed,events,clicks).
void write_corpus(const UiModel& model, const std::vector<CorpusTrace>& corpus,
                  const std::string& dir);

/// Reads the traces listed in dir/manifest.csv, or every *.trace file in
/// name order when there is no manifest.
std::vector<CorpusTrace> load_corpus(const std::string& dir);

/// track_trace over a corpus in parallel; rows sorted by (trace id, click).
std::vector<ClickRow> track_corpus(const std::shared_ptr<const UiModel>& model,
                                   const std::vector<CorpusTrace>& corpus,
                                   const TrackOptions& opts);

/// run_attack over a corpus in parallel, in corpus order.
std::vector<AttackOutcome> attack_corpus(const std::shared_ptr<const UiModel>& model,
                                         const std::vector<CorpusTrace>& corpus,
                                         const AttackSpec& spec, const EstimatorConfig& cfg = {});

/// Number of worker threads: BLINDTRACK_THREADS if set, else hardware.
unsigned worker_threads();

/// Applies `fn(i)` for i in [0, n) on worker_threads() threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace blindtrack
