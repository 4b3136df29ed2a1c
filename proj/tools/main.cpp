#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "blindtrack/attack.hpp"
#include "blindtrack/eval.hpp"
#include "blindtrack/generator.hpp"
#include "blindtrack/service.hpp"
#include "blindtrack/ui_model.hpp"
#include "csv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace blindtrack;
using blindtrack::cli::CsvWriter;
using blindtrack::cli::num;

namespace {

std::shared_ptr<const UiModel> read_model(const std::string& path) {
  return std::make_shared<const UiModel>(load_model_file(path));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

json nan_safe(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

bool on_off(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw CLI::ValidationError("expected on|off, got '" + s + "'");
}

// ---------------------------------------------------------------- gen-traces

struct GenArgs {
  std::string model;
  std::string task;
  std::size_t n = 400;
  std::uint64_t seed = 1000;
  std::optional<std::size_t> split;
  std::string out;
  UserProfile profile;
};

int cmd_gen(const GenArgs& a) {
  const auto model = read_model(a.model);
  const Task task = load_task_file(a.task);
  a.profile.check();
  const auto corpus = generate_corpus(*model, a.profile, task, a.n, a.seed);
  if (a.split) {
    if (*a.split > a.n) throw CLI::ValidationError("--split exceeds --n");
    const auto mid = corpus.begin() + static_cast<std::ptrdiff_t>(*a.split);
    write_corpus(*model, {corpus.begin(), mid}, (fs::path(a.out) / "train").string());
    write_corpus(*model, {mid, corpus.end()}, (fs::path(a.out) / "eval").string());
    std::printf("wrote %zu train and %zu eval traces to %s\n", *a.split, a.n - *a.split, a.out.c_str());
  } else {
    write_corpus(*model, corpus, a.out);
    std::printf("wrote %zu traces to %s\n", a.n, a.out.c_str());
  }
  return 0;
}

// ------------------------------------------------------------------- profile

int cmd_profile(const std::string& model_path, const std::string& traces, const std::string& out) {
  const auto model = read_model(model_path);
  std::vector<Trace> ts;
  for (auto& c : load_corpus(traces)) ts.push_back(std::move(c.trace));
  const WeightTable table = profile_weights(*model, ts);
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write '" + out + "'");
  f << serialize_weights(table);
  std::printf("profiled %zu traces into %zu weights: %s\n", ts.size(), table.entries.size(), out.c_str());
  return 0;
}

// --------------------------------------------------------------------- track

struct TrackArgs {
  std::string model;
  std::string traces;
  std::vector<std::string> start{"known"};
  std::vector<std::string> scheme{"area"};
  std::vector<std::string> detect{"on"};
  std::vector<std::string> apriori{"off"};
  bool touchscreen = false;
  bool matrix = false;
  std::string weights;
  std::size_t max_click = 30;
  std::optional<double> scale;
  std::optional<double> threshold;
  std::optional<double> prune;
  std::string config;
  std::string out;
};

void apply_config_file(TrackArgs& a) {
  if (a.config.empty()) return;
  const json j = json::parse(read_file(a.config));
  auto list = [&](const char* key, std::vector<std::string>& dst) {
    if (!j.contains(key)) return;
    dst.clear();
    if (j[key].is_array()) {
      for (const auto& v : j[key]) dst.push_back(v.is_boolean() ? (v.get<bool>() ? "on" : "off") : v.get<std::string>());
    } else {
      dst.push_back(j[key].is_boolean() ? (j[key].get<bool>() ? "on" : "off") : j[key].get<std::string>());
    }
  };
  for (const auto& [key, v] : j.items()) {
    static const char* known[] = {"start", "scheme", "detect", "apriori", "touchscreen",
                                  "max_click", "scale", "threshold", "prune"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known)) {
      throw std::runtime_error(a.config + ": unknown key '" + key + "'");
    }
  }
  list("start", a.start);
  list("scheme", a.scheme);
  list("detect", a.detect);
  list("apriori", a.apriori);
  if (j.contains("touchscreen")) a.touchscreen = j["touchscreen"].get<bool>();
  if (j.contains("max_click")) a.max_click = j["max_click"].get<std::size_t>();
  if (j.contains("scale")) a.scale = j["scale"].get<double>();
  if (j.contains("threshold")) a.threshold = j["threshold"].get<double>();
  if (j.contains("prune")) a.prune = j["prune"].get<double>();
}

struct RunSpec {
  StartMode start;
  TransitionScheme scheme;
  bool detect;
  std::string apriori;  // "off" or a weights path
};

int cmd_track(TrackArgs a) {
  apply_config_file(a);
  const auto model = read_model(a.model);
  const auto corpus = load_corpus(a.traces);
  std::vector<RunSpec> runs;
  auto start_of = [](const std::string& s) {
    const auto m = start_mode_from_string(s);
    if (!m) throw CLI::ValidationError("--start must be known|unknown");
    return *m;
  };
  auto scheme_of = [](const std::string& s) {
    const auto m = transition_scheme_from_string(s);
    if (!m) throw CLI::ValidationError("--scheme must be equal|area");
    return *m;
  };
  if (a.matrix) {
    if (a.weights.empty()) throw CLI::ValidationError("--matrix needs --weights PATH for the a-priori column");
    for (const auto& st : a.start) {
      for (const auto& sc : {std::string("equal"), std::string("area")}) {
        runs.push_back({start_of(st), scheme_of(sc), false, "off"});
        runs.push_back({start_of(st), scheme_of(sc), true, "off"});
        runs.push_back({start_of(st), scheme_of(sc), true, a.weights});
      }
    }
  } else {
    for (const auto& st : a.start)
      for (const auto& sc : a.scheme)
        for (const auto& d : a.detect)
          for (const auto& ap : a.apriori) runs.push_back({start_of(st), scheme_of(sc), on_off(d), ap});
  }

  std::map<std::string, std::shared_ptr<const UiModel>> weighted;
  for (const RunSpec& r : runs) {
    if (r.apriori == "off" || weighted.count(r.apriori)) continue;
    weighted[r.apriori] = std::make_shared<const UiModel>(with_weights(*model, load_weights(read_file(r.apriori))));
  }

  fs::create_directories(a.out);
  CsvWriter clicks((fs::path(a.out) / "clicks.csv").string());
  clicks.row({"start", "scheme", "detect", "apriori", "touchscreen", "trace_id", "click", "area_pct",
              "correct", "top_prob", "true_prob", "trackers", "click_ms"});
  CsvWriter curve((fs::path(a.out) / "curve.csv").string());
  curve.row({"start", "scheme", "detect", "apriori", "touchscreen", "click", "traces", "correct_rate",
             "mean_area_pct", "small_area_rate", "median_ms", "mean_trackers"});
  json summary{{"schema", 1}, {"model", model->name}, {"traces", corpus.size()},
               {"touchscreen", a.touchscreen}, {"runs", json::array()}};
  json matrix = json::object();

  for (const RunSpec& r : runs) {
    TrackOptions o;
    o.start = r.start;
    o.touchscreen = a.touchscreen;
    o.config.transition_scheme = r.scheme;
    o.config.element_detection = r.detect;
    o.config.a_priori = r.apriori != "off";
    if (a.scale) o.config.detection_scale = *a.scale;
    if (a.threshold) o.config.target_prob_threshold = *a.threshold;
    if (a.prune) o.config.prune_epsilon = *a.prune;
    o.config.check();
    const auto& m = o.config.a_priori ? weighted.at(r.apriori) : model;
    const auto rows = track_corpus(m, corpus, o);
    const std::string st(to_string(r.start));
    const std::string sc(to_string(r.scheme));
    const std::string det = r.detect ? "on" : "off";
    const std::string ap = o.config.a_priori ? fs::path(r.apriori).filename().string() : "off";
    const std::string touch = a.touchscreen ? "1" : "0";
    for (const ClickRow& row : rows) {
      clicks.row({st, sc, det, ap, touch, row.trace_id, std::to_string(row.click), num(row.area_pct),
                  row.correct ? "1" : "0", num(row.top_prob), num(row.true_prob),
                  std::to_string(row.trackers), num(row.click_ms)});
    }
    const auto points = summarize(rows, a.max_click);
    for (const CurvePoint& p : points) {
      if (p.traces == 0) continue;
      curve.row({st, sc, det, ap, touch, std::to_string(p.click), std::to_string(p.traces),
                 num(p.correct_rate), num(p.mean_area_pct), num(p.small_area_rate), num(p.median_ms),
                 num(p.mean_trackers)});
    }
    auto at = [&](std::size_t k) -> const CurvePoint* {
      return k <= points.size() && points[k - 1].traces > 0 ? &points[k - 1] : nullptr;
    };
    json run{{"start", st}, {"scheme", sc}, {"detect", r.detect}, {"apriori", ap}};
    for (std::size_t k : {5, 10}) {
      const CurvePoint* p = at(k);
      const std::string sfx = "_at_" + std::to_string(k);
      run["correct" + sfx] = p ? json(p->correct_rate) : json(nullptr);
      run["small_area" + sfx] = p ? json(p->small_area_rate) : json(nullptr);
      run["median_ms" + sfx] = p ? json(p->median_ms) : json(nullptr);
      run["mean_trackers" + sfx] = p ? json(p->mean_trackers) : json(nullptr);
    }
    summary["runs"].push_back(run);
    const char* column = !r.detect ? "base" : (o.config.a_priori ? "+a priori" : "+element detection");
    if (r.detect || !o.config.a_priori) matrix[st][sc][column] = run["correct_at_10"];
    std::printf("%-7s %-5s detect=%-3s apriori=%-12s c5=%s c10=%s\n", st.c_str(), sc.c_str(),
                det.c_str(), ap.c_str(), at(5) ? num(at(5)->correct_rate).c_str() : "-",
                at(10) ? num(at(10)->correct_rate).c_str() : "-");
  }
  summary["matrix"] = matrix;
  write_json(fs::path(a.out) / "summary.json", summary);
  return 0;
}

// --------------------------------------------------------------------- bench

int cmd_bench(const std::string& model_path, const std::string& traces,
              const std::vector<std::string>& starts, const std::string& scheme,
              std::size_t max_click, const std::string& out) {
  const auto model = read_model(model_path);
  const auto corpus = load_corpus(traces);
  fs::create_directories(out);
  CsvWriter lat((fs::path(out) / "latency.csv").string());
  lat.row({"start", "trace_id", "click", "ms", "trackers"});
  CsvWriter growth((fs::path(out) / "growth.csv").string());
  growth.row({"start", "click", "traces", "mean_trackers", "median_ms", "p90_ms"});
  json summary{{"schema", 1}, {"model", model->name}, {"traces", corpus.size()}, {"starts", json::object()}};
  for (const std::string& s : starts) {
    TrackOptions o;
    const auto start = start_mode_from_string(s);
    const auto sc = transition_scheme_from_string(scheme);
    if (!start || !sc) throw CLI::ValidationError("bad --start or --scheme");
    o.start = *start;
    o.config.transition_scheme = *sc;
    // Timing is taken one trace at a time to keep cores uncontended.
    std::vector<ClickRow> rows;
    for (const CorpusTrace& c : corpus) {
      auto r = track_trace(model, c.trace, o, c.id);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    std::vector<double> all;
    std::map<std::size_t, std::vector<double>> by_click;
    std::map<std::size_t, std::vector<double>> trackers;
    for (const ClickRow& r : rows) {
      lat.row({s, r.trace_id, std::to_string(r.click), num(r.click_ms), std::to_string(r.trackers)});
      all.push_back(r.click_ms);
      if (r.click <= max_click) {
        by_click[r.click].push_back(r.click_ms);
        trackers[r.click].push_back(static_cast<double>(r.trackers));
      }
    }
    for (const auto& [k, v] : by_click) {
      double mean = 0;
      for (double t : trackers[k]) mean += t;
      mean /= static_cast<double>(trackers[k].size());
      growth.row({s, std::to_string(k), std::to_string(v.size()), num(mean), num(percentile(v, 0.5)),
                  num(percentile(v, 0.9))});
    }
    const auto at10 = by_click.count(10) ? by_click[10] : std::vector<double>{};
    summary["starts"][s] = {{"clicks", all.size()},
                            {"median_ms", nan_safe(percentile(all, 0.5))},
                            {"p90_ms", nan_safe(percentile(all, 0.9))},
                            {"p99_ms", nan_safe(percentile(all, 0.99))},
                            {"median_ms_at_10", nan_safe(percentile(at10, 0.5))}};
    std::printf("%-7s clicks=%zu median=%.4f ms p99=%.4f ms median@10=%.4f ms\n", s.c_str(), all.size(),
                percentile(all, 0.5), percentile(all, 0.99), percentile(at10, 0.5));
  }
  write_json(fs::path(out) / "summary.json", summary);
  return 0;
}

// -------------------------------------------------------------------- attack

std::vector<std::string> preset_specs() {
  std::vector<std::string> out;
  for (const char* variant : {"element", "confirmation"}) {
    for (const char* target : {"threshold=200", "rate=180"}) {
      for (int ms : {10, 125, 250}) out.push_back(std::string(variant) + ":" + target + "@" + std::to_string(ms));
    }
  }
  return out;
}

int cmd_attack(const std::string& model_path, const std::string& traces, std::vector<std::string> specs,
               bool logs, const std::string& out) {
  const auto model = read_model(model_path);
  const auto corpus = load_corpus(traces);
  if (specs.empty()) specs = preset_specs();
  fs::create_directories(out);
  CsvWriter rows((fs::path(out) / "outcomes.csv").string());
  rows.row({"spec", "trace_id", "launched", "success", "restored", "net_zero", "visible_ms",
            "injected_event_count"});
  json summary{{"schema", 1}, {"model", model->name}, {"traces", corpus.size()}, {"specs", json::array()}};
  for (const std::string& text : specs) {
    const AttackSpec spec = parse_attack_spec(text);
    check_attack_spec(*model, spec);
    const auto outcomes = attack_corpus(model, corpus, spec);
    std::size_t launched = 0;
    std::size_t success = 0;
    std::size_t restored = 0;
    std::vector<double> visible;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const AttackOutcome& o = outcomes[i];
      rows.row({text, corpus[i].id, o.launched ? "1" : "0", o.success ? "1" : "0", o.restored ? "1" : "0",
                o.net_zero ? "1" : "0", std::to_string(o.visible_ms), std::to_string(o.injected_event_count)});
      if (logs) {
        fs::path dir = fs::path(out) / "logs";
        fs::create_directories(dir);
        std::string name = text;
        std::replace_if(name.begin(), name.end(), [](char c) { return c == ':' || c == '=' || c == '@' || c == ','; }, '_');
        std::ofstream f(dir / (name + "." + corpus[i].id + ".log"));
        for (const std::string& line : o.decision_log) f << line << '\n';
      }
      if (!o.launched) continue;
      ++launched;
      success += o.success ? 1 : 0;
      restored += o.restored ? 1 : 0;
      visible.push_back(static_cast<double>(o.visible_ms));
    }
    const double n = static_cast<double>(outcomes.size());
    const double l = static_cast<double>(launched);
    summary["specs"].push_back({{"spec", text},
                                {"traces", outcomes.size()},
                                {"launched", launched},
                                {"launch_rate", n > 0 ? l / n : 0.0},
                                {"success_rate_launched", launched ? static_cast<double>(success) / l : 0.0},
                                {"success_rate_all", n > 0 ? static_cast<double>(success) / n : 0.0},
                                {"restored_rate_launched", launched ? static_cast<double>(restored) / l : 0.0},
                                {"visible_ms_median", nan_safe(percentile(visible, 0.5))},
                                {"visible_ms_max", nan_safe(percentile(visible, 1.0))}});
    std::printf("%-28s launched %zu/%zu  success %zu  visible median %s ms\n", text.c_str(), launched,
                outcomes.size(), success, visible.empty() ? "-" : num(percentile(visible, 0.5)).c_str());
  }
  write_json(fs::path(out) / "summary.json", summary);
  return 0;
}

// --------------------------------------------------------------------- serve

int cmd_serve(const std::string& listen, const std::string& models_dir, bool debug, bool pace) {
  ServiceOptions opts;
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--listen must be HOST:PORT");
  opts.host = listen.substr(0, colon);
  opts.port = static_cast<std::uint16_t>(std::stoi(listen.substr(colon + 1)));
  opts.debug = debug;
  opts.pace = pace;
  ModelRegistry registry;
  if (registry.load_dir(models_dir) == 0) throw std::runtime_error("no *.model files in '" + models_dir + "'");
  InterposerService service(std::move(registry), opts);
  std::printf("listening on ws://%s:%u (proto %d, debug %s)\n", opts.host.c_str(), service.port(),
              kProtocolVersion, debug ? "on" : "off");
  std::fflush(stdout);
  service.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blind tracking of terminal UI state from input events"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "blindtrack 0.1.0");

  GenArgs gen;
  auto* g = app.add_subcommand("gen-traces", "generate a synthetic trace corpus");
  g->add_option("--model", gen.model, "UI model file")->required()->check(CLI::ExistingFile);
  g->add_option("--task", gen.task, "task file")->required()->check(CLI::ExistingFile);
  g->add_option("--n", gen.n, "number of traces")->capture_default_str();
  g->add_option("--seed", gen.seed, "seed of the first trace")->capture_default_str();
  g->add_option("--split", gen.split, "first N traces go to train/, the rest to eval/");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--error-rate", gen.profile.error_rate)->capture_default_str();
  g->add_option("--mean-clicks", gen.profile.mean_clicks)->capture_default_str();
  g->add_option("--sd-clicks", gen.profile.sd_clicks)->capture_default_str();
  g->add_option("--min-clicks", gen.profile.min_clicks)->capture_default_str();
  g->add_option("--gap-median-ms", gen.profile.gap_median_ms)->capture_default_str();
  g->add_option("--pointing-sd", gen.profile.pointing_sd)->capture_default_str();

  std::string p_model, p_traces, p_out;
  auto* p = app.add_subcommand("profile", "a-priori weights from a training corpus");
  p->add_option("--model", p_model)->required()->check(CLI::ExistingFile);
  p->add_option("--traces", p_traces)->required()->check(CLI::ExistingDirectory);
  p->add_option("--out", p_out, "weights file")->required();

  TrackArgs tr;
  auto* t = app.add_subcommand("track", "per-click tracking accuracy over a corpus");
  t->add_option("--model", tr.model)->required()->check(CLI::ExistingFile);
  t->add_option("--traces", tr.traces)->required()->check(CLI::ExistingDirectory);
  t->add_option("--start", tr.start, "known|unknown (repeatable)")->capture_default_str();
  t->add_option("--scheme", tr.scheme, "equal|area (repeatable)")->capture_default_str();
  t->add_option("--detect", tr.detect, "on|off (repeatable)")->capture_default_str();
  t->add_option("--apriori", tr.apriori, "weights PATH|off (repeatable)")->capture_default_str();
  t->add_flag("--touchscreen", tr.touchscreen, "convert traces to touch input first");
  t->add_flag("--matrix", tr.matrix, "{equal,area} x {base, +detection, +a priori}");
  t->add_option("--weights", tr.weights, "weights file for --matrix");
  t->add_option("--max-click", tr.max_click)->capture_default_str();
  t->add_option("--scale", tr.scale, "detection scale");
  t->add_option("--threshold", tr.threshold, "target probability threshold");
  t->add_option("--prune", tr.prune, "prune epsilon");
  t->add_option("--config", tr.config, "JSON file overriding the flags")->check(CLI::ExistingFile);
  t->add_option("--out", tr.out)->required();

  std::string b_model, b_traces, b_scheme = "area", b_out;
  std::vector<std::string> b_start{"known", "unknown"};
  std::size_t b_max = 30;
  auto* b = app.add_subcommand("bench", "per-click processing time");
  b->add_option("--model", b_model)->required()->check(CLI::ExistingFile);
  b->add_option("--traces", b_traces)->required()->check(CLI::ExistingDirectory);
  b->add_option("--start", b_start)->capture_default_str();
  b->add_option("--scheme", b_scheme)->capture_default_str();
  b->add_option("--max-click", b_max)->capture_default_str();
  b->add_option("--out", b_out)->required();

  std::string a_model, a_traces, a_out;
  std::vector<std::string> a_specs;
  bool a_logs = false;
  auto* at = app.add_subcommand("attack", "run attacks over a corpus");
  at->add_option("--model", a_model)->required()->check(CLI::ExistingFile);
  at->add_option("--traces", a_traces)->required()->check(CLI::ExistingDirectory);
  at->add_option("--spec", a_specs, "variant:element=value@ms[,wait=ms] (repeatable; default: 12 presets)");
  at->add_flag("--logs", a_logs, "write decision logs");
  at->add_option("--out", a_out)->required();

  std::string s_listen = "127.0.0.1:8765", s_models = "models";
  bool s_debug = false, s_pace = false;
  auto* s = app.add_subcommand("serve", "web-socket interposer service");
  s->add_option("--listen", s_listen, "HOST:PORT")->capture_default_str();
  s->add_option("--models", s_models, "directory of *.model files")->capture_default_str()->check(CLI::ExistingDirectory);
  s->add_flag("--debug", s_debug, "allow debug frames");
  s->add_flag("--pace", s_pace, "emit injected events in real time");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*g) return cmd_gen(gen);
    if (*p) return cmd_profile(p_model, p_traces, p_out);
    if (*t) return cmd_track(tr);
    if (*b) return cmd_bench(b_model, b_traces, b_start, b_scheme, b_max, b_out);
    if (*at) return cmd_attack(a_model, a_traces, a_specs, a_logs, a_out);
    if (*s) return cmd_serve(s_listen, s_models, s_debug, s_pace);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "blindtrack: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
