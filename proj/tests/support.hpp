#pragma once

#include <memory>
#include <string>
#include <vector>

#include "blindtrack/eval.hpp"
#include "blindtrack/generator.hpp"
#include "blindtrack/ui_model.hpp"

#ifndef BLINDTRACK_SOURCE_DIR
#error "BLINDTRACK_SOURCE_DIR must point at the source tree"
#endif

namespace blindtrack::test {

inline std::string source_path(const std::string& rel) {
  return std::string(BLINDTRACK_SOURCE_DIR) + "/" + rel;
}

inline std::shared_ptr<const UiModel> pacemaker() {
  static const auto model =
      std::make_shared<const UiModel>(load_model_file(source_path("models/pacemaker.model")));
  return model;
}

inline const Task& pacemaker_task() {
  static const Task task = load_task_file(source_path("tasks/pacemaker.task"));
  return task;
}

/// Default-profile synthetic traces, seeds 1000, 1001, ...
inline std::vector<CorpusTrace> corpus(std::size_t n, std::uint64_t seed = 1000) {
  return generate_corpus(*pacemaker(), UserProfile{}, pacemaker_task(), n, seed);
}

}  // namespace blindtrack::test
