#pragma once

#include "riskplan/episode.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace riskplan {

/// Versioned trace document. Doubles are written with round-trip precision;
/// an infinite distance is written as null.
std::string trace_to_json(const Trace& trace);
Trace trace_from_json(const std::string& text);

std::string metrics_to_json(const EpisodeMetrics& m);

struct NamedMetrics {
  std::string method;
  EpisodeMetrics metrics;
};

/// Columns: Methods, Time (s), Avg Spd (m/s), RMS Acc (m/s^2), Max Abs Acc (m/s^2).
std::string comparison_csv(const std::vector<NamedMetrics>& rows);

/// Row label used in the ablation table for each branching mode.
std::string ablation_label(BranchMode mode);

/// Columns: Methods, Avg Max Dec (m/s^2), Avg Min Dis (m), Suc Rate (%).
std::string ablation_csv(const std::vector<BatchResult>& batches);

/// One row per episode of a batch.
std::string episodes_csv(const BatchResult& batch);

/// Speed and acceleration against time, plus the executed path overlaid on
/// the planned branches.
std::string trace_svg(const Trace& trace);

/// Throws std::runtime_error naming the path when it cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace riskplan
