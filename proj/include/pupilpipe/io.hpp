#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pupilpipe/types.hpp"

namespace pupilpipe {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LineError {
  std::size_t line_number = 0;  // 1-based
  std::string message;
};

struct PredictionsReadResult {
  std::vector<FrameRecord> records;
  std::vector<LineError> errors;  // malformed lines, counted and skipped
  std::size_t lines_total = 0;
};

/// Reads prediction records, one JSON object per line. Unknown fields are
/// ignored; malformed lines are skipped and reported with line numbers.
PredictionsReadResult read_predictions_jsonl(std::istream& in);
PredictionsReadResult read_predictions_file(const std::filesystem::path& path);

void write_predictions_jsonl(std::ostream& out, std::span<const FrameRecord> records);
void write_predictions_file(const std::filesystem::path& path,
                            std::span<const FrameRecord> records);

/// Fixed 6-decimal formatting used by every CSV the toolkit writes.
std::string format_real(double v);

std::vector<std::string> split_csv_line(const std::string& line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace pupilpipe
