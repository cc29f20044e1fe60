#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedleak/defense/mechanism.h"
#include "fedleak/nn/network.h"

namespace fedleak::fed {

enum class RecordKind { kGradient, kDelta };

std::string_view to_string(RecordKind kind);
RecordKind parse_record_kind(std::string_view name);

// Ground truth behind a captured step. Only metric computation reads it.
struct Evaluation {
  std::vector<nn::Tensor> inputs;
  std::vector<std::size_t> labels;
  nn::GradientVector clean;  // undefended cross-entropy gradient of the batch

  bool operator==(const Evaluation&) const = default;
};

// One update as transmitted, with the public global parameters it was
// computed against.
struct TranscriptRecord {
  std::size_t round = 0;
  std::size_t step = 0;
  std::size_t client = 0;
  RecordKind kind = RecordKind::kGradient;
  std::size_t batch_size = 0;
  defense::SharedUpdate update;
  nn::Params public_params;
  std::optional<Evaluation> evaluation;

  bool operator==(const TranscriptRecord&) const = default;
};

class GradientTranscript {
 public:
  // Throws ConfigError when the record is earlier than the last one
  // (by round, then step).
  void append(TranscriptRecord record);

  const std::vector<TranscriptRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // Copy without evaluation sections: what an adversary gets to see.
  GradientTranscript attack_view() const;

  bool operator==(const GradientTranscript&) const = default;

 private:
  std::vector<TranscriptRecord> records_;
};

// Line-delimited JSON, one record per line. Reals are written with
// round-trip precision.
void write_transcript(std::ostream& out, const GradientTranscript& transcript,
                      bool include_evaluation = true);
void write_transcript(const std::filesystem::path& path, const GradientTranscript& transcript,
                      bool include_evaluation = true);
// Throws FormatError on malformed lines (naming the line number).
GradientTranscript read_transcript(std::istream& in);
GradientTranscript read_transcript(const std::filesystem::path& path);

// JSON parameter checkpoints.
void write_params(const std::filesystem::path& path, const nn::Params& params);
nn::Params read_params(const std::filesystem::path& path);

}  // namespace fedleak::fed
