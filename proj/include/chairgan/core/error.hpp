#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace chairgan {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  /// Machine-readable code, stable across releases.
  virtual const char* code() const noexcept { return "error"; }
};

#define CHAIRGAN_DEFINE_ERROR(Name, Code)                              \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(what) {}            \
    const char* code() const noexcept override { return Code; }        \
  };

CHAIRGAN_DEFINE_ERROR(InvalidArgument, "invalid_argument")
CHAIRGAN_DEFINE_ERROR(ShapeError, "shape_error")
CHAIRGAN_DEFINE_ERROR(CorpusEmpty, "corpus_empty")
CHAIRGAN_DEFINE_ERROR(DecodeError, "decode_error")
CHAIRGAN_DEFINE_ERROR(EmptyDataset, "empty_dataset")
CHAIRGAN_DEFINE_ERROR(IoError, "io_error")
CHAIRGAN_DEFINE_ERROR(CheckpointError, "checkpoint_error")
CHAIRGAN_DEFINE_ERROR(NotFound, "not_found")
CHAIRGAN_DEFINE_ERROR(ConfigError, "config_error")
CHAIRGAN_DEFINE_ERROR(TrainingDiverged, "training_diverged")
CHAIRGAN_DEFINE_ERROR(RevisionConflict, "revision_conflict")

#undef CHAIRGAN_DEFINE_ERROR

/// A catalog manifest line that does not parse; `line` is 1-based.
class CorruptManifest : public Error {
 public:
  CorruptManifest(std::size_t line, const std::string& what)
      : Error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}
  const char* code() const noexcept override { return "corrupt_manifest"; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Failure inside one pipeline stage; earlier artifacts stay on disk.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what, std::string cause_code)
      : Error("stage " + stage + ": " + what), stage_(std::move(stage)), cause_(std::move(cause_code)) {}
  const char* code() const noexcept override { return "pipeline_error"; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& cause_code() const noexcept { return cause_; }

 private:
  std::string stage_;
  std::string cause_;
};

}  // namespace chairgan
