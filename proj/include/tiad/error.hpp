#pragma once

#include <stdexcept>
#include <string>

namespace tiad {

/// Coarse error families. The CLI maps these onto its exit codes.
enum class ErrorKind {
  Network,
  Format,
  Corpus,
  Data,
  Usage,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define TIAD_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, #Name ": " + what) {} \
  }

// datacube / ingest
TIAD_DEFINE_ERROR(FormatError, Format);
TIAD_DEFINE_ERROR(InsufficientHistory, Data);
TIAD_DEFINE_ERROR(NetworkError, Network);
TIAD_DEFINE_ERROR(ProtocolError, Network);
TIAD_DEFINE_ERROR(DecodeError, Format);
// maskgen
TIAD_DEFINE_ERROR(SunBelowHorizon, Data);
// detectors
TIAD_DEFINE_ERROR(DegenerateStatistics, Data);
TIAD_DEFINE_ERROR(EmptyMask, Data);
TIAD_DEFINE_ERROR(DegenerateSeries, Data);
// inpainter
TIAD_DEFINE_ERROR(ShapeError, Data);
TIAD_DEFINE_ERROR(EmptyCorpus, Corpus);
// synthlab
TIAD_DEFINE_ERROR(GeometryError, Data);
TIAD_DEFINE_ERROR(SingleClass, Data);
TIAD_DEFINE_ERROR(NoPositives, Data);

#undef TIAD_DEFINE_ERROR

}  // namespace tiad
