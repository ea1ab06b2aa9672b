#pragma once

#include <stdexcept>
#include <string>

namespace cda {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- data ingestion ----
struct MagicMismatch : Error { using Error::Error; };
struct CountMismatch : Error { using Error::Error; };
struct TruncatedFile : Error { using Error::Error; };
struct MalformedLine : Error { using Error::Error; };
struct RangeError : Error { using Error::Error; };
struct UnsupportedAngle : Error { using Error::Error; };

struct InsufficientClassCount : Error {
    InsufficientClassCount(int label_, const std::string& what_)
        : Error(what_), label(label_) {}
    int label;
};

// ---- shapes and values ----
struct DimensionMismatch : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct NonSquare : Error { using Error::Error; };
struct EmptyTrainingSet : Error { using Error::Error; };

// ---- training / search ----
struct NonFiniteLoss : Error { using Error::Error; };
struct SpaceTooLarge : Error { using Error::Error; };
struct RankDeficient : Error { using Error::Error; };

// ---- orchestration ----
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };

} // namespace cda
