#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace egosal {

/// Every failure the library reports. Grouped by the module that raises it.
enum class Errc {
    // gaze ingest
    MalformedRow,
    NonMonotonicTime,
    EmptyFile,
    InsufficientSamples,
    // saliency
    NonPositiveDistance,
    FixationOutOfBounds,
    TauOutOfRange,
    EmptyMaskAtFixation,
    // patches
    BoxOutOfBounds,
    NoFreeSpace,
    AlreadyAugmented,
    // nnet
    IncompatibleShapes,
    ShapeMismatch,
    LabelOutOfRange,
    DatasetEmpty,
    DivergenceDetected,
    NonFiniteValue,
    CorruptCheckpoint,
    // fusion
    EmptySequence,
    WindowTooSmall,
    // simgen
    OverlappingObjects,
    DiskWriteFailure,
    // metrics
    NoPositives,
    NoFrames,
    BudgetExceeded,
    // annotation
    DatasetRootMissing,
    FrameOutOfRange,
    NoGazeForFrame,
    ValidationFailed,
    UnknownVideo,
    // pipeline / io
    MissingAnnotations,
    InvalidConfig,
    IoError,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace egosal
