#include "egosal/error.hpp"

namespace egosal {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::MalformedRow: return "MalformedRow";
        case Errc::NonMonotonicTime: return "NonMonotonicTime";
        case Errc::EmptyFile: return "EmptyFile";
        case Errc::InsufficientSamples: return "InsufficientSamples";
        case Errc::NonPositiveDistance: return "NonPositiveDistance";
        case Errc::FixationOutOfBounds: return "FixationOutOfBounds";
        case Errc::TauOutOfRange: return "TauOutOfRange";
        case Errc::EmptyMaskAtFixation: return "EmptyMaskAtFixation";
        case Errc::BoxOutOfBounds: return "BoxOutOfBounds";
        case Errc::NoFreeSpace: return "NoFreeSpace";
        case Errc::AlreadyAugmented: return "AlreadyAugmented";
        case Errc::IncompatibleShapes: return "IncompatibleShapes";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::LabelOutOfRange: return "LabelOutOfRange";
        case Errc::DatasetEmpty: return "DatasetEmpty";
        case Errc::DivergenceDetected: return "DivergenceDetected";
        case Errc::NonFiniteValue: return "NonFiniteValue";
        case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
        case Errc::EmptySequence: return "EmptySequence";
        case Errc::WindowTooSmall: return "WindowTooSmall";
        case Errc::OverlappingObjects: return "OverlappingObjects";
        case Errc::DiskWriteFailure: return "DiskWriteFailure";
        case Errc::NoPositives: return "NoPositives";
        case Errc::NoFrames: return "NoFrames";
        case Errc::BudgetExceeded: return "BudgetExceeded";
        case Errc::DatasetRootMissing: return "DatasetRootMissing";
        case Errc::FrameOutOfRange: return "FrameOutOfRange";
        case Errc::NoGazeForFrame: return "NoGazeForFrame";
        case Errc::ValidationFailed: return "ValidationFailed";
        case Errc::UnknownVideo: return "UnknownVideo";
        case Errc::MissingAnnotations: return "MissingAnnotations";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

}  // namespace egosal
