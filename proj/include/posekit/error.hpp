#pragma once

#include <stdexcept>
#include <string>

namespace posekit {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// raised when an operation needs at least one keypoint with v > 0
struct NoLabeledKeypoints : Error {
    NoLabeledKeypoints() : Error("pose has no labeled keypoints") {}
};

struct InvalidLevel : Error {
    explicit InvalidLevel(int level)
        : Error("pyramid level " + std::to_string(level) + " outside [3,7]") {}
};

struct TooFewKeypoints : Error {
    explicit TooFewKeypoints(std::size_t k)
        : Error("need at least 9 keypoints, got " + std::to_string(k)) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};

struct OutOfRange : Error {
    explicit OutOfRange(const std::string& what) : Error("out of range: " + what) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error("parse error: " + what) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error("schema error: " + what) {}
};

struct LengthError : Error {
    explicit LengthError(const std::string& what) : Error("length error: " + what) {}
};

struct UnknownImageId : Error {
    explicit UnknownImageId(long long id)
        : Error("result references unknown image id " + std::to_string(id)) {}
};

struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& what) : Error("invalid config: " + what) {}
};

struct NoPositives : Error {
    NoPositives() : Error("strategy selected an empty positive set") {}
};

}  // namespace posekit
