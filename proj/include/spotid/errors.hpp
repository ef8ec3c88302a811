#pragma once

#include <stdexcept>
#include <string>

namespace spotid {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad window size, non-positive gamma, zero target dimension, ...
class InvalidParameter : public Error {
public:
    using Error::Error;
};

// Empty clouds, mismatched dimensions, roster mismatch, ...
class InvalidInput : public Error {
public:
    using Error::Error;
};

class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

class UnmatchableRecord : public Error {
public:
    UnmatchableRecord(std::string individual_id, std::string scale_id, const std::string& why)
        : Error("record " + individual_id + ":" + scale_id + " is unmatchable: " + why),
          individual_id_(std::move(individual_id)),
          scale_id_(std::move(scale_id)) {}

    const std::string& individual_id() const noexcept { return individual_id_; }
    const std::string& scale_id() const noexcept { return scale_id_; }

private:
    std::string individual_id_;
    std::string scale_id_;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

class GalleryError : public Error {
public:
    using Error::Error;
};

// Raised when a writer loses the manifest-version compare-and-swap,
// or when a session decision is repeated.
class ConflictError : public Error {
public:
    using Error::Error;
};

}  // namespace spotid
