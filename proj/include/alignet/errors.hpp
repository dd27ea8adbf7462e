#pragma once

#include <stdexcept>
#include <string>

namespace alignet {

// Bad argument passed by the caller (empty tag list, inverted window, k out
// of range, ...). Maps to CLI exit code 3.
class ArgumentError : public std::runtime_error {
public:
    explicit ArgumentError(const std::string& what) : std::runtime_error(what) {}
};

// Input data violates a documented format or value contract (corrupt corpus,
// out-of-range lexicon strength, ...). Maps to CLI exit code 3.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Two inputs that must agree do not (node outside partition, unlabeled
// endpoint, annotation for an unclustered user, ...). Maps to exit code 1.
class ConsistencyError : public std::runtime_error {
public:
    explicit ConsistencyError(const std::string& what) : std::runtime_error(what) {}
};

// A required upstream artifact is absent. Carries the missing path so the
// CLI can name it and exit with code 2.
class MissingInputError : public std::runtime_error {
public:
    explicit MissingInputError(const std::string& path)
        : std::runtime_error("missing required input: " + path), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Unreadable file, failed write, and similar environment faults. Exit code 1.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace alignet
