#ifndef KGTRUST_TYPES_HPP
#define KGTRUST_TYPES_HPP

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kgt {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t k = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
        k ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
        k ^= k >> 31;
        return static_cast<std::size_t>(k * 0xBF58476D1CE4E5B9ULL);
    }
};

enum class NoiseKind : std::uint8_t { none, replaced_head, replaced_relation, replaced_tail };

inline std::string_view to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::none: return "none";
        case NoiseKind::replaced_head: return "replaced_head";
        case NoiseKind::replaced_relation: return "replaced_relation";
        case NoiseKind::replaced_tail: return "replaced_tail";
    }
    return "none";
}

struct LabeledTriple {
    Triple triple;
    int label = 1;
    NoiseKind noise = NoiseKind::none;

    friend bool operator==(const LabeledTriple&, const LabeledTriple&) = default;
};

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, unknown identifiers, inconsistent sizes.
/// The CLI maps these to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace kgt

#endif // KGTRUST_TYPES_HPP
