#pragma once

// Multi-sequence key generator: enumerates PQ codes in non-decreasing
// asymmetric distance from a query, one code per call.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pqtable/common.hpp"
#include "pqtable/quantizer.hpp"

namespace pqtable {

/// Min-priority queue that refuses any identity it has already accepted.
/// Identities are fixed-width sequences of code elements; ties on priority
/// pop the lexicographically smallest identity first.
class NonDuplicateQueue {
public:
    struct Entry {
        double priority = 0.0;
        std::span<const CodeElement> identity;  // valid until the next push
    };

    explicit NonDuplicateQueue(std::size_t width = 0);

    /// Clears all state, including the seen set.
    void reset(std::size_t width);

    /// Inserts iff `identity` was never inserted before. Returns whether it was.
    bool push(double priority, std::span<const CodeElement> identity);

    /// Removes and returns a minimal entry. Throws exhausted when empty.
    Entry pop();

    std::size_t size() const noexcept { return heap_.size(); }
    bool empty() const noexcept { return heap_.empty(); }
    std::size_t width() const noexcept { return width_; }
    /// Number of distinct identities ever accepted.
    std::size_t seen() const noexcept { return stored_; }

private:
    struct Node {
        double priority;
        std::uint32_t slot;
    };

    std::span<const CodeElement> identity(std::uint32_t slot) const {
        return {arena_.data() + static_cast<std::size_t>(slot) * width_, width_};
    }
    bool node_after(const Node& a, const Node& b) const;  // heap order: a pops after b
    std::uint64_t hash(std::span<const CodeElement> id) const noexcept;
    void grow_table();

    std::size_t width_ = 0;
    std::size_t stored_ = 0;
    std::vector<CodeElement> arena_;
    std::vector<Node> heap_;
    std::vector<std::uint32_t> table_;  // open addressing over arena slots
};

/// One generated key: the (sub-)code and its asymmetric distance.
struct GeneratedKey {
    std::span<const CodeElement> code;  // valid until the next call to next()
    double dist = 0.0;
};

/// Single-owner, per-query state. Each call to next() returns the next code
/// in ascending asymmetric distance, until all K^M' codes were emitted.
class KeyGenerator {
public:
    KeyGenerator() = default;

    /// Builds the sorted distance rows for subspaces [first, first + count)
    /// of `cb` from the query slice `q_part` (length count * D/M).
    void init(std::span<const float> q_part, const Codebook& cb, std::size_t first,
              std::size_t count);

    /// Same, reusing rows [first, first + count) of a precomputed matrix.
    void init(const DistanceMatrix& dm, std::size_t first, std::size_t count);

    /// Next code, or nullopt once every code has been emitted.
    std::optional<GeneratedKey> next();

    /// Like next() but throws exhausted instead of returning nullopt.
    GeneratedKey next_key();

    std::size_t subspaces() const noexcept { return rows_.subspaces(); }
    std::size_t centroids() const noexcept { return rows_.centroids(); }
    std::size_t queue_size() const noexcept { return queue_.size(); }
    std::size_t emitted() const noexcept { return emitted_; }
    const DistanceMatrix& distances() const noexcept { return rows_; }

private:
    void seed();
    double priority(std::span<const CodeElement> code) const noexcept;

    DistanceMatrix rows_;
    NonDuplicateQueue queue_;
    PQCode current_;
    PQCode scratch_;
    std::size_t emitted_ = 0;
};

}  // namespace pqtable
