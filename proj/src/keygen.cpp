#include "pqtable/keygen.hpp"

#include <algorithm>

namespace pqtable {

namespace {
constexpr std::uint32_t kEmpty = 0xffffffffu;
}

NonDuplicateQueue::NonDuplicateQueue(std::size_t width) { reset(width); }

void NonDuplicateQueue::reset(std::size_t width) {
    width_ = width;
    stored_ = 0;
    arena_.clear();
    heap_.clear();
    table_.assign(64, kEmpty);
}

bool NonDuplicateQueue::node_after(const Node& a, const Node& b) const {
    if (a.priority != b.priority) {
        return a.priority > b.priority;
    }
    const auto ia = identity(a.slot);
    const auto ib = identity(b.slot);
    return std::lexicographical_compare(ib.begin(), ib.end(), ia.begin(), ia.end());
}

std::uint64_t NonDuplicateQueue::hash(std::span<const CodeElement> id) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (CodeElement e : id) {
        h ^= e;
        h *= 0x100000001b3ULL;
    }
    return h ^ (h >> 29);
}

void NonDuplicateQueue::grow_table() {
    std::vector<std::uint32_t> old = std::move(table_);
    table_.assign(old.size() * 2, kEmpty);
    const std::size_t mask = table_.size() - 1;
    for (std::uint32_t slot : old) {
        if (slot == kEmpty) {
            continue;
        }
        std::size_t i = hash(identity(slot)) & mask;
        while (table_[i] != kEmpty) {
            i = (i + 1) & mask;
        }
        table_[i] = slot;
    }
}

bool NonDuplicateQueue::push(double priority, std::span<const CodeElement> id) {
    PQTABLE_CHECK(id.size() == width_, dimension_mismatch, "identity width differs from queue width");
    if ((stored_ + 1) * 2 > table_.size()) {
        grow_table();
    }
    const std::size_t mask = table_.size() - 1;
    std::size_t i = hash(id) & mask;
    while (table_[i] != kEmpty) {
        const auto other = identity(table_[i]);
        if (std::equal(other.begin(), other.end(), id.begin())) {
            return false;
        }
        i = (i + 1) & mask;
    }
    const auto slot = static_cast<std::uint32_t>(stored_++);
    arena_.insert(arena_.end(), id.begin(), id.end());
    table_[i] = slot;
    heap_.push_back({priority, slot});
    std::push_heap(heap_.begin(), heap_.end(),
                   [this](const Node& a, const Node& b) { return node_after(a, b); });
    return true;
}

NonDuplicateQueue::Entry NonDuplicateQueue::pop() {
    PQTABLE_CHECK(!heap_.empty(), exhausted, "pop-on-empty: priority queue is empty");
    std::pop_heap(heap_.begin(), heap_.end(),
                  [this](const Node& a, const Node& b) { return node_after(a, b); });
    const Node top = heap_.back();
    heap_.pop_back();
    return {top.priority, identity(top.slot)};
}

// ---------------------------------------------------------------------------

void KeyGenerator::init(std::span<const float> q_part, const Codebook& cb, std::size_t first,
                        std::size_t count) {
    PQTABLE_CHECK(count >= 1 && first + count <= cb.subspaces(), out_of_range,
                  "subspace range outside the codebook");
    const std::size_t ds = cb.subdim();
    PQTABLE_CHECK(q_part.size() == count * ds, dimension_mismatch,
                  "query slice dimension differs from M' * D/M");
    rows_ = DistanceMatrix(count, cb.centroids());
    for (std::size_t m = 0; m < count; ++m) {
        const auto qm = q_part.subspan(m * ds, ds);
        for (std::size_t k = 0; k < cb.centroids(); ++k) {
            rows_.set_distance(m, k, squared_l2(qm, cb.codeword(first + m, k)));
        }
    }
    seed();
}

void KeyGenerator::init(const DistanceMatrix& dm, std::size_t first, std::size_t count) {
    PQTABLE_CHECK(count >= 1, out_of_range, "generator needs at least one subspace");
    rows_ = dm.slice(first, count);
    seed();
}

void KeyGenerator::seed() {
    rows_.sort_rows();
    const std::size_t m = rows_.subspaces();
    queue_.reset(m);
    current_.assign(m, 0);
    scratch_.assign(m, 0);
    emitted_ = 0;
    for (std::size_t i = 0; i < m; ++i) {
        scratch_[i] = rows_.index_at_rank(i, 0);
    }
    queue_.push(priority(scratch_), scratch_);
}

double KeyGenerator::priority(std::span<const CodeElement> code) const noexcept {
    return adc_distance_unchecked(rows_, code);
}

std::optional<GeneratedKey> KeyGenerator::next() {
    if (queue_.empty()) {
        return std::nullopt;
    }
    const auto top = queue_.pop();
    std::copy(top.identity.begin(), top.identity.end(), current_.begin());
    const double dist = top.priority;

    const std::size_t k = rows_.centroids();
    for (std::size_t m = 0; m < current_.size(); ++m) {
        const std::size_t pos = rows_.rank_of(m, current_[m]);
        // Last tuple in the row: nothing further along this axis.
        if (pos + 1 == k) {
            continue;
        }
        scratch_ = current_;
        scratch_[m] = rows_.index_at_rank(m, pos + 1);
        queue_.push(priority(scratch_), scratch_);
    }
    ++emitted_;
    return GeneratedKey{current_, dist};
}

GeneratedKey KeyGenerator::next_key() {
    auto key = next();
    PQTABLE_CHECK(key.has_value(), exhausted, "key generator exhausted: all codes emitted");
    return *key;
}

}  // namespace pqtable
