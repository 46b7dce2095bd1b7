#pragma once

// Hash tables over PQ codes, queried by enumerating candidate codes in
// ascending asymmetric distance. Results equal a linear ADC scan.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pqtable/common.hpp"
#include "pqtable/quantizer.hpp"
#include "pqtable/slot_store.hpp"

namespace pqtable {

/// Counters filled in by a query when requested.
struct QueryStats {
    std::size_t hashings = 0;      // keys drawn from the generators and looked up
    std::size_t first_hit = 0;     // 1-based hashing index of the first non-empty slot
    std::size_t candidates = 0;    // identifiers fetched from slots
    std::size_t marked = 0;        // multi-table: distinct identifiers marked
};

/// Single table keyed by the full PQ code.
class SinglePQTable {
public:
    explicit SinglePQTable(std::shared_ptr<const Codebook> codebook);

    /// Appends codes; identifiers continue from size().
    void insert(const CodeArray& codes);
    void insert(std::span<const PQCode> codes);

    std::vector<Score> query(std::span<const float> q, std::size_t topk,
                             QueryStats* stats = nullptr) const;

    std::size_t size() const noexcept { return store_.id_count(); }
    const SlotStore& store() const noexcept { return store_; }
    const Codebook& codebook() const noexcept { return *codebook_; }

private:
    std::shared_ptr<const Codebook> codebook_;
    SlotStore store_;
};

/// Snapshot handed to a BoundObserver when a query fixes its distance bound:
/// `bound_id` was just seen in every table, `d_min` is its distance, and
/// `marked` lists every identifier marked so far.
struct BoundEvent {
    RecordId bound_id = 0;
    double d_min = 0.0;
    std::span<const Score> marked;
};

using BoundObserver = std::function<void(const BoundEvent&)>;

/// T tables, table t keyed by code elements [t*M/T, (t+1)*M/T). Keeps the
/// full code array for computing asymmetric distances while merging.
class MultiPQTable {
public:
    MultiPQTable(std::shared_ptr<const Codebook> codebook, std::size_t tables);

    void insert(const CodeArray& codes);
    void insert(std::span<const PQCode> codes);

    /// With one table this runs the single-table search.
    std::vector<Score> query(std::span<const float> q, std::size_t topk,
                             QueryStats* stats = nullptr,
                             const BoundObserver* observer = nullptr) const;

    std::size_t tables() const noexcept { return stores_.size(); }
    std::size_t size() const noexcept { return codes_.size(); }
    const SlotStore& store(std::size_t t) const { return stores_.at(t); }
    const CodeArray& codes() const noexcept { return codes_; }
    const Codebook& codebook() const noexcept { return *codebook_; }

    void shrink_to_fit();
    /// Table structures plus, for T > 1, the retained code array.
    std::size_t memory_bytes() const noexcept;

    /// Reassembles a table from deserialized codes and stores.
    static MultiPQTable from_parts(std::shared_ptr<const Codebook> codebook, std::size_t tables,
                                   CodeArray codes, std::vector<SlotStore> stores);

private:
    std::vector<Score> query_one_table(const DistanceMatrix& dm, std::size_t topk,
                                       QueryStats* stats) const;

    std::shared_ptr<const Codebook> codebook_;
    std::vector<SlotStore> stores_;
    CodeArray codes_;
};

}  // namespace pqtable
