#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pqtable/common.hpp"

namespace pqtable {

/// Hash table from a (sub-)code key to the list of record identifiers stored
/// under it. Identifiers keep insertion order inside a slot; looking up an
/// absent key yields an empty span.
///
/// The layout depends on the packed key width:
///  - up to 24 bits: sparse direct-address table. Keys are grouped by 64; each
///    group keeps an occupancy bitmap and a packed array holding only the
///    non-empty slots, addressed through a popcount of the bitmap.
///  - up to 64 bits: open addressing (linear probing) on the packed key.
///  - wider keys: node-based map on the key bytes. Such configurations work
///    but are not tuned.
class SlotStore {
public:
    enum class Layout { direct_address, open_addressing, wide };

    SlotStore() = default;
    SlotStore(std::size_t key_length, std::size_t centroids);

    void push(std::span<const CodeElement> key, RecordId id);
    std::span<const RecordId> lookup(std::span<const CodeElement> key) const;

    std::size_t key_length() const noexcept { return key_length_; }
    std::size_t key_bits() const noexcept { return key_length_ * element_bits_; }
    std::size_t slot_count() const noexcept { return slot_count_; }
    std::size_t id_count() const noexcept { return id_count_; }
    Layout layout() const noexcept { return layout_; }

    /// Visits every non-empty slot in ascending key order.
    void for_each_slot(
            const std::function<void(std::span<const CodeElement>, std::span<const RecordId>)>& fn)
            const;

    /// Releases spare capacity left by appends.
    void shrink_to_fit();

    /// Bytes held by the structure, counting allocated capacity.
    std::size_t memory_bytes() const noexcept;

private:
    using IdList = std::vector<RecordId>;

    struct Group {
        std::uint64_t occupied = 0;
        std::vector<IdList> slots;
    };

    struct Bucket {
        std::uint64_t key = 0;
        std::uint32_t list = kNoList;
    };

    static constexpr std::uint32_t kNoList = 0xffffffffu;

    std::uint64_t pack(std::span<const CodeElement> key) const;
    void unpack(std::uint64_t packed, std::span<CodeElement> out) const noexcept;
    std::string wide_key(std::span<const CodeElement> key) const;
    void validate(std::span<const CodeElement> key) const;

    IdList* find_open(std::uint64_t packed);
    const IdList* find_open(std::uint64_t packed) const;
    void grow_open();

    std::size_t key_length_ = 0;
    std::size_t centroids_ = 0;
    std::size_t element_bits_ = 0;
    Layout layout_ = Layout::direct_address;
    std::size_t slot_count_ = 0;
    std::size_t id_count_ = 0;

    std::vector<Group> groups_;                           // direct_address
    std::vector<Bucket> buckets_;                         // open_addressing
    std::unordered_map<std::string, std::uint32_t> wide_; // wide
    std::vector<IdList> lists_;                           // open_addressing, wide
};

}  // namespace pqtable
