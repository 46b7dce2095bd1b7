#include "pqtable/slot_store.hpp"

#include <algorithm>
#include <bit>
#include <utility>

namespace pqtable {

namespace {

constexpr std::size_t kDirectAddressMaxBits = 24;
constexpr std::size_t kGroupBits = 6;  // 64 slots per group

std::uint64_t mix(std::uint64_t x) noexcept {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

}  // namespace

SlotStore::SlotStore(std::size_t key_length, std::size_t centroids)
        : key_length_(key_length),
          centroids_(centroids),
          element_bits_(centroids <= 1 ? 0 : static_cast<std::size_t>(std::bit_width(centroids - 1))) {
    PQTABLE_CHECK(key_length_ >= 1, invalid_argument, "slot key needs at least one element");
    PQTABLE_CHECK(centroids_ >= 1 && centroids_ <= 65536, invalid_argument, "K out of range");
    const std::size_t bits = key_bits();
    if (bits <= kDirectAddressMaxBits) {
        layout_ = Layout::direct_address;
        const std::size_t slots = std::size_t{1} << bits;
        groups_.resize((slots + 63) >> kGroupBits);
    } else if (bits <= 64) {
        layout_ = Layout::open_addressing;
        buckets_.resize(64);
    } else {
        layout_ = Layout::wide;
    }
}

void SlotStore::validate(std::span<const CodeElement> key) const {
    PQTABLE_CHECK(key.size() == key_length_, dimension_mismatch, "slot key length mismatch");
    for (CodeElement e : key) {
        PQTABLE_CHECK(e < centroids_, out_of_range, "slot key element exceeds K");
    }
}

std::uint64_t SlotStore::pack(std::span<const CodeElement> key) const {
    std::uint64_t packed = 0;
    for (CodeElement e : key) {
        packed = (packed << element_bits_) | e;
    }
    return packed;
}

void SlotStore::unpack(std::uint64_t packed, std::span<CodeElement> out) const noexcept {
    const std::uint64_t mask = (std::uint64_t{1} << element_bits_) - 1;
    for (std::size_t i = key_length_; i-- > 0;) {
        out[i] = static_cast<CodeElement>(packed & mask);
        packed >>= element_bits_;
    }
}

std::string SlotStore::wide_key(std::span<const CodeElement> key) const {
    // Big-endian elements: byte order equals lexicographic element order.
    std::string s(key.size() * 2, '\0');
    for (std::size_t i = 0; i < key.size(); ++i) {
        s[2 * i] = static_cast<char>(key[i] >> 8);
        s[2 * i + 1] = static_cast<char>(key[i] & 0xff);
    }
    return s;
}

SlotStore::IdList* SlotStore::find_open(std::uint64_t packed) {
    return const_cast<IdList*>(std::as_const(*this).find_open(packed));
}

const SlotStore::IdList* SlotStore::find_open(std::uint64_t packed) const {
    const std::size_t mask = buckets_.size() - 1;
    for (std::size_t i = mix(packed) & mask;; i = (i + 1) & mask) {
        const Bucket& b = buckets_[i];
        if (b.list == kNoList) {
            return nullptr;
        }
        if (b.key == packed) {
            return &lists_[b.list];
        }
    }
}

void SlotStore::grow_open() {
    std::vector<Bucket> old = std::move(buckets_);
    buckets_.assign(old.size() * 2, Bucket{});
    const std::size_t mask = buckets_.size() - 1;
    for (const Bucket& b : old) {
        if (b.list == kNoList) {
            continue;
        }
        std::size_t i = mix(b.key) & mask;
        while (buckets_[i].list != kNoList) {
            i = (i + 1) & mask;
        }
        buckets_[i] = b;
    }
}

void SlotStore::push(std::span<const CodeElement> key, RecordId id) {
    validate(key);
    switch (layout_) {
        case Layout::direct_address: {
            const std::uint64_t packed = pack(key);
            Group& g = groups_[packed >> kGroupBits];
            const std::uint64_t bit = std::uint64_t{1} << (packed & 63);
            const auto rank = static_cast<std::size_t>(std::popcount(g.occupied & (bit - 1)));
            if ((g.occupied & bit) == 0) {
                g.occupied |= bit;
                g.slots.insert(g.slots.begin() + static_cast<std::ptrdiff_t>(rank), IdList{});
                ++slot_count_;
            }
            g.slots[rank].push_back(id);
            break;
        }
        case Layout::open_addressing: {
            const std::uint64_t packed = pack(key);
            if (IdList* list = find_open(packed)) {
                list->push_back(id);
                break;
            }
            if ((slot_count_ + 1) * 2 > buckets_.size()) {
                grow_open();
            }
            const std::size_t mask = buckets_.size() - 1;
            std::size_t i = mix(packed) & mask;
            while (buckets_[i].list != kNoList) {
                i = (i + 1) & mask;
            }
            buckets_[i] = {packed, static_cast<std::uint32_t>(lists_.size())};
            lists_.push_back(IdList{id});
            ++slot_count_;
            break;
        }
        case Layout::wide: {
            auto [it, inserted] = wide_.try_emplace(wide_key(key), static_cast<std::uint32_t>(lists_.size()));
            if (inserted) {
                lists_.emplace_back();
                ++slot_count_;
            }
            lists_[it->second].push_back(id);
            break;
        }
    }
    ++id_count_;
}

std::span<const RecordId> SlotStore::lookup(std::span<const CodeElement> key) const {
    validate(key);
    switch (layout_) {
        case Layout::direct_address: {
            const std::uint64_t packed = pack(key);
            const Group& g = groups_[packed >> kGroupBits];
            const std::uint64_t bit = std::uint64_t{1} << (packed & 63);
            if ((g.occupied & bit) == 0) {
                return {};
            }
            return g.slots[static_cast<std::size_t>(std::popcount(g.occupied & (bit - 1)))];
        }
        case Layout::open_addressing: {
            const IdList* list = find_open(pack(key));
            return list ? std::span<const RecordId>(*list) : std::span<const RecordId>{};
        }
        case Layout::wide: {
            const auto it = wide_.find(wide_key(key));
            return it == wide_.end() ? std::span<const RecordId>{}
                                     : std::span<const RecordId>(lists_[it->second]);
        }
    }
    return {};
}

void SlotStore::for_each_slot(
        const std::function<void(std::span<const CodeElement>, std::span<const RecordId>)>& fn) const {
    std::vector<CodeElement> key(key_length_);
    switch (layout_) {
        case Layout::direct_address:
            for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
                const Group& g = groups_[gi];
                std::uint64_t bits = g.occupied;
                std::size_t rank = 0;
                while (bits != 0) {
                    const auto low = static_cast<std::uint64_t>(std::countr_zero(bits));
                    unpack((gi << kGroupBits) | low, key);
                    fn(key, g.slots[rank++]);
                    bits &= bits - 1;
                }
            }
            break;
        case Layout::open_addressing: {
            std::vector<std::pair<std::uint64_t, std::uint32_t>> entries;
            entries.reserve(slot_count_);
            for (const Bucket& b : buckets_) {
                if (b.list != kNoList) {
                    entries.emplace_back(b.key, b.list);
                }
            }
            std::sort(entries.begin(), entries.end());
            for (const auto& [packed, list] : entries) {
                unpack(packed, key);
                fn(key, lists_[list]);
            }
            break;
        }
        case Layout::wide: {
            std::vector<std::pair<std::string, std::uint32_t>> entries(wide_.begin(), wide_.end());
            std::sort(entries.begin(), entries.end());
            for (const auto& [bytes, list] : entries) {
                for (std::size_t i = 0; i < key_length_; ++i) {
                    key[i] = static_cast<CodeElement>((static_cast<unsigned char>(bytes[2 * i]) << 8) |
                                                      static_cast<unsigned char>(bytes[2 * i + 1]));
                }
                fn(key, lists_[list]);
            }
            break;
        }
    }
}

void SlotStore::shrink_to_fit() {
    for (Group& g : groups_) {
        g.slots.shrink_to_fit();
        for (IdList& l : g.slots) {
            l.shrink_to_fit();
        }
    }
    lists_.shrink_to_fit();
    for (IdList& l : lists_) {
        l.shrink_to_fit();
    }
}

std::size_t SlotStore::memory_bytes() const noexcept {
    std::size_t bytes = sizeof(*this);
    bytes += groups_.capacity() * sizeof(Group);
    for (const Group& g : groups_) {
        bytes += g.slots.capacity() * sizeof(IdList);
        for (const IdList& l : g.slots) {
            bytes += l.capacity() * sizeof(RecordId);
        }
    }
    bytes += buckets_.capacity() * sizeof(Bucket);
    bytes += lists_.capacity() * sizeof(IdList);
    for (const IdList& l : lists_) {
        bytes += l.capacity() * sizeof(RecordId);
    }
    for (const auto& [k, v] : wide_) {
        bytes += sizeof(k) + k.capacity() + sizeof(v) + 2 * sizeof(void*);
    }
    return bytes;
}

}  // namespace pqtable
