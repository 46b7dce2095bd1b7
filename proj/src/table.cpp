#include "pqtable/table.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include "pqtable/keygen.hpp"

namespace pqtable {

namespace {

void check_query(std::size_t topk, std::size_t n) {
    PQTABLE_CHECK(topk >= 1, invalid_argument, "L must be at least 1");
    PQTABLE_CHECK(n > 0, empty_database, "empty-database: table holds no records");
    PQTABLE_CHECK(topk <= n, exhausted, "exhausted-before-L: L exceeds the number of records");
}

// Hash the keys in ascending distance until L identifiers are collected.
std::vector<Score> search_store(const SlotStore& store, const DistanceMatrix& dm, std::size_t topk,
                                QueryStats* stats) {
    KeyGenerator gen;
    gen.init(dm, 0, dm.subspaces());
    std::vector<Score> found;
    found.reserve(topk);
    std::size_t hashings = 0;
    while (found.size() < topk) {
        const GeneratedKey key = gen.next_key();
        ++hashings;
        const auto ids = store.lookup(key.code);
        if (stats != nullptr) {
            stats->hashings = hashings;
            stats->candidates += ids.size();
            if (stats->first_hit == 0 && !ids.empty()) {
                stats->first_hit = hashings;
            }
        }
        if (topk == 1 && !ids.empty()) {
            return {Score{ids.front(), key.dist}};
        }
        for (RecordId id : ids) {
            found.push_back({id, key.dist});
        }
    }
    // The last slot may overshoot; all its entries share one distance.
    std::sort(found.begin(), found.end());
    found.resize(topk);
    return found;
}

void push_codes(std::span<const PQCode> codes, CodeArray& out) {
    out.reserve(out.size() + codes.size());
    for (const auto& c : codes) {
        out.push_back(c);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// SinglePQTable

SinglePQTable::SinglePQTable(std::shared_ptr<const Codebook> codebook)
        : codebook_(std::move(codebook)), store_(codebook_->subspaces(), codebook_->centroids()) {}

void SinglePQTable::insert(const CodeArray& codes) {
    PQTABLE_CHECK(codes.subspaces() == codebook_->subspaces(), dimension_mismatch,
                  "code length differs from M");
    PQCode code(codes.subspaces());
    const std::size_t base = size();
    for (std::size_t n = 0; n < codes.size(); ++n) {
        codes.copy_code(n, code);
        store_.push(code, static_cast<RecordId>(base + n));
    }
}

void SinglePQTable::insert(std::span<const PQCode> codes) {
    const std::size_t base = size();
    for (std::size_t n = 0; n < codes.size(); ++n) {
        store_.push(codes[n], static_cast<RecordId>(base + n));
    }
}

std::vector<Score> SinglePQTable::query(std::span<const float> q, std::size_t topk,
                                        QueryStats* stats) const {
    check_query(topk, size());
    return search_store(store_, build_distance_matrix(q, *codebook_), topk, stats);
}

// ---------------------------------------------------------------------------
// MultiPQTable

MultiPQTable::MultiPQTable(std::shared_ptr<const Codebook> codebook, std::size_t tables)
        : codebook_(std::move(codebook)), codes_(codebook_->subspaces(), codebook_->centroids()) {
    const std::size_t m = codebook_->subspaces();
    PQTABLE_CHECK(tables >= 1 && m % tables == 0, invalid_argument,
                  "table count must divide the number of subspaces M");
    stores_.reserve(tables);
    for (std::size_t t = 0; t < tables; ++t) {
        stores_.emplace_back(m / tables, codebook_->centroids());
    }
}

void MultiPQTable::insert(const CodeArray& codes) {
    PQTABLE_CHECK(codes.subspaces() == codebook_->subspaces(), dimension_mismatch,
                  "code length differs from M");
    const std::size_t width = codebook_->subspaces() / tables();
    const std::size_t base = size();
    PQCode code(codes.subspaces());
    codes_.reserve(base + codes.size());
    for (std::size_t n = 0; n < codes.size(); ++n) {
        codes.copy_code(n, code);
        const std::span<const CodeElement> full(code);
        for (std::size_t t = 0; t < tables(); ++t) {
            stores_[t].push(full.subspan(t * width, width), static_cast<RecordId>(base + n));
        }
        codes_.push_back(code);
    }
}

void MultiPQTable::insert(std::span<const PQCode> codes) {
    CodeArray packed(codebook_->subspaces(), codebook_->centroids());
    push_codes(codes, packed);
    insert(packed);
}

void MultiPQTable::shrink_to_fit() {
    for (auto& s : stores_) {
        s.shrink_to_fit();
    }
}

std::size_t MultiPQTable::memory_bytes() const noexcept {
    std::size_t bytes = 0;
    for (const auto& s : stores_) {
        bytes += s.memory_bytes();
    }
    if (tables() > 1) {
        bytes += codes_.memory_bytes();
    }
    return bytes;
}

MultiPQTable MultiPQTable::from_parts(std::shared_ptr<const Codebook> codebook, std::size_t tables,
                                      CodeArray codes, std::vector<SlotStore> stores) {
    MultiPQTable table(std::move(codebook), tables);
    PQTABLE_CHECK(stores.size() == tables, format, "store count differs from T");
    for (std::size_t t = 0; t < tables; ++t) {
        PQTABLE_CHECK(stores[t].key_length() == table.stores_[t].key_length() &&
                              stores[t].id_count() == codes.size(),
                      format, "store shape differs from the table layout");
    }
    PQTABLE_CHECK(codes.subspaces() == table.codebook_->subspaces(), format,
                  "code array length differs from M");
    table.codes_ = std::move(codes);
    table.stores_ = std::move(stores);
    return table;
}

std::vector<Score> MultiPQTable::query_one_table(const DistanceMatrix& dm, std::size_t topk,
                                                 QueryStats* stats) const {
    return search_store(stores_.front(), dm, topk, stats);
}

std::vector<Score> MultiPQTable::query(std::span<const float> q, std::size_t topk,
                                       QueryStats* stats, const BoundObserver* observer) const {
    check_query(topk, size());
    const DistanceMatrix dm = build_distance_matrix(q, *codebook_);
    const std::size_t num_tables = tables();
    if (num_tables == 1) {
        return query_one_table(dm, topk, stats);
    }

    const std::size_t width = codebook_->subspaces() / num_tables;
    std::vector<KeyGenerator> gens(num_tables);
    for (std::size_t t = 0; t < num_tables; ++t) {
        gens[t].init(dm, t * width, width);
    }

    // Sparse counter: only a small fraction of identifiers is ever touched.
    std::unordered_map<RecordId, std::uint32_t> counter;
    counter.reserve(1024);
    std::vector<Score> marked;
    std::vector<Score> selected;
    Score best{0, std::numeric_limits<double>::infinity()};

    std::vector<bool> active(num_tables, true);
    std::size_t num_active = num_tables;
    std::size_t hashings = 0;
    while (num_active > 0) {
        for (std::size_t t = 0; t < num_tables; ++t) {
            if (!active[t]) {
                continue;
            }
            const auto key = gens[t].next();
            if (!key) {
                active[t] = false;
                --num_active;
                continue;
            }
            ++hashings;
            const auto ids = stores_[t].lookup(key->code);
            if (stats != nullptr) {
                stats->hashings = hashings;
                stats->candidates += ids.size();
                if (stats->first_hit == 0 && !ids.empty()) {
                    stats->first_hit = hashings;
                }
            }
            for (RecordId id : ids) {
                const std::uint32_t count = ++counter[id];
                if (count == 1) {
                    const Score s{id, adc_distance(dm, codes_, id)};
                    marked.push_back(s);
                    if (s < best) {
                        best = s;
                    }
                    continue;
                }
                if (count != num_tables) {
                    continue;
                }
                // Seen in every table: its distance bounds every unmarked item.
                const double d_min = adc_distance(dm, codes_, id);
                if (stats != nullptr) {
                    stats->marked = marked.size();
                }
                if (observer != nullptr) {
                    (*observer)(BoundEvent{id, d_min, marked});
                }
                if (topk == 1) {
                    return {best};
                }
                if (marked.size() < topk) {
                    continue;
                }
                selected.clear();
                for (const Score& s : marked) {
                    if (s.dist <= d_min) {
                        selected.push_back(s);
                    }
                }
                if (selected.size() >= topk) {
                    std::partial_sort(selected.begin(),
                                      selected.begin() + static_cast<std::ptrdiff_t>(topk),
                                      selected.end());
                    selected.resize(topk);
                    return selected;
                }
            }
        }
    }

    // Every generator ran dry: everything reachable is marked.
    PQTABLE_CHECK(marked.size() >= topk, exhausted, "exhausted-before-L");
    std::partial_sort(marked.begin(), marked.begin() + static_cast<std::ptrdiff_t>(topk), marked.end());
    marked.resize(topk);
    return marked;
}

}  // namespace pqtable
