#pragma once

// A searchable index: codebook, optional OPQ rotation and the hash tables,
// plus its on-disk form.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pqtable/common.hpp"
#include "pqtable/opq.hpp"
#include "pqtable/quantizer.hpp"
#include "pqtable/table.hpp"

namespace pqtable {

/// Codebook plus the rotation trained with it, if any.
struct Quantizer {
    Codebook codebook;
    std::optional<Rotation> rotation;
};

void write_quantizer(const std::string& path, const Quantizer& q);
Quantizer read_quantizer(const std::string& path);

class Index {
public:
    /// Encodes `data` (rotated first when a rotation is given) and fills the
    /// tables. tables == 0 picks T with plan_tables.
    static Index build(const Quantizer& quantizer, FloatView data, std::size_t tables = 0);

    std::vector<Score> search(std::span<const float> q, std::size_t topk,
                              QueryStats* stats = nullptr,
                              const BoundObserver* observer = nullptr) const;

    /// Exhaustive ADC scan over the stored codes; same input handling as search.
    std::vector<Score> linear_search(std::span<const float> q, std::size_t topk) const;

    std::size_t size() const noexcept { return table_.size(); }
    std::size_t dim() const noexcept { return codebook_->dim(); }
    std::size_t tables() const noexcept { return table_.tables(); }
    const Codebook& codebook() const noexcept { return *codebook_; }
    const std::optional<Rotation>& rotation() const noexcept { return rotation_; }
    const MultiPQTable& table() const noexcept { return table_; }

    /// Bytes held by the tables, the code array and the codebook.
    std::size_t memory_bytes() const noexcept;

    void write(const std::string& path) const;
    static Index read(const std::string& path);

private:
    Index(std::shared_ptr<const Codebook> codebook, std::optional<Rotation> rotation,
          MultiPQTable table);

    std::vector<float> prepare(std::span<const float> q) const;

    std::shared_ptr<const Codebook> codebook_;
    std::optional<Rotation> rotation_;
    MultiPQTable table_;
};

/// Trains a rotation and codebook on `train`, then indexes `base`.
Index build_opqtable(FloatView train, FloatView base, const OpqParams& params,
                     std::size_t tables = 0);

}  // namespace pqtable
