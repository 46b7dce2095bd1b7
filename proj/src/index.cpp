#include "pqtable/index.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "pqtable/analysis.hpp"

namespace pqtable {

namespace {

constexpr std::uint32_t kIndexVersion = 1;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        PQTABLE_THROW(io, "cannot create '" + path + "'");
    }
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        PQTABLE_THROW(io, "cannot open '" + path + "'");
    }
    return in;
}

void write_key(std::ostream& out, std::span<const CodeElement> key, std::size_t width) {
    std::vector<std::uint8_t> buf;
    buf.reserve(key.size() * width);
    for (CodeElement e : key) {
        buf.push_back(static_cast<std::uint8_t>(e));
        if (width == 2) {
            buf.push_back(static_cast<std::uint8_t>(e >> 8));
        }
    }
    detail::write_bytes(out, buf.data(), buf.size());
}

void read_key(std::istream& in, std::span<CodeElement> key, std::size_t width) {
    std::vector<std::uint8_t> buf(key.size() * width);
    detail::read_bytes(in, buf.data(), buf.size(), "slot key");
    for (std::size_t i = 0; i < key.size(); ++i) {
        key[i] = width == 1 ? buf[i] : static_cast<CodeElement>(buf[2 * i] | (buf[2 * i + 1] << 8));
    }
}

}  // namespace

void write_quantizer(const std::string& path, const Quantizer& q) {
    auto out = open_out(path);
    write_codebook(out, q.codebook);
    if (q.rotation) {
        write_rotation(out, *q.rotation);
    }
}

Quantizer read_quantizer(const std::string& path) {
    auto in = open_in(path);
    Quantizer q;
    q.codebook = read_codebook(in);
    if (detail::peek_magic(in, "OPQR")) {
        q.rotation = read_rotation(in);
        PQTABLE_CHECK(q.rotation->dim() == q.codebook.dim(), format, "rotation D differs from codebook D");
    }
    return q;
}

Index::Index(std::shared_ptr<const Codebook> codebook, std::optional<Rotation> rotation, MultiPQTable table)
        : codebook_(std::move(codebook)), rotation_(std::move(rotation)), table_(std::move(table)) {}

Index Index::build(const Quantizer& quantizer, FloatView data, std::size_t tables) {
    const Codebook& cb = quantizer.codebook;
    PQTABLE_CHECK(data.rows == 0 || data.cols == cb.dim(), dimension_mismatch,
                  "data dimension differs from codebook D");
    PQTABLE_CHECK(data.rows <= 0xffffffffu, invalid_argument, "too many records for 32-bit ids");
    if (quantizer.rotation) {
        PQTABLE_CHECK(quantizer.rotation->dim() == cb.dim(), dimension_mismatch,
                      "rotation D differs from codebook D");
    }
    if (tables == 0) {
        tables = data.rows < 2 ? 1 : plan_tables(cb.code_bits(), data.rows, cb.subspaces());
    }
    auto shared = std::make_shared<const Codebook>(cb);
    MultiPQTable table(shared, tables);
    if (quantizer.rotation) {
        table.insert(encode_all(rotate_all(*quantizer.rotation, data).view(), cb));
    } else {
        table.insert(encode_all(data, cb));
    }
    table.shrink_to_fit();
    return Index(std::move(shared), quantizer.rotation, std::move(table));
}

std::vector<float> Index::prepare(std::span<const float> q) const {
    PQTABLE_CHECK(q.size() == dim(), dimension_mismatch, "query dimension differs from index D");
    if (rotation_) {
        return rotate(*rotation_, q);
    }
    return {q.begin(), q.end()};
}

std::vector<Score> Index::search(std::span<const float> q, std::size_t topk, QueryStats* stats,
                                 const BoundObserver* observer) const {
    if (!rotation_) {
        return table_.query(q, topk, stats, observer);
    }
    const auto rq = prepare(q);
    return table_.query(rq, topk, stats, observer);
}

std::vector<Score> Index::linear_search(std::span<const float> q, std::size_t topk) const {
    const auto rq = prepare(q);
    return linear_adc_scan(rq, table_.codes(), *codebook_, topk);
}

std::size_t Index::memory_bytes() const noexcept {
    std::size_t bytes = table_.memory_bytes() + codebook_->codewords().size() * sizeof(float);
    if (table_.tables() == 1) {
        // The single-table search never reads the code array, but it stays
        // resident for linear_search and serialization.
        bytes += table_.codes().memory_bytes();
    }
    if (rotation_) {
        bytes += rotation_->values().size() * sizeof(float);
    }
    return bytes;
}

void Index::write(const std::string& path) const {
    auto out = open_out(path);
    detail::write_magic(out, "PQTB");
    detail::write_u32(out, kIndexVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(tables()));
    detail::write_u32(out, static_cast<std::uint32_t>(size()));
    write_codebook(out, *codebook_);

    const CodeArray& codes = table_.codes();
    detail::write_bytes(out, codes.bytes().data(), codes.bytes().size());

    const std::size_t width = codes.element_bytes();
    for (std::size_t t = 0; t < tables(); ++t) {
        const SlotStore& store = table_.store(t);
        detail::write_u32(out, static_cast<std::uint32_t>(store.slot_count()));
        store.for_each_slot([&](std::span<const CodeElement> key, std::span<const RecordId> ids) {
            write_key(out, key, width);
            detail::write_u32(out, static_cast<std::uint32_t>(ids.size()));
            for (RecordId id : ids) {
                detail::write_u32(out, id);
            }
        });
    }
    if (rotation_) {
        write_rotation(out, *rotation_);
    }
}

Index Index::read(const std::string& path) {
    auto in = open_in(path);
    detail::expect_magic(in, "PQTB");
    const std::uint32_t version = detail::read_u32(in, "index version");
    PQTABLE_CHECK(version == kIndexVersion, format, "unsupported index version " + std::to_string(version));
    const std::uint32_t tables = detail::read_u32(in, "index T");
    const std::uint32_t n = detail::read_u32(in, "index N");
    auto cb = std::make_shared<const Codebook>(read_codebook(in));
    const std::size_t m = cb->subspaces();
    PQTABLE_CHECK(tables >= 1 && m % tables == 0, format, "index T does not divide M");

    const std::size_t width = cb->centroids() <= 256 ? 1 : 2;
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n) * m * width);
    detail::read_bytes(in, bytes.data(), bytes.size(), "code array");
    CodeArray codes = CodeArray::from_bytes(m, cb->centroids(), n, std::move(bytes));

    const std::size_t key_length = m / tables;
    std::vector<SlotStore> stores;
    stores.reserve(tables);
    PQCode key(key_length);
    for (std::uint32_t t = 0; t < tables; ++t) {
        SlotStore store(key_length, cb->centroids());
        const std::uint32_t slots = detail::read_u32(in, "slot count");
        for (std::uint32_t s = 0; s < slots; ++s) {
            read_key(in, key, width);
            const std::uint32_t count = detail::read_u32(in, "slot size");
            PQTABLE_CHECK(count >= 1 && count <= n, format, "slot size out of range");
            for (std::uint32_t i = 0; i < count; ++i) {
                const std::uint32_t id = detail::read_u32(in, "slot id");
                PQTABLE_CHECK(id < n, format, "slot id out of range");
                store.push(key, id);
            }
        }
        stores.push_back(std::move(store));
    }

    std::optional<Rotation> rotation;
    if (detail::peek_magic(in, "OPQR")) {
        rotation = read_rotation(in);
        PQTABLE_CHECK(rotation->dim() == cb->dim(), format, "rotation D differs from codebook D");
    }
    auto table = MultiPQTable::from_parts(cb, tables, std::move(codes), std::move(stores));
    table.shrink_to_fit();
    return Index(std::move(cb), std::move(rotation), std::move(table));
}

Index build_opqtable(FloatView train, FloatView base, const OpqParams& params, std::size_t tables) {
    OpqResult opq = train_rotation(train, params);
    Quantizer q{std::move(opq.codebook), std::move(opq.rotation)};
    return Index::build(q, base, tables);
}

}  // namespace pqtable
