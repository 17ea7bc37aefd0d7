#include "esc/membank.hpp"

#include <string>

#include "esc/binio.hpp"
#include "esc/error.hpp"

namespace esc::membank {

MemoryBank::MemoryBank(int strategies, int capacity, int dim) : capacity_(capacity), dim_(dim) {
    if (strategies < 1 || capacity < 1 || dim < 1)
        throw InvalidArgument("memory bank needs strategies, capacity and dim >= 1 (got " +
                              std::to_string(strategies) + ", " + std::to_string(capacity) + ", " +
                              std::to_string(dim) + ")");
    slots_.resize(static_cast<std::size_t>(strategies));
    for (auto& s : slots_) s.ring = Matrix::Zero(capacity, dim);
}

const MemoryBank::Slot& MemoryBank::slot(int g) const {
    if (g < 0 || g >= strategies())
        throw InvalidArgument("strategy index " + std::to_string(g) + " out of range [0, " +
                              std::to_string(strategies()) + ")");
    return slots_[static_cast<std::size_t>(g)];
}

void MemoryBank::store(int g, const RowVector& r) {
    slot(g);
    if (r.size() != dim_)
        throw InvalidArgument("pattern vector has dim " + std::to_string(r.size()) +
                              ", bank expects " + std::to_string(dim_));
    auto& s = slots_[static_cast<std::size_t>(g)];
    s.ring.row(s.cursor) = r;
    s.cursor = (s.cursor + 1) % capacity_;
    if (s.count < capacity_) ++s.count;
    ++s.inserted;
}

Matrix MemoryBank::read(int g) const {
    const auto& s = slot(g);
    Matrix out(s.count, dim_);
    // Oldest row sits at the cursor once the ring has wrapped.
    const int start = s.count < capacity_ ? 0 : s.cursor;
    for (int i = 0; i < s.count; ++i) out.row(i) = s.ring.row((start + i) % capacity_);
    return out;
}

int MemoryBank::rows(int g) const { return slot(g).count; }

std::size_t MemoryBank::inserted(int g) const { return slot(g).inserted; }

void MemoryBank::clear() {
    for (auto& s : slots_) {
        s.ring.setZero();
        s.count = 0;
        s.cursor = 0;
        s.inserted = 0;
    }
}

void MemoryBank::save(std::ostream& out) const {
    out.write("MEMB", 4);
    binio::write<std::uint32_t>(out, kFormatVersion);
    binio::write<std::int32_t>(out, strategies());
    binio::write<std::int32_t>(out, capacity_);
    binio::write<std::int32_t>(out, dim_);
    for (const auto& s : slots_) {
        binio::write<std::int32_t>(out, s.count);
        binio::write<std::int32_t>(out, s.cursor);
        binio::write<std::uint64_t>(out, s.inserted);
        binio::write_matrix(out, s.ring.topRows(s.count < capacity_ ? s.count : capacity_));
    }
}

MemoryBank MemoryBank::load(std::istream& in) {
    binio::expect_magic(in, "MEMB");
    const auto version = binio::read<std::uint32_t>(in);
    if (version != kFormatVersion)
        throw FormatError("unsupported memory bank version " + std::to_string(version));
    const auto g = binio::read<std::int32_t>(in);
    const auto cap = binio::read<std::int32_t>(in);
    const auto dim = binio::read<std::int32_t>(in);
    MemoryBank bank(g, cap, dim);
    for (auto& s : bank.slots_) {
        s.count = binio::read<std::int32_t>(in);
        s.cursor = binio::read<std::int32_t>(in);
        s.inserted = binio::read<std::uint64_t>(in);
        const auto rows = binio::read_matrix(in);
        if (s.count < 0 || s.count > cap || s.cursor < 0 || s.cursor >= cap ||
            rows.rows() != s.count || (s.count > 0 && rows.cols() != dim))
            throw FormatError("corrupt memory bank slot");
        if (s.count > 0) s.ring.topRows(s.count) = rows;
    }
    return bank;
}

bool MemoryBank::operator==(const MemoryBank& other) const {
    if (strategies() != other.strategies() || capacity_ != other.capacity_ || dim_ != other.dim_)
        return false;
    for (int g = 0; g < strategies(); ++g)
        if (read(g) != other.read(g)) return false;
    return true;
}

} // namespace esc::membank
