#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "esc/tensor.hpp"

namespace esc::membank {

/// G strategy-specific stores of pattern vectors, each a FIFO of at most
/// `capacity` rows. Storage is a ring buffer per strategy; read() returns
/// rows oldest first, which is the same window as keeping the last
/// `capacity` rows of an ever-growing concatenation.
///
/// Single writer. Concurrent read() calls are fine between writes.
class MemoryBank {
public:
    /// Throws InvalidArgument unless all arguments are >= 1.
    MemoryBank(int strategies, int capacity, int dim);

    int strategies() const { return static_cast<int>(slots_.size()); }
    int capacity() const { return capacity_; }
    int dim() const { return dim_; }

    /// Appends a detached copy of `r` as the newest row of strategy `g`,
    /// evicting the oldest row once the slot is full.
    void store(int g, const RowVector& r);

    /// Snapshot of M^g, oldest row first. Shape rows(g) x dim.
    Matrix read(int g) const;
    int rows(int g) const;
    /// Total number of store() calls ever made into `g`.
    std::size_t inserted(int g) const;

    void clear();

    static constexpr std::uint32_t kFormatVersion = 1;
    void save(std::ostream& out) const;
    static MemoryBank load(std::istream& in);

    bool operator==(const MemoryBank& other) const;

private:
    struct Slot {
        Matrix ring;             // capacity x dim
        int count = 0;           // rows in use
        int cursor = 0;          // next write position
        std::size_t inserted = 0;
    };

    const Slot& slot(int g) const;

    int capacity_;
    int dim_;
    std::vector<Slot> slots_;
};

} // namespace esc::membank
