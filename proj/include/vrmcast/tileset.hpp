#ifndef VRMCAST_TILESET_HPP
#define VRMCAST_TILESET_HPP

#include <bitset>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace vrmcast {

inline constexpr int kMaxTiles = 512;

/// Fixed-length bit vector over the tile grid of one video frame.
class TileSet {
public:
    TileSet() = default;
    explicit TileSet(int size) : size_(size) {
        if (size < 0 || size > kMaxTiles)
            throw std::invalid_argument("TileSet size out of range");
    }

    int size() const { return size_; }
    int count() const { return static_cast<int>(bits_.count()); }
    bool empty() const { return bits_.none(); }

    bool contains(int tile) const { return bits_.test(static_cast<std::size_t>(tile)); }
    void insert(int tile) { check(tile); bits_.set(static_cast<std::size_t>(tile)); }
    void erase(int tile) { check(tile); bits_.reset(static_cast<std::size_t>(tile)); }

    TileSet& operator|=(const TileSet& o) { bits_ |= o.bits_; return *this; }
    TileSet& operator&=(const TileSet& o) { bits_ &= o.bits_; return *this; }
    /// Set difference (this \ o).
    TileSet& operator-=(const TileSet& o) { bits_ &= ~o.bits_; return *this; }

    friend TileSet operator|(TileSet a, const TileSet& b) { return a |= b; }
    friend TileSet operator&(TileSet a, const TileSet& b) { return a &= b; }
    friend TileSet operator-(TileSet a, const TileSet& b) { return a -= b; }
    friend bool operator==(const TileSet& a, const TileSet& b) {
        return a.size_ == b.size_ && a.bits_ == b.bits_;
    }

    bool is_subset_of(const TileSet& o) const { return (bits_ & ~o.bits_).none(); }

    std::vector<int> tiles() const {
        std::vector<int> out;
        out.reserve(bits_.count());
        for (int i = 0; i < size_; ++i)
            if (bits_.test(static_cast<std::size_t>(i))) out.push_back(i);
        return out;
    }

    static TileSet full(int size) {
        TileSet t(size);
        for (int i = 0; i < size; ++i) t.bits_.set(static_cast<std::size_t>(i));
        return t;
    }

private:
    void check(int tile) const {
        if (tile < 0 || tile >= size_) throw std::out_of_range("tile index out of range");
    }

    std::bitset<kMaxTiles> bits_;
    int size_ = 0;
};

/// |A ∩ B| / |A ∪ B|, with two empty sets counting as identical.
inline double jaccard(const TileSet& a, const TileSet& b) {
    if (a.size() != b.size()) throw std::invalid_argument("jaccard: tile grids differ");
    const int uni = (a | b).count();
    if (uni == 0) return 1.0;
    return static_cast<double>((a & b).count()) / static_cast<double>(uni);
}

}  // namespace vrmcast

#endif  // VRMCAST_TILESET_HPP
