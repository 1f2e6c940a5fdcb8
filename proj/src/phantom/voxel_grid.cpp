#include "spv/phantom/voxel_grid.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

namespace spv::phantom {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'V', 'G'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "grid IO assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw GridFormatError("truncated grid file " + path.string());
    return v;
}

}  // namespace

VoxelGrid::VoxelGrid(Dims dims, Spacing spacing_mm) : dims_(dims), spacing_(spacing_mm) {
    for (double s : spacing_)
        if (!(s > 0.0)) throw std::invalid_argument("voxel spacing must be positive");
    voxels_.assign(dims_[0] * dims_[1] * dims_[2], 0);
}

bool VoxelGrid::in_bounds(long x, long y, long z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < static_cast<long>(dims_[0]) && y < static_cast<long>(dims_[1]) &&
           z < static_cast<long>(dims_[2]);
}

std::size_t VoxelGrid::count() const {
    return static_cast<std::size_t>(std::count(voxels_.begin(), voxels_.end(), std::uint8_t{1}));
}

BoundingBox bounding_box(const VoxelGrid& grid) {
    BoundingBox box{{grid.dims()[0], grid.dims()[1], grid.dims()[2]}, {0, 0, 0}};
    bool any = false;
    const auto& d = grid.dims();
    for (std::size_t x = 0; x < d[0]; ++x)
        for (std::size_t y = 0; y < d[1]; ++y) {
            const std::uint8_t* row = grid.voxels().data() + grid.index(x, y, 0);
            for (std::size_t z = 0; z < d[2]; ++z) {
                if (!row[z]) continue;
                any = true;
                const std::array<std::size_t, 3> p{x, y, z};
                for (int a = 0; a < 3; ++a) {
                    box.lo[a] = std::min(box.lo[a], p[a]);
                    box.hi[a] = std::max(box.hi[a], p[a]);
                }
            }
        }
    if (!any) throw std::invalid_argument("bounding_box: grid is empty");
    return box;
}

double voxel_volume(const VoxelGrid& grid) {
    const auto& s = grid.spacing();
    return static_cast<double>(grid.count()) * s[0] * s[1] * s[2] / 1000.0;
}

void write_grid(const std::filesystem::path& path, const VoxelGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(kMagic, 4);
    put<std::uint16_t>(out, kVersion);
    for (auto d : grid.dims()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (auto s : grid.spacing()) put<float>(out, static_cast<float>(s));
    std::vector<std::uint8_t> packed((grid.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid.voxels()[i]) packed[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    out.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

VoxelGrid read_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw GridFormatError("bad magic in " + path.string());
    const auto version = get<std::uint16_t>(in, path);
    if (version != kVersion) throw GridFormatError("unsupported grid version " + std::to_string(version));
    Dims dims{};
    Spacing spacing{};
    for (auto& d : dims) d = get<std::uint32_t>(in, path);
    for (auto& s : spacing) s = get<float>(in, path);
    VoxelGrid grid(dims, spacing);
    std::vector<std::uint8_t> packed((grid.size() + 7) / 8);
    if (!in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()))) {
        throw GridFormatError("truncated occupancy in " + path.string());
    }
    for (std::size_t i = 0; i < grid.size(); ++i) grid.voxels()[i] = (packed[i / 8] >> (7 - i % 8)) & 1u;
    return grid;
}

}  // namespace spv::phantom
