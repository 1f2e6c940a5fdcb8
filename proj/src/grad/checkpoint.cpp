#include "spv/grad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace spv::grad {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void read_doubles(double* dst, std::size_t n) {
        need(n * sizeof(double));
        std::memcpy(dst, bytes_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

constexpr std::uint8_t kDtypeF64 = 1;

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::set<std::string> seen;
    std::string out = "SPVW";
    put<std::uint16_t>(out, kCheckpointVersion);
    put_string(out, ckpt.kind);
    put_string(out, ckpt.metadata.dump());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        if (!seen.insert(t.name).second) throw CheckpointError("duplicate tensor name " + t.name);
        put_string(out, t.name);
        put<std::uint8_t>(out, kDtypeF64);
        put<std::uint8_t>(out, static_cast<std::uint8_t>(t.tensor.shape().size()));
        for (std::size_t d : t.tensor.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        out.append(reinterpret_cast<const char*>(t.tensor.ptr()), t.tensor.numel() * sizeof(double));
    }
    return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "SPVW") != 0) throw CheckpointError("not an SPVW checkpoint");
    const std::string body = bytes.substr(4);
    Reader r(body);
    const auto version = r.get<std::uint16_t>();
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.kind = r.get_string();
    try {
        ckpt.metadata = nlohmann::ordered_json::parse(r.get_string());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
    }
    const auto count = r.get<std::uint32_t>();
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = r.get_string();
        if (!seen.insert(t.name).second) throw CheckpointError("duplicate tensor name " + t.name);
        if (r.get<std::uint8_t>() != kDtypeF64) throw CheckpointError("unsupported dtype for " + t.name);
        Shape shape(r.get<std::uint8_t>());
        for (auto& d : shape) d = r.get<std::uint32_t>();
        t.tensor = Tensor(shape);
        r.read_doubles(t.tensor.ptr(), t.tensor.numel());
        ckpt.tensors.push_back(std::move(t));
    }
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint tensors");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint(ss.str());
}

}  // namespace spv::grad
