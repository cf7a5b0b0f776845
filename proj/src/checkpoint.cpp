#include "mppn/checkpoint.hpp"

#include "mppn/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mppn {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'P', 'P', 'N'};
// Guards against absurd allocations from corrupted length fields.
constexpr std::uint64_t kMaxBlob = std::uint64_t{1} << 32;

template <typename U>
void put_le(std::ostream& out, U v)
{
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, sizeof(U));
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void bytes(char* dst, std::size_t n, const char* what)
    {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError("checkpoint: truncated " + std::string(what) + " at byte offset " +
                              std::to_string(offset_ + static_cast<std::uint64_t>(in_.gcount())));
        }
        offset_ += n;
    }

    template <typename U>
    U le(const char* what)
    {
        unsigned char b[sizeof(U)];
        bytes(reinterpret_cast<char*>(b), sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
        return v;
    }

    [[noreturn]] void fail(const std::string& msg, std::uint64_t at) const
    {
        throw FormatError("checkpoint: " + msg + " at byte offset " + std::to_string(at));
    }

    std::uint64_t offset() const { return offset_; }

private:
    std::istream& in_;
    std::uint64_t offset_ = 0;
};

} // namespace

const Tensor& Checkpoint::find(const std::string& name) const
{
    for (const auto& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw FormatError("checkpoint: missing tensor '" + name + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt)
{
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kCheckpointVersion);
    const std::string text = ckpt.config.to_text();
    put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put_le<std::uint64_t>(out, ckpt.tensors.size());
    for (const auto& [name, value] : ckpt.tensors) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(value.rank()));
        for (Index d : value.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
        for (Index i = 0; i < value.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(value.data()[i]));
    }
    if (!out) throw RuntimeFailure("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in)
{
    Reader r(in);
    std::array<char, 4> magic{};
    r.bytes(magic.data(), magic.size(), "magic");
    if (magic != kMagic) r.fail("bad magic (not an MPPN checkpoint)", 0);
    const std::uint64_t version_at = r.offset();
    const auto version = r.le<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        r.fail("unsupported version " + std::to_string(version) + " (expected " +
                   std::to_string(kCheckpointVersion) + ")",
               version_at);
    }

    const std::uint64_t len_at = r.offset();
    const auto text_len = r.le<std::uint64_t>("config length");
    if (text_len > kMaxBlob) r.fail("implausible config length", len_at);
    std::string text(text_len, '\0');
    const std::uint64_t text_at = r.offset();
    r.bytes(text.data(), text.size(), "config text");

    Checkpoint ckpt;
    try {
        ckpt.config = RunConfig::from_text(text);
    } catch (const ConfigError& e) {
        r.fail(std::string("bad config blob: ") + e.what(), text_at);
    }

    const auto count = r.le<std::uint64_t>("tensor count");
    for (std::uint64_t t = 0; t < count; ++t) {
        const std::uint64_t entry_at = r.offset();
        const auto name_len = r.le<std::uint32_t>("tensor name length");
        std::string name(name_len, '\0');
        r.bytes(name.data(), name.size(), "tensor name");
        const auto rank = r.le<std::uint32_t>("tensor rank");
        if (rank > 8) r.fail("implausible rank " + std::to_string(rank) + " for '" + name + "'", entry_at);
        Shape shape;
        std::uint64_t total = 1;
        for (std::uint32_t a = 0; a < rank; ++a) {
            const std::uint64_t dim_at = r.offset();
            const auto d = r.le<std::uint64_t>("tensor dims");
            if (d == 0 || d > kMaxBlob || total * d > kMaxBlob) r.fail("bad extent for '" + name + "'", dim_at);
            total *= d;
            shape.push_back(static_cast<Index>(d));
        }
        Eigen::ArrayXd values(static_cast<Index>(total));
        for (Index i = 0; i < values.size(); ++i) values[i] = std::bit_cast<double>(r.le<std::uint64_t>("tensor payload"));
        ckpt.tensors.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
    }
    if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after tensor table", r.offset());
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write checkpoint " + path.string());
    write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

} // namespace mppn
