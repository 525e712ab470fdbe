#include "lodqn/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace lodqn {

namespace {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

void putU32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + 4);
}

void putF64(std::vector<std::uint8_t>& out, double v)
{
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + 8);
}

void putBytes(std::vector<std::uint8_t>& out, const void* data, std::size_t n)
{
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
}

class Reader {
public:
    Reader(const std::filesystem::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw FormatError("cannot open " + path.string());
        bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    void expectMagic(const char* magic)
    {
        if (pos_ + 4 > bytes_.size() || std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
            throw FormatError(std::string("bad magic, expected ") + magic);
        pos_ += 4;
    }

    std::uint32_t u32()
    {
        std::uint32_t v;
        take(&v, 4);
        return v;
    }

    std::uint8_t u8()
    {
        std::uint8_t v;
        take(&v, 1);
        return v;
    }

    double f64()
    {
        double v;
        take(&v, 8);
        return v;
    }

    void raw(void* dst, std::size_t n) { take(dst, n); }

    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    void take(void* dst, std::size_t n)
    {
        if (pos_ + n > bytes_.size())
            throw FormatError("truncated file");
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

void atomicWrite(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw FormatError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw FormatError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> serializeField(const SpatialField& field)
{
    std::vector<std::uint8_t> out;
    out.reserve(12 + static_cast<std::size_t>(field.values.size()) * 8);
    putBytes(out, "LODF", 4);
    putU32(out, kFileFormatVersion);
    putU32(out, static_cast<std::uint32_t>(field.n));
    for (Eigen::Index i = 0; i < field.values.size(); ++i)
        putF64(out, field.values[i]);
    return out;
}

void writeFieldFile(const std::filesystem::path& path, const SpatialField& field)
{
    atomicWrite(path, serializeField(field));
}

SpatialField readFieldFile(const std::filesystem::path& path)
{
    Reader r(path);
    r.expectMagic("LODF");
    if (r.u32() != kFileFormatVersion)
        throw FormatError("unsupported LODF version in " + path.string());
    SpatialField f;
    f.n = static_cast<int>(r.u32());
    f.eps_cells = 1;
    f.values.resize(static_cast<Eigen::Index>(f.n) * f.n);
    for (Eigen::Index i = 0; i < f.values.size(); ++i)
        f.values[i] = r.f64();
    f.base_lo = f.minValue();
    f.base_hi = f.maxValue();
    return f;
}

void writeVectorFile(const std::filesystem::path& path, const Eigen::VectorXd& nodal,
                     int n_per_side)
{
    const Eigen::Index expected =
        static_cast<Eigen::Index>(n_per_side + 1) * (n_per_side + 1);
    if (nodal.size() != expected)
        throw FormatError("writeVectorFile: vector length does not match mesh");
    std::vector<std::uint8_t> out;
    out.reserve(12 + static_cast<std::size_t>(nodal.size()) * 8);
    putBytes(out, "LODU", 4);
    putU32(out, kFileFormatVersion);
    putU32(out, static_cast<std::uint32_t>(n_per_side));
    for (Eigen::Index i = 0; i < nodal.size(); ++i)
        putF64(out, nodal[i]);
    atomicWrite(path, out);
}

Eigen::VectorXd readVectorFile(const std::filesystem::path& path, int& n_per_side)
{
    Reader r(path);
    r.expectMagic("LODU");
    if (r.u32() != kFileFormatVersion)
        throw FormatError("unsupported LODU version in " + path.string());
    n_per_side = static_cast<int>(r.u32());
    Eigen::VectorXd v(static_cast<Eigen::Index>(n_per_side + 1) * (n_per_side + 1));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = r.f64();
    return v;
}

void writeCorrectorFile(const std::filesystem::path& path, const CorrectorSet& set,
                        const MeshPair& pair)
{
    std::vector<std::uint8_t> out;
    const std::size_t per_node = static_cast<std::size_t>(pair.fine.freeCount()) * 8;
    out.reserve(53 + per_node * set.entries.size());
    putBytes(out, "LODC", 4);
    putU32(out, kFileFormatVersion);
    putU32(out, static_cast<std::uint32_t>(set.coarse_n));
    putU32(out, static_cast<std::uint32_t>(set.fine_n));
    putU32(out, static_cast<std::uint32_t>(set.k));
    out.push_back(static_cast<std::uint8_t>(set.kind));
    putBytes(out, set.fingerprint.data(), set.fingerprint.size());
    for (std::size_t l = 0; l < set.entries.size(); ++l) {
        const Eigen::VectorXd dense = set.dense(static_cast<int>(l), pair.fine.nodeCount());
        for (int f = 0; f < pair.fine.freeCount(); ++f)
            putF64(out, dense[pair.fine.freeNodes()[f]]);
    }
    atomicWrite(path, out);
}

std::optional<CorrectorSet> readCorrectorFile(const std::filesystem::path& path,
                                              const MeshPair& pair, int k, Linearization kind,
                                              const Fingerprint& expected)
{
    try {
        Reader r(path);
        r.expectMagic("LODC");
        if (r.u32() != kFileFormatVersion)
            return std::nullopt;
        CorrectorSet set;
        set.coarse_n = static_cast<int>(r.u32());
        set.fine_n = static_cast<int>(r.u32());
        set.k = static_cast<int>(r.u32());
        set.kind = static_cast<Linearization>(r.u8());
        r.raw(set.fingerprint.data(), set.fingerprint.size());
        if (set.coarse_n != pair.coarse.n() || set.fine_n != pair.fine.n() || set.k != k ||
            set.kind != kind || set.fingerprint != expected)
            return std::nullopt;
        set.entries.resize(pair.coarse.freeCount());
        for (int l = 0; l < pair.coarse.freeCount(); ++l) {
            auto& entry = set.entries[l];
            for (int f = 0; f < pair.fine.freeCount(); ++f) {
                const double v = r.f64();
                if (v != 0.0)
                    entry.emplace_back(pair.fine.freeNodes()[f], v);
            }
        }
        if (!r.exhausted())
            return std::nullopt;
        return set;
    } catch (const FormatError&) {
        return std::nullopt;
    }
}

Fingerprint sha256(const std::vector<std::uint8_t>& bytes)
{
    Fingerprint fp{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), fp.data(), &len, EVP_sha256(), nullptr);
    return fp;
}

Fingerprint correctorFingerprint(const Eigen::VectorXd& p_star, const CombinedCoefficient& coeff)
{
    std::vector<std::uint8_t> buf;
    putBytes(buf, p_star.data(), static_cast<std::size_t>(p_star.size()) * 8);
    for (const auto& term : coeff.terms) {
        const auto field_bytes = serializeField(term.c);
        buf.insert(buf.end(), field_bytes.begin(), field_bytes.end());
        const std::string desc = term.model.descriptor();
        putBytes(buf, desc.data(), desc.size());
    }
    return sha256(buf);
}

std::string toHex(const Fingerprint& fp, std::size_t bytes)
{
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes * 2);
    for (std::size_t i = 0; i < bytes && i < fp.size(); ++i) {
        out.push_back(digits[fp[i] >> 4]);
        out.push_back(digits[fp[i] & 0xf]);
    }
    return out;
}

} // namespace lodqn
