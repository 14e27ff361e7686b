#include "repsim/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <unordered_set>

#include "json.hpp"
#include "repsim/error.hpp"
#include "repsim/version.hpp"

namespace repsim {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Modality m) noexcept {
    return m == Modality::text ? "text" : "speech";
}

Modality parse_modality(std::string_view s) {
    if (s == "text") return Modality::text;
    if (s == "speech") return Modality::speech;
    throw ValidationError("unknown modality '" + std::string(s) + "'");
}

std::string_view to_string(ResourceLevel r) noexcept {
    switch (r) {
        case ResourceLevel::high: return "high";
        case ResourceLevel::medium: return "medium";
        case ResourceLevel::low: return "low";
    }
    return "?";
}

ResourceLevel parse_resource_level(std::string_view s) {
    if (s == "high") return ResourceLevel::high;
    if (s == "medium") return ResourceLevel::medium;
    if (s == "low") return ResourceLevel::low;
    throw ValidationError("unknown resource level '" + std::string(s) + "'");
}

std::string describe(const CellDescriptor& d) {
    return d.language + "/" + std::string(to_string(d.modality)) + "/" + d.layer_tag;
}

void ActivationSet::validate() const {
    if (feature_dim == 0) throw ValidationError("feature_dim must be positive");
    std::unordered_set<std::string_view> seen;
    seen.reserve(sentences.size());
    for (const auto& s : sentences) {
        if (!seen.insert(s.id).second) throw ValidationError("duplicate sentence id '" + s.id + "'");
        if (s.frames.rows() < 1) throw ValidationError("sentence '" + s.id + "' has no frames");
        if (s.frames.cols() != static_cast<Eigen::Index>(feature_dim))
            throw ValidationError("sentence '" + s.id + "' has " + std::to_string(s.frames.cols()) +
                                  " features, expected " + std::to_string(feature_dim));
        if (!s.frames.allFinite()) throw ValidationError("sentence '" + s.id + "' has non-finite values");
    }
}

std::vector<std::string> io_warnings(const ActivationSet& set) {
    std::vector<std::string> out;
    if (set.sentences.size() < 2)
        out.push_back("only " + std::to_string(set.sentences.size()) +
                      " sentence(s): covariance is undefined, the set cannot be analyzed");
    return out;
}

void PooledMatrix::validate(Eigen::Index min_points) const {
    if (static_cast<std::size_t>(features.cols()) != sentence_ids.size())
        throw ValidationError("pooled matrix has " + std::to_string(features.cols()) + " columns but " +
                              std::to_string(sentence_ids.size()) + " sentence ids");
    if (features.cols() < min_points)
        throw InsufficientDataError(describe(descriptor) + ": " + std::to_string(features.cols()) +
                                    " data point(s), need at least " + std::to_string(min_points));
    if (!features.allFinite()) throw ValidationError(describe(descriptor) + ": non-finite entries");
}

// ---------------------------------------------------------------------------
// ACTV

namespace {

constexpr std::uint8_t kMagic[4] = {0x41, 0x43, 0x54, 0x56};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n)
            throw CorruptionError("truncated ACTV payload at byte " + std::to_string(pos_));
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_activation_set(const ActivationSet& set) {
    set.validate();
    if (set.sentences.empty()) throw ValidationError("refusing to write an ACTV file with zero sentences");

    Writer w;
    for (auto b : kMagic) w.u8(b);
    w.u32(kActvVersion);
    w.u8(kDtypeFloat32);
    w.u8(0);
    w.u32(set.feature_dim);
    w.u32(static_cast<std::uint32_t>(set.sentences.size()));
    for (const auto& s : set.sentences) {
        w.u32(static_cast<std::uint32_t>(s.id.size()));
        w.bytes(s.id);
        w.u32(static_cast<std::uint32_t>(s.frames.rows()));
        const float* p = s.frames.data();
        for (Eigen::Index i = 0; i < s.frames.size(); ++i) w.f32(p[i]);
    }
    return w.take();
}

ActivationSet decode_activation_set(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw FormatError("not an ACTV file (bad magic)");
    Reader r(bytes.subspan(4));
    const auto version = r.u32();
    if (version != kActvVersion) throw FormatError("unsupported ACTV version " + std::to_string(version));
    const auto dtype = r.u8();
    if (dtype != kDtypeFloat32) throw FormatError("unsupported ACTV dtype code " + std::to_string(dtype));
    if (r.u8() != 0) throw FormatError("reserved ACTV header byte is not zero");

    ActivationSet set;
    set.feature_dim = r.u32();
    const auto count = r.u32();
    if (set.feature_dim == 0) throw FormatError("ACTV header declares F = 0");

    // Every record needs at least 8 bytes; reject absurd counts before reserving.
    if (static_cast<std::uint64_t>(count) * 8 > r.remaining())
        throw CorruptionError("ACTV header declares " + std::to_string(count) +
                              " sentences but the payload is too short");
    set.sentences.reserve(count);
    for (std::uint32_t j = 0; j < count; ++j) {
        SentenceSequence s;
        s.id = r.str(r.u32());
        const auto frames = r.u32();
        const std::uint64_t values = static_cast<std::uint64_t>(frames) * set.feature_dim;
        if (values * 4 > r.remaining())
            throw CorruptionError("truncated ACTV payload in sentence " + std::to_string(j) + " ('" + s.id + "')");
        s.frames.resize(frames, set.feature_dim);
        float* p = s.frames.data();
        for (std::uint64_t i = 0; i < values; ++i) p[i] = r.f32();
        set.sentences.push_back(std::move(s));
    }
    if (r.remaining() != 0)
        throw CorruptionError(std::to_string(r.remaining()) + " trailing bytes after the last ACTV record");
    set.validate();
    return set;
}

fs::path sidecar_path(const fs::path& actv_path) {
    auto p = actv_path;
    p += ".json";
    return p;
}

ActivationSet read_activation_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ActivationSet set = decode_activation_set(bytes);

    const auto side = sidecar_path(path);
    if (fs::exists(side)) {
        std::ifstream js(side);
        json j;
        try {
            j = json::parse(js);
            set.descriptor.model_id = j.at("model_id").get<std::string>();
            set.descriptor.layer_tag = j.at("layer_tag").get<std::string>();
            set.descriptor.language = j.at("language").get<std::string>();
            set.descriptor.modality = parse_modality(j.at("modality").get<std::string>());
        } catch (const json::exception& e) {
            throw FormatError("bad sidecar " + side.string() + ": " + e.what());
        }
        if (j.contains("sentence_count") && j["sentence_count"].get<std::size_t>() != set.sentences.size())
            throw CorruptionError("sidecar " + side.string() + " declares " +
                                  std::to_string(j["sentence_count"].get<std::size_t>()) + " sentences, file has " +
                                  std::to_string(set.sentences.size()));
    }
    return set;
}

void write_activation_file(const ActivationSet& set, const fs::path& path) {
    const auto bytes = encode_activation_set(set);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + path.string());
    }
    json j = {
        {"model_id", set.descriptor.model_id},
        {"layer_tag", set.descriptor.layer_tag},
        {"language", set.descriptor.language},
        {"modality", to_string(set.descriptor.modality)},
        {"sentence_count", set.sentences.size()},
        {"created_by", std::string("repsim ") + kVersion},
    };
    std::ofstream side(sidecar_path(path), std::ios::trunc);
    if (!side) throw IoError("cannot write " + sidecar_path(path).string());
    side << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Pooling and alignment

PooledMatrix meanpool(const ActivationSet& set) {
    set.validate();
    if (set.sentences.empty()) throw InsufficientDataError(describe(set.descriptor) + ": nothing to pool");
    PooledMatrix out;
    out.descriptor = set.descriptor;
    out.features.resize(set.feature_dim, static_cast<Eigen::Index>(set.sentences.size()));
    out.sentence_ids.reserve(set.sentences.size());
    for (std::size_t j = 0; j < set.sentences.size(); ++j) {
        const auto& s = set.sentences[j];
        out.features.col(static_cast<Eigen::Index>(j)) =
            s.frames.cast<double>().colwise().sum().transpose() / static_cast<double>(s.frames.rows());
        out.sentence_ids.push_back(s.id);
    }
    return out;
}

ActivationSet as_activation_set(const PooledMatrix& pooled) {
    ActivationSet set;
    set.descriptor = pooled.descriptor;
    set.feature_dim = static_cast<std::uint32_t>(pooled.feature_dim());
    set.sentences.reserve(pooled.sentence_ids.size());
    for (Eigen::Index j = 0; j < pooled.points(); ++j)
        set.sentences.push_back({pooled.sentence_ids[j], pooled.features.col(j).transpose().cast<float>()});
    return set;
}

std::pair<PooledMatrix, PooledMatrix> align_pair(const PooledMatrix& a, const PooledMatrix& b,
                                                 std::optional<std::size_t> cap) {
    std::map<std::string_view, Eigen::Index> in_b;
    for (std::size_t j = 0; j < b.sentence_ids.size(); ++j) in_b.emplace(b.sentence_ids[j], j);

    std::map<std::string_view, std::pair<Eigen::Index, Eigen::Index>> shared;
    for (std::size_t j = 0; j < a.sentence_ids.size(); ++j)
        if (auto it = in_b.find(a.sentence_ids[j]); it != in_b.end())
            shared.emplace(a.sentence_ids[j], std::pair{static_cast<Eigen::Index>(j), it->second});

    if (shared.size() < 2)
        throw InsufficientDataError(describe(a.descriptor) + " and " + describe(b.descriptor) + " share " +
                                    std::to_string(shared.size()) + " sentence id(s), need at least 2");

    const std::size_t keep = cap ? std::min(*cap, shared.size()) : shared.size();
    if (keep < 2) throw InsufficientDataError("alignment cap " + std::to_string(keep) + " leaves fewer than 2 points");

    auto make = [keep](const PooledMatrix& src) {
        PooledMatrix out;
        out.descriptor = src.descriptor;
        out.features.resize(src.feature_dim(), static_cast<Eigen::Index>(keep));
        out.sentence_ids.reserve(keep);
        return out;
    };
    PooledMatrix ra = make(a), rb = make(b);
    Eigen::Index col = 0;
    for (const auto& [id, idx] : shared) {
        if (static_cast<std::size_t>(col) == keep) break;
        ra.features.col(col) = a.features.col(idx.first);
        rb.features.col(col) = b.features.col(idx.second);
        ra.sentence_ids.emplace_back(id);
        rb.sentence_ids.emplace_back(id);
        ++col;
    }
    return {std::move(ra), std::move(rb)};
}

}  // namespace repsim
