#include <cctype>
#include <fstream>
#include <map>
#include <unordered_map>

#include "json.hpp"
#include "repsim/dataio.hpp"
#include "repsim/error.hpp"
#include "repsim/random.hpp"

namespace repsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string entry_key(const ManifestEntry& e) {
    return e.language + '\x1f' + std::string(to_string(e.modality)) + '\x1f' + e.sentence_id;
}

}  // namespace

std::string normalize_text_key(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(u)));
    }
    return out;
}

void SentenceManifest::validate() const {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (!index.emplace(entry_key(entries[i]), i).second)
            throw ValidationError("manifest lists '" + entries[i].sentence_id + "' (" + entries[i].language + ", " +
                                  std::string(to_string(entries[i].modality)) + ") twice");

    // Walk each chain; a chain longer than the manifest must revisit a node.
    for (const auto& e : entries) {
        const ManifestEntry* cur = &e;
        std::size_t steps = 0;
        while (cur->is_duplicate_of) {
            ManifestEntry probe = *cur;
            probe.sentence_id = *cur->is_duplicate_of;
            auto it = index.find(entry_key(probe));
            if (it == index.end())
                throw ValidationError("'" + cur->sentence_id + "' is marked duplicate of unknown '" +
                                      *cur->is_duplicate_of + "'");
            cur = &entries[it->second];
            if (++steps > entries.size())
                throw ValidationError("duplicate chain through '" + e.sentence_id + "' is cyclic");
        }
    }
}

SentenceManifest deduplicate(const SentenceManifest& manifest, std::uint64_t seed) {
    manifest.validate();

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) index.emplace(entry_key(manifest.entries[i]), i);

    auto root_of = [&](std::size_t i) {
        while (manifest.entries[i].is_duplicate_of) {
            ManifestEntry probe = manifest.entries[i];
            probe.sentence_id = *probe.is_duplicate_of;
            i = index.at(entry_key(probe));
        }
        return i;
    };

    // Groups are keyed by the normalized transcript of the chain root, so
    // explicit duplicate links and identical transcripts merge.
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& root = manifest.entries[root_of(i)];
        std::string key = root.language + '\x1f' + std::string(to_string(root.modality)) + '\x1f';
        const auto norm = normalize_text_key(root.text_key);
        key += norm.empty() ? "\x1e" + root.sentence_id : norm;
        groups[key].push_back(i);
    }

    std::vector<bool> keep(manifest.entries.size(), false);
    for (const auto& [key, members] : groups) {
        Rng rng(derive_seed(seed, key));
        keep[members[uniform_index(rng, members.size())]] = true;
    }

    SentenceManifest out;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        if (!keep[i]) continue;
        out.entries.push_back(manifest.entries[i]);
        out.entries.back().is_duplicate_of.reset();
    }
    return out;
}

SentenceManifest read_sentence_manifest(const fs::path& path) {
    const json j = read_json(path);
    SentenceManifest m;
    try {
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.sentence_id = e.at("sentence_id").get<std::string>();
            entry.language = e.at("language").get<std::string>();
            entry.modality = parse_modality(e.at("modality").get<std::string>());
            entry.source_uri = e.value("source_uri", std::string{});
            entry.text_key = e.value("text_key", std::string{});
            if (e.contains("is_duplicate_of") && !e["is_duplicate_of"].is_null())
                entry.is_duplicate_of = e["is_duplicate_of"].get<std::string>();
            m.entries.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    m.validate();
    return m;
}

void write_sentence_manifest(const SentenceManifest& manifest, const fs::path& path) {
    manifest.validate();
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        entries.push_back({
            {"sentence_id", e.sentence_id},
            {"language", e.language},
            {"modality", to_string(e.modality)},
            {"source_uri", e.source_uri},
            {"text_key", e.text_key},
            {"is_duplicate_of", e.is_duplicate_of ? json(*e.is_duplicate_of) : json(nullptr)},
        });
    }
    write_json({{"entries", entries}}, path);
}

std::vector<LanguageMeta> read_language_meta(const fs::path& path) {
    const json j = read_json(path);
    std::vector<LanguageMeta> out;
    try {
        const json& rows = j.is_object() ? j.at("languages") : j;
        for (const auto& r : rows) {
            LanguageMeta m;
            m.code = r.at("code").get<std::string>();
            m.name = r.value("name", m.code);
            m.script = r.value("script", std::string{});
            m.family = r.value("family", std::string{});
            m.resource_level = parse_resource_level(r.at("resource_level").get<std::string>());
            m.seamless_salmonn = r.value("seamless_salmonn", false);
            m.sonar = r.value("sonar", false);
            if (r.contains("sentences_original")) m.sentences_original = r["sentences_original"].get<int>();
            if (r.contains("sentences_deduplicated")) m.sentences_deduplicated = r["sentences_deduplicated"].get<int>();
            out.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return out;
}

void write_language_meta(const std::vector<LanguageMeta>& meta, const fs::path& path) {
    json rows = json::array();
    for (const auto& m : meta) {
        json r = {
            {"code", m.code},
            {"name", m.name},
            {"script", m.script},
            {"family", m.family},
            {"resource_level", to_string(m.resource_level)},
            {"seamless_salmonn", m.seamless_salmonn},
            {"sonar", m.sonar},
        };
        if (m.sentences_original) r["sentences_original"] = *m.sentences_original;
        if (m.sentences_deduplicated) r["sentences_deduplicated"] = *m.sentences_deduplicated;
        rows.push_back(std::move(r));
    }
    write_json({{"languages", rows}}, path);
}

}  // namespace repsim
