#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofbench/errors.hpp"

namespace spoofbench {

struct SampleRecord {
    std::string path;
    bool is_fake = false;
    std::string individual_id;
    std::string attack_type;  // empty for real samples
    std::string split;        // train | test | dev
    std::string group_id;     // fusion unit (video, acquisition); unique for singletons
};

struct BenchmarkManifest {
    std::vector<SampleRecord> records;

    std::vector<SampleRecord> split(const std::string& name) const {
        std::vector<SampleRecord> out;
        for (const auto& r : records)
            if (r.split == name) out.push_back(r);
        return out;
    }

    bool has_split(const std::string& name) const {
        for (const auto& r : records)
            if (r.split == name) return true;
        return false;
    }
};

// Integrity rules: at least one sample, unique paths, group members sharing
// label and individual, known split names.
inline void check_manifest(const BenchmarkManifest& m) {
    if (m.records.empty()) throw ManifestError("manifest: no samples");
    std::set<std::string> paths;
    std::map<std::string, const SampleRecord*> group_rep;
    for (const auto& r : m.records) {
        if (!paths.insert(r.path).second)
            throw ManifestError("manifest: duplicate path " + r.path);
        if (r.split != "train" && r.split != "test" && r.split != "dev")
            throw ManifestError("manifest: unknown split '" + r.split + "' for " + r.path);
        if (r.individual_id.empty())
            throw ManifestError("manifest: missing individual_id for " + r.path);
        auto [it, inserted] = group_rep.emplace(r.group_id, &r);
        if (!inserted) {
            if (it->second->is_fake != r.is_fake)
                throw ManifestError("manifest: group " + r.group_id + " mixes labels");
            if (it->second->individual_id != r.individual_id)
                throw ManifestError("manifest: group " + r.group_id + " mixes individuals");
        }
    }
}

inline BenchmarkManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    BenchmarkManifest m;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            SampleRecord r;
            r.path = j.at("path").get<std::string>();
            const std::string label = j.at("label").get<std::string>();
            if (label != "real" && label != "fake")
                throw ParseError("label must be 'real' or 'fake'");
            r.is_fake = label == "fake";
            r.individual_id = j.at("individual_id").get<std::string>();
            r.attack_type = j.value("attack_type", std::string());
            r.split = j.at("split").get<std::string>();
            r.group_id = j.value("group_id", r.path);
            m.records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    check_manifest(m);
    return m;
}

inline void save_manifest(const BenchmarkManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    for (const auto& r : m.records) {
        nlohmann::ordered_json j;
        j["path"] = r.path;
        j["label"] = r.is_fake ? "fake" : "real";
        j["individual_id"] = r.individual_id;
        j["attack_type"] = r.attack_type;
        j["split"] = r.split;
        j["group_id"] = r.group_id;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace spoofbench
