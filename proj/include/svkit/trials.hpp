#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svkit/metrics.hpp"

namespace svkit {

struct Trial {
    bool target = false;
    std::string enroll_id;
    std::string test_id;
};

// Trial list file: UTF-8 lines "label enroll_id test_id", label 1 or 0.
struct TrialSet {
    std::vector<Trial> trials;

    static TrialSet load(const std::string& path);
    void save(const std::string& path) const;
};

// Manifest line: "utterance_id<TAB>path" with an optional third speaker
// column for training manifests.
struct ManifestEntry {
    std::string id;
    std::string path;
    std::string speaker;  // empty when absent
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    static Manifest load(const std::string& path);
    void save(const std::string& path) const;
    const ManifestEntry* find(const std::string& id) const;
};

// Score file line: "enroll_id test_id score" with six decimals.
void write_scores(const std::string& path, const TrialSet& trials,
                  const std::vector<double>& scores);

}  // namespace svkit
