#include "svkit/trials.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace svkit {

TrialSet TrialSet::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError(msg("cannot open trial list ", path));
    TrialSet set;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string label, enroll, test;
        if (!(ss >> label >> enroll >> test) || (label != "0" && label != "1"))
            throw DataError(msg(path, ":", lineno,
                                ": expected \"label enroll_id test_id\" with label 0|1"));
        set.trials.push_back({label == "1", enroll, test});
    }
    return set;
}

void TrialSet::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError(msg("cannot write ", path));
    for (const Trial& t : trials)
        os << (t.target ? '1' : '0') << ' ' << t.enroll_id << ' ' << t.test_id << '\n';
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError(msg("cannot open manifest ", path));
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        ManifestEntry e;
        std::istringstream ss(line);
        if (!std::getline(ss, e.id, '\t') || !std::getline(ss, e.path, '\t') || e.id.empty() ||
            e.path.empty())
            throw DataError(
                msg(path, ":", lineno, ": expected \"utterance_id<TAB>path\" line"));
        std::getline(ss, e.speaker, '\t');
        m.entries.push_back(std::move(e));
    }
    return m;
}

void Manifest::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError(msg("cannot write ", path));
    for (const ManifestEntry& e : entries) {
        os << e.id << '\t' << e.path;
        if (!e.speaker.empty()) os << '\t' << e.speaker;
        os << '\n';
    }
}

const ManifestEntry* Manifest::find(const std::string& id) const {
    for (const auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

void write_scores(const std::string& path, const TrialSet& trials,
                  const std::vector<double>& scores) {
    if (trials.trials.size() != scores.size())
        throw std::invalid_argument("write_scores: size mismatch");
    std::ofstream os(path);
    if (!os) throw DataError(msg("cannot write ", path));
    char buf[64];
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f", scores[i]);
        os << trials.trials[i].enroll_id << ' ' << trials.trials[i].test_id << ' ' << buf
           << '\n';
    }
}

}  // namespace svkit
