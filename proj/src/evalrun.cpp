#include "svkit/evalrun.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "svkit/serialize.hpp"

namespace svkit {

namespace {

std::string seconds_label(double s) {
    char buf[32];
    if (s == static_cast<long long>(s))
        std::snprintf(buf, sizeof(buf), "%llds", static_cast<long long>(s));
    else
        std::snprintf(buf, sizeof(buf), "%gs", s);
    return buf;
}

std::vector<float> embed(SpeakerModel& model, const FeatureMatrix& f) {
    Tensor e = model.forward_embedding(f.to_tensor(), false);
    for (float v : e.data())
        if (!std::isfinite(v)) throw NumericError("embedding contains NaN/Inf");
    return {e.data().begin(), e.data().end()};
}

// runs fn(i) for i in [0, n) over `workers` threads; items are independent
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    const std::size_t count = std::min(workers, n);
    for (std::size_t t = 0; t < count; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += count) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

ScoreSet score_condition(const TrialSet& trials,
                         const std::map<std::string, std::vector<float>>& enroll,
                         const std::map<std::string, std::vector<float>>& test,
                         std::vector<double>* raw = nullptr) {
    ScoreSet scores;
    scores.reserve(trials.trials.size());
    for (const Trial& t : trials.trials) {
        const double s = cosine_score(enroll.at(t.enroll_id), test.at(t.test_id));
        scores.push_back({t.target, s});
        if (raw != nullptr) raw->push_back(s);
    }
    return scores;
}

EvalRow make_row(const std::string& label, const ScoreSet& scores, const DcfParams& dcf) {
    EvalRow row;
    row.label = label;
    const EerResult eer = compute_eer(scores);
    const DcfResult mdcf = compute_min_dcf(scores, dcf);
    row.eer = eer.eer;
    row.eer_threshold = eer.threshold;
    row.min_dcf = mdcf.min_dcf;
    row.dcf_threshold = mdcf.threshold;
    for (const auto& s : scores) (s.target ? row.targets : row.nontargets)++;
    return row;
}

}  // namespace

const EvalRow* EvalReport::find(const std::string& label) const {
    for (const auto& r : rows)
        if (r.label == label) return &r;
    return nullptr;
}

std::string EvalReport::table() const {
    std::string out = "condition       EER%     minDCF   #tgt   #non\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-12s %7.3f %10.4f %6zu %6zu\n", r.label.c_str(),
                      100.0 * r.eer, r.min_dcf, r.targets, r.nontargets);
        out += buf;
    }
    return out;
}

std::string EvalReport::key_values() const {
    std::string out;
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "eer_%s=%.6f\nmindcf_%s=%.6f\n", r.label.c_str(),
                      r.eer, r.label.c_str(), r.min_dcf);
        out += buf;
    }
    return out;
}

EvalReport evaluate_trials(SpeakerModel& model, const TrialSet& trials,
                           const Manifest& features, const EvalOptions& options) {
    // resolve every id referenced by a trial
    std::set<std::string> enroll_ids, test_ids;
    for (const Trial& t : trials.trials) {
        enroll_ids.insert(t.enroll_id);
        test_ids.insert(t.test_id);
    }
    std::set<std::string> all_ids = enroll_ids;
    all_ids.insert(test_ids.begin(), test_ids.end());
    std::map<std::string, FeatureMatrix> feats;
    for (const std::string& id : all_ids) {
        const ManifestEntry* entry = features.find(id);
        if (entry == nullptr)
            throw DataError(msg("trial references utterance \"", id,
                                "\" which is not in the feature manifest"));
        feats.emplace(id, FeatureMatrix::from_tensor(read_tensor(entry->path)));
    }

    // full-length embeddings, shared by the enroll side and the regular rows
    std::vector<std::string> id_list(all_ids.begin(), all_ids.end());
    std::vector<std::vector<float>> full_embeddings(id_list.size());
    parallel_for(id_list.size(), options.workers, [&](std::size_t i) {
        full_embeddings[i] = embed(model, mean_normalize(feats.at(id_list[i])));
    });
    std::map<std::string, std::vector<float>> full;
    for (std::size_t i = 0; i < id_list.size(); ++i)
        full.emplace(id_list[i], std::move(full_embeddings[i]));

    EvalReport report;
    std::vector<double> raw_scores;
    ScoreSet regular = score_condition(trials, full, full,
                                       options.score_path.empty() ? nullptr : &raw_scores);
    report.rows.push_back(make_row("regular", regular, options.dcf));
    if (!options.score_path.empty()) write_scores(options.score_path, trials, raw_scores);

    // truncated conditions keep the trial pairs and shorten only the test side
    for (double seconds : options.truncate_seconds) {
        std::vector<std::string> tlist(test_ids.begin(), test_ids.end());
        std::vector<std::vector<float>> truncated(tlist.size());
        parallel_for(tlist.size(), options.workers, [&](std::size_t i) {
            TruncateResult cut = truncate(feats.at(tlist[i]), seconds);
            truncated[i] = embed(model, cut.features);
        });
        std::map<std::string, std::vector<float>> test_embeddings;
        for (std::size_t i = 0; i < tlist.size(); ++i)
            test_embeddings.emplace(tlist[i], std::move(truncated[i]));
        report.rows.push_back(make_row(seconds_label(seconds),
                                       score_condition(trials, full, test_embeddings),
                                       options.dcf));
    }

    // duration buckets over the regular condition, keyed by test utterance
    if (!options.bucket_bounds.empty()) {
        std::vector<double> bounds = options.bucket_bounds;
        std::sort(bounds.begin(), bounds.end());
        auto bucket_of = [&](double sec) {
            std::size_t b = 0;
            while (b < bounds.size() && sec >= bounds[b]) ++b;
            return b;
        };
        auto bucket_label = [&](std::size_t b) {
            if (b == 0) return msg("<", bounds.front(), "s");
            if (b == bounds.size()) return msg(">", bounds.back(), "s");
            return msg(bounds[b - 1], "-", bounds[b], "s");
        };
        std::vector<ScoreSet> bucket_scores(bounds.size() + 1);
        for (std::size_t i = 0; i < trials.trials.size(); ++i) {
            const double sec = feats.at(trials.trials[i].test_id).seconds();
            bucket_scores[bucket_of(sec)].push_back(regular[i]);
        }
        for (std::size_t b = 0; b < bucket_scores.size(); ++b) {
            std::size_t tgt = 0, non = 0;
            for (const auto& s : bucket_scores[b]) (s.target ? tgt : non)++;
            if (tgt == 0 || non == 0) continue;  // bucket lacks both classes
            report.rows.push_back(make_row(bucket_label(b), bucket_scores[b], options.dcf));
        }
    }
    return report;
}

}  // namespace svkit
