// Speaker-embedding toolkit command line: synthesis, feature extraction,
// training, evaluation, parameter audits, and activation-map export.
#include <CLI11.hpp>
#include <iostream>

#include "svkit/harness.hpp"
#include "svkit/serialize.hpp"

namespace {

// exit codes: 0 ok, 1 usage, 2 data, 3 numeric failure
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;

std::vector<double> parse_seconds_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        out.push_back(std::stod(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speaker-embedding toolkit (ResNet / ResNeXt / Res2Net)"};
    app.require_subcommand(1);
    app.set_config("--config")->configurable(false);

    std::uint64_t seed = 1;
    std::size_t workers = 1;
    app.add_option("--seed", seed, "global random seed")->configurable(true);
    app.add_option("--workers", workers, "parallel workers for per-utterance stages");

    // synth ------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic speaker corpus");
    svkit::SyntheticSpeakerSpec synth_spec;
    std::string synth_out = "synth";
    synth->add_option("--speakers", synth_spec.num_speakers, "number of speakers");
    synth->add_option("--utterances", synth_spec.utterances_per_speaker,
                      "utterances per speaker");
    synth->add_option("--test-utterances", synth_spec.test_utterances_per_speaker,
                      "held-out utterances per speaker");
    synth->add_option("--min-seconds", synth_spec.min_seconds, "shortest utterance");
    synth->add_option("--max-seconds", synth_spec.max_seconds, "longest utterance");
    synth->add_option("--noise", synth_spec.noise_level, "additive noise level");
    synth->add_option("--out", synth_out, "output directory")->required();

    // features ----------------------------------------------------------
    auto* features = app.add_subcommand("features", "extract log-Mel features");
    svkit::FeatureExtractOptions feat_opts;
    features->add_option("--manifest", feat_opts.manifest, "wav manifest")->required();
    features->add_option("--out", feat_opts.out_dir, "output directory")->required();

    // train ---------------------------------------------------------------
    auto* train = app.add_subcommand("train", "train a speaker embedding model");
    svkit::RunConfig run;
    train->add_option("--variant", run.variant, "model variant name");
    train->add_option("--manifest", run.manifest, "feature manifest with speakers")
        ->required();
    train->add_option("--epochs", run.epochs, "training epochs");
    train->add_option("--batch-size", run.batch_size, "crops per step");
    train->add_option("--learning-rate", run.learning_rate, "initial learning rate");
    train->add_option("--momentum", run.momentum, "SGD momentum");
    train->add_option("--weight-decay", run.weight_decay, "L2 coefficient");
    train->add_option("--crop-seconds", run.crop_seconds, "crop length in seconds");
    train->add_option("--num-classes", run.num_classes,
                      "classifier width (default: speaker count)");
    train->add_option("--checkpoint", run.checkpoint_out, "checkpoint output path")
        ->required();
    train->add_option("--resume", run.resume, "checkpoint to continue from");
    train->add_option("--log", run.log_path, "per-epoch loss log file");

    // embed ---------------------------------------------------------------
    auto* embed = app.add_subcommand("embed", "extract utterance embeddings");
    svkit::EmbedOptions embed_opts;
    embed->add_option("--variant", embed_opts.variant, "model variant name");
    embed->add_option("--checkpoint", embed_opts.checkpoint, "model checkpoint");
    embed->add_option("--manifest", embed_opts.manifest, "feature manifest")->required();
    embed->add_option("--out", embed_opts.out_dir, "output directory")->required();

    // eval ----------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "score trials and report EER/minDCF");
    svkit::EvalCmdOptions eval_opts;
    std::string truncate_csv, buckets_csv;
    eval->add_option("--variant", eval_opts.variant, "model variant name");
    eval->add_option("--checkpoint", eval_opts.checkpoint, "model checkpoint");
    eval->add_option("--manifest", eval_opts.manifest, "feature manifest")->required();
    eval->add_option("--trials", eval_opts.trials, "trial list")->required();
    eval->add_option("--truncate-seconds", truncate_csv,
                     "comma list of test truncation lengths, e.g. 2,3,4");
    eval->add_option("--buckets", buckets_csv,
                     "duration boundaries for per-bucket rows, e.g. 2,4");
    eval->add_option("--p-target", eval_opts.eval.dcf.p_target, "DCF target prior");
    eval->add_option("--scores-out", eval_opts.eval.score_path, "score dump path");
    eval->add_option("--report-out", eval_opts.report_out, "report file path");

    // audit -----------------------------------------------------------------
    auto* audit = app.add_subcommand("audit", "parameter-count audit");
    std::vector<std::string> audit_names;
    std::string expected_csv;
    std::size_t audit_classes = 5994;
    audit->add_option("variants", audit_names, "variant names")->required();
    audit->add_option("--expected-params", expected_csv,
                      "comma list of expected totals in millions");
    audit->add_option("--num-classes", audit_classes, "classifier width");

    // gradcam -----------------------------------------------------------------
    auto* gradcam = app.add_subcommand("gradcam", "export a class activation map");
    svkit::GradCamOptions cam_opts;
    gradcam->add_option("--variant", cam_opts.variant, "model variant name");
    gradcam->add_option("--checkpoint", cam_opts.checkpoint, "model checkpoint");
    gradcam->add_option("--features", cam_opts.feature_path, "feature tensor file");
    gradcam->add_option("--wav", cam_opts.wav_path, "audio file to featurize");
    gradcam->add_option("--layer", cam_opts.layer, "traced layer name");
    gradcam->add_option("--target", cam_opts.target, "class index (-1: argmax)");
    gradcam->add_option("--format", cam_opts.format, "pgm | csv");
    gradcam->add_option("--out", cam_opts.out_path, "output path")->required();
    bool layer_res = false;
    gradcam->add_flag("--layer-resolution", layer_res,
                      "export at layer resolution instead of 80 x T");

    // truncate -----------------------------------------------------------------
    auto* trunc = app.add_subcommand("truncate", "truncate feature files");
    svkit::TruncateCmdOptions trunc_opts;
    trunc->add_option("--manifest", trunc_opts.manifest, "feature manifest")->required();
    trunc->add_option("--seconds", trunc_opts.seconds, "segment length")->required();
    trunc->add_option("--out", trunc_opts.out_dir, "output directory")->required();
    trunc->add_flag("--random-offset", trunc_opts.random_offset,
                    "seeded random segment start instead of utterance start");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (synth->parsed()) {
            synth_spec.seed = seed;
            svkit::SynthResult r = svkit::synthesize_dataset(synth_spec, synth_out);
            std::cout << "wavs=" << r.num_wavs << "\ntrials=" << r.num_trials
                      << "\ntrain_manifest=" << r.train_manifest
                      << "\ntest_manifest=" << r.test_manifest
                      << "\ntrial_list=" << r.trial_path << "\n";
        } else if (features->parsed()) {
            feat_opts.workers = workers;
            svkit::Manifest m = svkit::cmd_features(feat_opts);
            std::cout << "features=" << m.entries.size() << "\nmanifest=" << feat_opts.out_dir
                      << "/features.tsv\n";
        } else if (train->parsed()) {
            run.seed = seed;
            svkit::TrainResult r = svkit::run_training(run, &std::cout);
            std::cout << "checkpoint=" << r.checkpoint_path
                      << "\nfinal_loss=" << r.epochs.back().loss
                      << "\nfinal_accuracy=" << r.epochs.back().accuracy << "\n";
        } else if (embed->parsed()) {
            embed_opts.seed = seed;
            embed_opts.workers = workers;
            svkit::Manifest m = svkit::cmd_embed(embed_opts);
            std::cout << "embeddings=" << m.entries.size() << "\n";
        } else if (eval->parsed()) {
            eval_opts.seed = seed;
            eval_opts.eval.workers = workers;
            if (!truncate_csv.empty())
                eval_opts.eval.truncate_seconds = parse_seconds_list(truncate_csv);
            if (!buckets_csv.empty())
                eval_opts.eval.bucket_bounds = parse_seconds_list(buckets_csv);
            svkit::EvalReport report = svkit::cmd_eval(eval_opts);
            std::cout << report.table() << "\n" << report.key_values();
        } else if (audit->parsed()) {
            svkit::AuditOptions opts;
            opts.variants = audit_names;
            opts.num_classes = audit_classes;
            if (!expected_csv.empty()) opts.expected_millions = parse_seconds_list(expected_csv);
            svkit::AuditReport report = svkit::cmd_audit(opts);
            std::cout << report.table() << "\n" << report.key_values();
        } else if (gradcam->parsed()) {
            cam_opts.seed = seed;
            cam_opts.upsampled = !layer_res;
            svkit::ActivationMap map = svkit::cmd_gradcam(cam_opts);
            std::cout << "layer=" << map.layer << "\ntarget=" << map.target_class
                      << "\nmap_rows=" << map.rows << "\nmap_cols=" << map.cols
                      << "\npeak=" << map.peak << "\nout=" << cam_opts.out_path << "\n";
        } else if (trunc->parsed()) {
            trunc_opts.seed = seed;
            svkit::Manifest m = svkit::cmd_truncate(trunc_opts);
            std::cout << "features=" << m.entries.size() << "\nmanifest=" << trunc_opts.out_dir
                      << "/features.tsv\n";
        }
    } catch (const svkit::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumericError;
    } catch (const svkit::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    }
    return 0;
}
