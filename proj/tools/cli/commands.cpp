#include "cli/commands.hpp"

#include "canica/crossval.hpp"
#include "canica/errors.hpp"
#include "canica/metrics.hpp"
#include "canica/model_order.hpp"
#include "canica/pipeline.hpp"
#include "canica/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <functional>
#include <optional>
#include <ostream>

namespace canica::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string data_dir;
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool no_cca = false;
    std::optional<double> threshold;
    int splits = kDefaultSplits;
    std::string spec_path;
    std::string subject_path;
    std::string maps_a;
    std::string maps_b;
};

RunConfig resolve_config(const Options& o) {
    RunConfig config = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
    if (o.seed) config.rng_seed = *o.seed;
    if (o.no_cca) config.use_cca = false;
    if (o.threshold) {
        if (!(*o.threshold >= 0.0)) throw ParameterError("--threshold must be >= 0");
        config.map_threshold = *o.threshold;
    }
    return config;
}

void require_jobs(int jobs) {
    if (jobs < 1) throw ParameterError("--jobs must be >= 1");
}

nlohmann::json subject_ids(const std::vector<SubjectDataset>& datasets) {
    auto ids = nlohmann::json::array();
    for (const auto& d : datasets) ids.push_back(d.subject_id);
    return ids;
}

nlohmann::json timings_json(const std::map<std::string, double>& timings) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [stage, ms] : timings) j[stage] = report_round(ms);
    return j;
}

int cmd_fit(const Options& o, std::ostream& out) {
    require_jobs(o.jobs);
    const RunConfig config = resolve_config(o);
    const auto datasets = load_subjects(o.data_dir);
    const PipelineResult result = run_pipeline(datasets, config, o.jobs);

    const fs::path out_dir = o.out_dir;
    fs::create_directories(out_dir);
    save_group_model(out_dir / "group_model", result.fit.group);
    save_component_maps(out_dir / "component_maps", result.fit.maps);

    nlohmann::json report;
    report["command"] = "fit";
    report["config"] = to_json(config);
    report["subjects"] = subject_ids(datasets);
    report["n_voxels"] = datasets.front().n_voxels();
    report["n_sbj"] = result.n_sbj;
    report["order"] = result.order ? to_json(*result.order) : nlohmann::json(nullptr);
    report["n_grp"] = result.fit.group.n_grp;
    report["canonical_correlations"] = report_array(result.fit.group.canonical_correlations);
    report["z_threshold"] = report_round(result.fit.group.z_threshold);
    report["used_cca"] = result.fit.group.used_cca;
    report["ica"] = summary_json(result.fit.maps);
    report["outputs"] = {{"group_model", "group_model"},
                         {"component_maps", "component_maps"},
                         {"report", "run_report.json"}};
    report["timings_ms"] = timings_json(result.timings_ms);
    report["nondeterministic_fields"] = kNondeterministicFields;
    write_json_file(out_dir / "run_report.json", report);

    out << "n_sbj=" << result.n_sbj << " n_grp=" << result.fit.group.n_grp
        << " converged=" << (result.fit.maps.converged ? "true" : "false") << '\n';
    return kExitOk;
}

int cmd_crossval(const Options& o, std::ostream& out) {
    require_jobs(o.jobs);
    const RunConfig config = resolve_config(o);
    const auto datasets = load_subjects(o.data_dir);
    std::vector<std::string> ids;
    for (const auto& d : datasets) ids.push_back(d.subject_id);

    const auto start = std::chrono::steady_clock::now();
    const SplitPlan plan = make_splits(ids, o.splits, config.rng_seed);
    const ReproducibilityReport report = run_crossval(datasets, config, plan, o.jobs);
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json j = to_json(report);
    j["command"] = "crossval";
    j["config"] = to_json(config);
    j["plan"] = to_json(plan);
    j["timings_ms"] = {{"crossval", report_round(elapsed)}};
    j["nondeterministic_fields"] = kNondeterministicFields;

    const fs::path out_dir = o.out_dir;
    fs::create_directories(out_dir);
    write_json_file(out_dir / "crossval_report.json", j);

    out << "mean_t=" << report_round(report.unthresholded.mean_t)
        << " mean_e=" << report_round(report.unthresholded.mean_e)
        << " included=" << report.n_included << '/' << plan.n_splits << '\n';
    return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
    SynthSpec spec;
    if (!o.spec_path.empty()) {
        spec = parse_synth_spec(nlohmann::json::parse(read_text_file(o.spec_path)));
    }
    if (o.seed) spec.seed = *o.seed;
    const SyntheticGroup group = generate_group(spec);
    save_synthetic_group(o.out_dir, group, spec);
    for (const auto& w : group.warnings) out << "warning: " << w << '\n';
    out << "wrote " << group.datasets.size() << " subjects to " << o.out_dir << '\n';
    return kExitOk;
}

int cmd_order(const Options& o, std::ostream& out) {
    require_jobs(o.jobs);
    RunConfig config = resolve_config(o);
    SubjectDataset subject = standardize(load_matrix(o.subject_path), fs::path(o.subject_path).stem());
    config.n_sbj.reset();
    config.order_subject = 0;
    std::optional<OrderEstimate> estimate;
    const std::vector<SubjectDataset> one{std::move(subject)};
    resolve_subject_order(one, config, &estimate, o.jobs);
    out << to_json(*estimate).dump(2) << '\n';
    return kExitOk;
}

MatrixXd load_maps(const fs::path& path, std::optional<double> threshold) {
    if (fs::is_directory(path)) {
        ComponentMaps maps = load_component_maps(path);
        if (threshold) return thresholded_values(threshold_maps(std::move(maps), *threshold));
        return maps.maps;
    }
    ComponentMaps maps;
    maps.maps = load_matrix(path);
    if (threshold) return thresholded_values(threshold_maps(std::move(maps), *threshold));
    return maps.maps;
}

int cmd_metrics(const Options& o, std::ostream& out) {
    const MatrixXd a = load_maps(o.maps_a, o.threshold);
    const MatrixXd b = load_maps(o.maps_b, o.threshold);
    const auto policy = o.threshold ? DegenerateRows::kZero : DegenerateRows::kThrow;
    out << to_json(compare_maps(a, b, policy)).dump(2) << '\n';
    return kExitOk;
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

int fail(const std::string& name, const std::string& message, int code, const Options& o,
         std::ostream& err) {
    err << "canica: " << name << ": " << one_line(message) << '\n';
    if (!o.out_dir.empty()) {
        try {
            fs::create_directories(o.out_dir);
            write_json_file(fs::path(o.out_dir) / "error_report.json",
                            {{"error", name}, {"message", message}, {"exit_code", code}});
        } catch (const std::exception&) {
            // The stderr line is the only channel left.
        }
    }
    return code;
}

}  // namespace

std::vector<SubjectDataset> load_subjects(const fs::path& data_dir) {
    if (!fs::is_directory(data_dir)) {
        throw IoError("data directory " + data_dir.string() + " does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(data_dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.starts_with("sub-") && name.ends_with(".canmat")) {
            files.push_back(entry.path());
        }
    }
    if (files.size() < 2) throw InsufficientSubjectsError("at least 2 subjects required");
    std::sort(files.begin(), files.end());

    std::optional<std::vector<std::int64_t>> mask;
    if (fs::exists(data_dir / "mask.canmat")) mask = load_mask(data_dir / "mask.canmat");

    std::vector<SubjectDataset> datasets;
    datasets.reserve(files.size());
    for (const auto& file : files) {
        SubjectDataset raw;
        raw.subject_id = file.stem().string();
        raw.data = load_matrix(file);
        if (mask) apply_mask(raw, *mask);
        SubjectDataset d = standardize(raw.data, raw.subject_id);
        d.mask_indices = raw.mask_indices;
        datasets.push_back(std::move(d));
    }
    return datasets;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-subject ICA with canonical correlation analysis", "canica"};
    app.require_subcommand(1);
    Options o;

    auto add_run_flags = [&o](CLI::App* cmd) {
        cmd->add_option("--config", o.config_path, "Run configuration JSON");
        cmd->add_option("--seed", o.seed, "Overrides rng_seed");
        cmd->add_option("--jobs", o.jobs, "Worker threads");
        cmd->add_flag("--no-cca", o.no_cca, "Fixed-effect group reduction");
        cmd->add_option("--threshold", o.threshold, "Map threshold in standard units");
    };

    auto* fit = app.add_subcommand("fit", "Fit group ICA maps");
    fit->add_option("data_dir", o.data_dir, "Directory with sub-*.canmat")->required();
    fit->add_option("--out", o.out_dir, "Output directory")->required();
    add_run_flags(fit);

    auto* crossval = app.add_subcommand("crossval", "Half-split reproducibility");
    crossval->add_option("data_dir", o.data_dir, "Directory with sub-*.canmat")->required();
    crossval->add_option("--out", o.out_dir, "Output directory")->required();
    crossval->add_option("--splits", o.splits, "Number of half-splits");
    add_run_flags(crossval);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic group");
    synth->add_option("spec", o.spec_path, "Synthetic spec JSON (defaults when omitted)");
    synth->add_option("--out", o.out_dir, "Output directory")->required();
    synth->add_option("--seed", o.seed, "Overrides the spec seed");

    auto* order = app.add_subcommand("order", "Estimate the subject-level order");
    order->add_option("subject", o.subject_path, "Subject matrix file")->required();
    order->add_option("--config", o.config_path, "Run configuration JSON");
    order->add_option("--seed", o.seed, "Overrides rng_seed");
    order->add_option("--jobs", o.jobs, "Worker threads");

    auto* metrics = app.add_subcommand("metrics", "Compare two map sets");
    metrics->add_option("maps_a", o.maps_a, "Matrix file or component_maps directory")->required();
    metrics->add_option("maps_b", o.maps_b, "Matrix file or component_maps directory")->required();
    metrics->add_option("--threshold", o.threshold, "Compare thresholded maps");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        return fail("UsageError", e.what(), kExitValidation, o, err);
    }

    std::function<int(const Options&, std::ostream&)> command;
    if (fit->parsed()) command = cmd_fit;
    else if (crossval->parsed()) command = cmd_crossval;
    else if (synth->parsed()) command = cmd_synth;
    else if (order->parsed()) command = cmd_order;
    else command = cmd_metrics;

    try {
        return command(o, out);
    } catch (const Error& e) {
        return fail(e.name(), e.what(),
                    e.kind() == ErrorKind::kNumerical ? kExitNumerical : kExitValidation, o, err);
    } catch (const fs::filesystem_error& e) {
        return fail("IoError", e.what(), kExitValidation, o, err);
    } catch (const nlohmann::json::exception& e) {
        return fail("ConfigError", e.what(), kExitValidation, o, err);
    } catch (const std::exception& e) {
        return fail("InternalError", e.what(), kExitNumerical, o, err);
    }
}

}  // namespace canica::cli
