#include "canica/crossval.hpp"

#include "canica/errors.hpp"
#include "canica/parallel.hpp"
#include "canica/pipeline.hpp"
#include "canica/rng.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <set>

namespace canica {

namespace {

constexpr int kMaxSplitAttempts = 1000000;

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

MetricSummary summary_of(const std::vector<double>& e, const std::vector<double>& t) {
    return {mean_of(e), sd_of(e), mean_of(t), sd_of(t)};
}

nlohmann::json to_json(const MetricSummary& m) {
    return {{"mean_e", report_round(m.mean_e)},
            {"sd_e", report_round(m.sd_e)},
            {"mean_t", report_round(m.mean_t)},
            {"sd_t", report_round(m.sd_t)}};
}

}  // namespace

std::uint64_t count_half_partitions(std::size_t n_subjects) {
    const auto n = static_cast<std::uint64_t>(n_subjects);
    const std::uint64_t all = binomial(n, n / 2);
    return n % 2 == 0 ? all / 2 : all;
}

SplitPlan make_splits(std::span<const std::string> subject_ids, int n_splits, std::uint64_t seed) {
    const std::size_t n = subject_ids.size();
    if (n < 4) {
        throw InsufficientSubjectsError("half-split cross-validation needs at least 4 subjects, got " +
                                        std::to_string(n));
    }
    if (n_splits < 1) throw ParameterError("n_splits must be positive");
    if (std::set<std::string>(subject_ids.begin(), subject_ids.end()).size() != n) {
        throw ParameterError("subject ids must be unique");
    }
    const std::uint64_t available = count_half_partitions(n);
    if (static_cast<std::uint64_t>(n_splits) > available) {
        throw CombinatoricsError(std::to_string(n_splits) + " splits requested but only " +
                                 std::to_string(available) + " distinct half-partitions of " +
                                 std::to_string(n) + " subjects exist");
    }
    SplitPlan plan;
    plan.n_splits = n_splits;
    plan.seed = seed;
    Rng rng = derive_rng(seed);
    std::set<std::vector<bool>> seen;
    std::vector<std::size_t> order(n);
    int attempts = 0;
    while (plan.splits.size() < static_cast<std::size_t>(n_splits)) {
        if (++attempts > kMaxSplitAttempts) {
            throw CombinatoricsError("could not draw enough distinct half-partitions");
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<bool> in_first(n, false);
        for (std::size_t i = 0; i < n / 2; ++i) in_first[order[i]] = true;
        // Equal halves: the pair is unordered, key it by the half holding subject 0.
        std::vector<bool> key = in_first;
        if (n % 2 == 0 && !key[0]) key.flip();
        if (!seen.insert(key).second) continue;
        std::vector<std::string> first, second;
        for (std::size_t i = 0; i < n; ++i) (in_first[i] ? first : second).push_back(subject_ids[i]);
        plan.splits.emplace_back(std::move(first), std::move(second));
    }
    return plan;
}

ReproducibilityReport run_crossval(std::span<const SubjectDataset> datasets,
                                   const RunConfig& config, const SplitPlan& plan, int jobs) {
    require_group(datasets);
    std::map<std::string, std::size_t> index_of;
    for (std::size_t s = 0; s < datasets.size(); ++s) {
        if (!index_of.emplace(datasets[s].subject_id, s).second) {
            throw ParameterError("duplicate subject id " + datasets[s].subject_id);
        }
    }

    ReproducibilityReport report;
    report.n_sbj = resolve_subject_order(datasets, config, nullptr, jobs);

    // Full-group work runs in subject-id order so the report does not depend
    // on the order of `datasets`.
    std::vector<SubjectDataset> by_id;
    by_id.reserve(datasets.size());
    for (const auto& [id, s] : index_of) by_id.push_back(datasets[s]);
    std::size_t rank = 0;
    for (auto& [id, s] : index_of) s = rank++;
    const auto decomps = decompose_subjects(by_id, report.n_sbj, jobs);

    const GroupFit full = fit_group(decomps, config, config.rng_seed, jobs);
    report.full_n_grp = full.group.n_grp;

    auto gather = [&](const std::vector<std::string>& ids) {
        std::vector<SubjectDecomposition> half;
        for (const auto& id : ids) {
            const auto it = index_of.find(id);
            if (it == index_of.end()) throw ParameterError("split names unknown subject " + id);
            half.push_back(decomps[it->second]);
        }
        return half;
    };

    const std::size_t n_splits = plan.splits.size();
    report.per_split.resize(n_splits);
    std::vector<std::array<MatrixXd, 2>> half_maps(n_splits);
    parallel_for(n_splits, jobs, [&](std::size_t k) {
        const auto& [ids_a, ids_b] = plan.splits[k];
        const auto half_a = gather(ids_a);
        const auto half_b = gather(ids_b);
        const GroupFit fit_a = fit_group(half_a, config, derive_seed(config.rng_seed, {
            static_cast<std::uint64_t>(Stage::kSplits), k, 0}));
        const GroupFit fit_b = fit_group(half_b, config, derive_seed(config.rng_seed, {
            static_cast<std::uint64_t>(Stage::kSplits), k, 1}));
        SplitOutcome& out = report.per_split[k];
        out.n_grp_first = fit_a.group.n_grp;
        out.n_grp_second = fit_b.group.n_grp;
        out.converged_first = fit_a.maps.converged;
        out.converged_second = fit_b.maps.converged;
        out.included = out.n_grp_first > 0 && out.n_grp_second > 0;
        if (out.included) {
            out.unthresholded = compare_maps(fit_a.maps.maps, fit_b.maps.maps);
            out.thresholded = compare_maps(thresholded_values(fit_a.maps),
                                           thresholded_values(fit_b.maps), DegenerateRows::kZero);
        }
        half_maps[k] = {fit_a.maps.maps, fit_b.maps.maps};
    });

    report.per_map_score = VectorXd::Zero(full.group.n_grp);
    int halves_used = 0;
    for (const auto& pair : half_maps) {
        for (const auto& maps : pair) {
            if (maps.rows() == 0 || full.group.n_grp == 0) continue;
            report.per_map_score += best_match_scores(full.maps.maps, maps);
            ++halves_used;
        }
    }
    if (halves_used > 0) report.per_map_score /= static_cast<double>(halves_used);

    summarize(report);
    return report;
}

void summarize(ReproducibilityReport& report) {
    std::vector<double> e, t, e_thr, t_thr;
    report.n_included = 0;
    report.n_excluded = 0;
    for (const auto& s : report.per_split) {
        if (!s.included) {
            ++report.n_excluded;
            continue;
        }
        ++report.n_included;
        e.push_back(s.unthresholded->e);
        t.push_back(s.unthresholded->t);
        e_thr.push_back(s.thresholded->e);
        t_thr.push_back(s.thresholded->t);
    }
    report.unthresholded = summary_of(e, t);
    report.thresholded = summary_of(e_thr, t_thr);
}

nlohmann::json to_json(const SplitPlan& plan) {
    nlohmann::json j;
    j["n_splits"] = plan.n_splits;
    j["seed"] = plan.seed;
    auto splits = nlohmann::json::array();
    for (const auto& [a, b] : plan.splits) splits.push_back({{"first", a}, {"second", b}});
    j["splits"] = splits;
    return j;
}

nlohmann::json to_json(const ReproducibilityReport& r) {
    nlohmann::json j;
    auto per_split = nlohmann::json::array();
    for (const auto& s : r.per_split) {
        nlohmann::json item;
        item["n_grp"] = {s.n_grp_first, s.n_grp_second};
        item["converged"] = {s.converged_first, s.converged_second};
        item["included"] = s.included;
        item["unthresholded"] = s.unthresholded ? to_json(*s.unthresholded) : nlohmann::json(nullptr);
        item["thresholded"] = s.thresholded ? to_json(*s.thresholded) : nlohmann::json(nullptr);
        per_split.push_back(std::move(item));
    }
    j["per_split"] = per_split;
    nlohmann::json summary = to_json(r.unthresholded);
    summary["thresholded"] = to_json(r.thresholded);
    summary["n_included"] = r.n_included;
    summary["n_excluded"] = r.n_excluded;
    j["summary"] = summary;
    j["per_map_score"] = report_array(r.per_map_score);
    j["n_sbj"] = r.n_sbj;
    j["full_n_grp"] = r.full_n_grp;
    return j;
}

}  // namespace canica
