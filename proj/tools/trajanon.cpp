#include <CLI11.hpp>

#include <array>
#include <cstdint>
#include <iostream>
#include <string>

#include "trajanon/anonymize.hpp"
#include "trajanon/data.hpp"
#include "trajanon/generator.hpp"
#include "trajanon/merge.hpp"
#include "trajanon/metrics.hpp"
#include "trajanon/verify.hpp"

namespace {

std::string sibling(const std::string& path, const std::string& suffix) {
    std::string base = path;
    if (base.size() > 4 && base.substr(base.size() - 4) == ".csv")
        base.resize(base.size() - 4);
    return base + suffix;
}

void print_summary(const char* label, const trajanon::SummaryStats& s) {
    std::cout << label << ": mean=" << s.mean << " median=" << s.median << " q1=" << s.q1
              << " q3=" << s.q3 << " min=" << s.min << " max=" << s.max << '\n';
}

int run(int argc, char** argv) {
    CLI::App app{"trajectory anonymization toolkit"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic raw dataset");
    trajanon::GenConfig gcfg;
    std::string gen_out;
    gen->add_option("--output", gen_out, "raw CSV path")->required();
    gen->add_option("--users", gcfg.users, "number of users");
    gen->add_option("--days", gcfg.days, "number of days");
    gen->add_option("--rate", gcfg.rate_per_hour, "mean samples per user-hour");
    gen->add_option("--ratio", gcfg.day_night_ratio, "day/night activity ratio");
    gen->add_option("--seed", gcfg.seed, "generator seed");
    gen->add_option("--grid", gcfg.grid, "grid side length");
    gen->add_option("--time-coarse", gcfg.time_coarse_min, "timestamp coarsening bin, minutes");

    // merge
    auto* merge = app.add_subcommand("merge", "optimally merge all input trajectories");
    std::string merge_in, merge_out;
    std::int64_t max_window = 0;
    merge->add_option("--input", merge_in, "raw CSV path")->required();
    merge->add_option("--output", merge_out, "generalized CSV path")->required();
    merge->add_option("--max-window", max_window, "cap on samples per cell (0 = none)");

    // anonymize
    auto* anon = app.add_subcommand("anonymize", "run the full anonymization pipeline");
    trajanon::AnonConfig acfg;
    std::string anon_in, anon_out;
    anon->add_option("--input", anon_in, "raw CSV path")->required();
    anon->add_option("--output", anon_out, "published CSV path")->required();
    anon->add_option("--k", acfg.k, "anonymity set size");
    anon->add_option("--tau-min", acfg.tau, "adversary window, minutes");
    anon->add_option("--epsilon-min", acfg.epsilon, "epoch length, minutes");
    anon->add_option("--cluster-target", acfg.cluster_target, "target users per cluster");
    anon->add_option("--seed", acfg.seed, "pipeline seed");

    // verify
    auto* ver = app.add_subcommand("verify", "replay the adversary against a publication");
    std::string ver_raw, ver_anon, ver_mode = "exhaustive";
    std::size_t probes = 1000;
    std::uint64_t ver_seed = 1;
    std::int64_t vk = 0, vtau = 0, veps = 0;
    ver->add_option("--raw", ver_raw, "raw CSV path")->required();
    ver->add_option("--anon", ver_anon, "published CSV path")->required();
    ver->add_option("--mode", ver_mode, "exhaustive or sampled")
        ->check(CLI::IsMember({"exhaustive", "sampled"}));
    ver->add_option("--probes", probes, "sampled-mode probe count");
    ver->add_option("--seed", ver_seed, "sampled-mode seed");
    ver->add_option("--k", vk, "expected anonymity set size");
    ver->add_option("--tau-min", vtau, "expected adversary window, minutes");
    ver->add_option("--epsilon-min", veps, "expected epoch length, minutes");

    // stats
    auto* st = app.add_subcommand("stats", "summarize a published dataset");
    std::string st_in, st_raw, st_hourly;
    st->add_option("--input", st_in, "published CSV path")->required();
    st->add_option("--raw", st_raw, "raw CSV path, enables withheld-sample stats");
    st->add_option("--hourly", st_hourly, "write per-hour breakdown CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (*gen) {
        gcfg.validate();
        trajanon::write_raw_csv(gen_out, trajanon::generate(gcfg));
        std::cout << "wrote " << gen_out << '\n';
        return 0;
    }

    if (*merge) {
        const auto raw = trajanon::read_raw_csv(merge_in);
        trajanon::MergeInput in;
        for (const auto& [user, tr] : raw.trajectories) in.trajectories.push_back(tr);
        trajanon::MergeOptions opts;
        opts.max_window = static_cast<std::size_t>(max_window);
        const auto res = trajanon::kmerge(in, opts);
        trajanon::PublishedDataset out;
        out.meta.origin_iso = raw.origin_iso;
        std::vector<trajanon::AnonBox> boxes;
        for (const auto& cell : res.cells) boxes.push_back(trajanon::box_of(cell.bounds()));
        for (const auto& [user, tr] : raw.trajectories) out.records[user] = boxes;
        trajanon::write_anon_csv(merge_out, out);
        std::cout << "cells: " << res.cells.size() << "\ncost: " << res.cost << "\nwrote "
                  << merge_out << '\n';
        return 0;
    }

    if (*anon) {
        const auto raw = trajanon::read_raw_csv(anon_in);
        const auto res = trajanon::anonymize(raw, acfg);
        trajanon::write_anon_csv(anon_out, res.published);
        const std::string sup = sibling(anon_out, ".suppressed.csv");
        const std::string rep = sibling(anon_out, ".report.txt");
        trajanon::write_suppression_csv(sup, res.suppressed);
        auto os = trajanon::detail::open_out(rep);
        os << res.report.render();
        std::cout << res.report.render() << "wrote " << anon_out << '\n'
                  << "wrote " << sup << '\n'
                  << "wrote " << rep << '\n';
        return 0;
    }

    if (*ver) {
        const auto raw = trajanon::read_raw_csv(ver_raw);
        const auto pub = trajanon::read_anon_csv(ver_anon);
        trajanon::AnonConfig cfg;
        cfg.k = vk > 0 ? static_cast<int>(vk)
                       : static_cast<int>(pub.meta.k.value_or(0));
        cfg.tau = vtau > 0 ? vtau : pub.meta.tau.value_or(0);
        cfg.epsilon = veps > 0 ? veps : pub.meta.epsilon.value_or(0);
        if (cfg.k < 2 || cfg.tau < 1 || cfg.epsilon < 1)
            throw std::runtime_error(
                "k, tau and epsilon must come from flags or published metadata");
        const auto mode = ver_mode == "sampled" ? trajanon::VerifyMode::sampled
                                                : trajanon::VerifyMode::exhaustive;
        const auto report = trajanon::verify(raw, pub, cfg, mode, probes, ver_seed);
        std::cout << report.render();
        return report.pass() ? 0 : 1;
    }

    const auto pub = trajanon::read_anon_csv(st_in);
    const auto g = trajanon::granularity_stats(pub);
    std::cout << "records: " << pub.records.size() << "\nboxes: " << g.spatial_m.count << '\n';
    if (g.spatial_m.count > 0) {
        print_summary("temporal_min", g.temporal_min);
        print_summary("spatial_m", g.spatial_m);
    }

    std::size_t total = 0, withheld = 0;
    std::array<std::size_t, 24> h_total{}, h_withheld{};
    const bool with_raw = !st_raw.empty();
    if (with_raw) {
        const auto raw = trajanon::read_raw_csv(st_raw);
        for (const auto& [user, tr] : raw.trajectories) {
            const auto it = pub.records.find(user);
            for (const auto& s : tr.samples()) {
                ++total;
                ++h_total[static_cast<std::size_t>(trajanon::hour_of_slot(s.t))];
                const bool covered = it != pub.records.end() && trajanon::consistent(it->second, {s});
                if (!covered) {
                    ++withheld;
                    ++h_withheld[static_cast<std::size_t>(trajanon::hour_of_slot(s.t))];
                }
            }
        }
        std::cout << "samples: " << total << "\nwithheld_samples: " << withheld
                  << "\nwithheld_pct: "
                  << (total ? 100.0 * static_cast<double>(withheld) / static_cast<double>(total)
                            : 0.0)
                  << '\n';
    }

    if (!st_hourly.empty()) {
        auto os = trajanon::detail::open_out(st_hourly);
        os << "hour,boxes,mean_temporal_min,mean_spatial_m";
        if (with_raw) os << ",samples,withheld_samples,withheld_rate";
        os << '\n';
        for (std::size_t h = 0; h < 24; ++h) {
            os << h << ',' << g.hourly_boxes[h] << ',' << g.hourly_temporal_min[h] << ','
               << g.hourly_spatial_m[h];
            if (with_raw) {
                const double rate = h_total[h] ? static_cast<double>(h_withheld[h]) /
                                                     static_cast<double>(h_total[h])
                                               : 0.0;
                os << ',' << h_total[h] << ',' << h_withheld[h] << ',' << rate;
            }
            os << '\n';
        }
        std::cout << "wrote " << st_hourly << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
