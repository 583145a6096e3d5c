#include <algorithm>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <CLI11.hpp>

#include "mbsat/cli.hpp"
#include "mbsat/error.hpp"
#include "text_util.hpp"

namespace mbsat::cli {

using nlohmann::json;

namespace {

int worker_count(const Invocation& inv) {
    if (inv.jobs > 0) return inv.jobs;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

json echo_json(const Experiment& e) {
    json j = json::object();
    for (const auto& [k, v] : config_echo(e)) j[k] = v;
    return j;
}

std::filesystem::path point_path(const std::filesystem::path& out, const GridPoint& g) {
    return out / "points" / (g.id() + ".json");
}

/// Runs `grid`, writing per-point JSON as it goes, then the combined result JSON and CSV.
int execute(const Invocation& inv, const Experiment& exp, const std::vector<GridPoint>& grid) {
    ensure_output_dir(inv.out);
    ensure_output_dir(inv.out / "points");

    // Configuration problems surface before any simulation time is spent.
    for (const GridPoint& g : grid) {
        try {
            (void)prepare_scenario(g.config);
        } catch (const Error& e) {
            throw ConfigError("grid point " + g.id() + ": " + e.what());
        }
    }

    const auto has_result = [&](const GridPoint& g) {
        if (!inv.resume || !std::filesystem::exists(point_path(inv.out, g))) return false;
        try {
            const json j = json::parse(read_file(point_path(inv.out, g)));
            return j.value("id", std::string()) == g.id();
        } catch (const std::exception&) {
            return false;
        }
    };

    SweepOptions opts;
    opts.jobs = worker_count(inv);
    opts.keep_detail = inv.detail;
    opts.skip = has_result;
    opts.on_point = [&](const PointOutcome& o) {
        if (o.report) {
            write_file(point_path(inv.out, o.point), point_json(o.point, *o.report, inv.detail).dump(1) + "\n");
        }
        if (inv.verbosity > 0) {
            std::cerr << "[" << (o.point.index + 1) << "/" << grid.size() << "] " << o.point.id() << ": "
                      << (o.report ? "done" : o.error.empty() ? "skipped (resume)" : "FAILED: " + o.error) << "\n";
        }
        if (o.report) {
            for (const auto& w : o.report->warnings) std::cerr << "warning: " << o.point.id() << ": " << w << "\n";
        }
    };
    const std::vector<PointOutcome> outcomes = sweep(grid, opts);

    std::vector<SummaryRow> rows;
    json points = json::array();
    json failures = json::array();
    for (const PointOutcome& o : outcomes) {
        if (!o.error.empty()) {
            failures.push_back({{"id", o.point.id()}, {"error", o.error}});
            continue;
        }
        json p = json::parse(read_file(point_path(inv.out, o.point)));
        p.erase("detail");
        rows.push_back(summary_row(p));
        points.push_back(std::move(p));
    }

    json doc = {{"config", echo_json(exp)}, {"grid", json::array()}, {"points", points}, {"failures", failures}};
    for (const GridPoint& g : grid) doc["grid"].push_back(g.id());
    write_file(inv.out / "result.json", doc.dump(1) + "\n");
    std::ostringstream csv;
    write_summary_csv(csv, rows);
    write_file(inv.out / "summary.csv", csv.str());

    if (!failures.empty()) {
        for (const auto& f : failures) {
            std::cerr << "error: " << f["id"].get<std::string>() << ": " << f["error"].get<std::string>() << "\n";
        }
        std::cerr << failures.size() << " of " << grid.size() << " grid points failed\n";
        return 3;
    }
    if (inv.verbosity >= 0) std::cerr << "wrote " << (inv.out / "summary.csv").string() << "\n";
    return 0;
}

std::vector<GridPoint> single_point(const Experiment& exp) {
    return expand_grid(exp.base, SweepAxes::single(exp.base));
}

} // namespace

Experiment load_experiment(const Invocation& inv) {
    Experiment e = parse_config(inv.config, inv.overrides);
    if (inv.seed_set) e.base.seed = inv.seed;
    return e;
}

int cmd_run(const Invocation& inv) {
    const Experiment exp = load_experiment(inv);
    (void)prepare_scenario(exp.base);
    return execute(inv, exp, single_point(exp));
}

int cmd_sweep(const Invocation& inv) {
    const Experiment exp = load_experiment(inv);
    return execute(inv, exp, expand_grid(exp.base, exp.effective_axes()));
}

int cmd_validate(const Invocation& inv) {
    const Experiment exp = load_experiment(inv);
    const Scenario sc = prepare_scenario(exp.base);
    std::size_t users = 0;
    for (std::size_t n : sc.users_per_beam) users += n;
    std::cout << "config ok: " << sc.layout.size() << " beams, " << users << " users per drop\n";
    for (const auto& w : sc.warnings) std::cout << "warning: " << w << "\n";
    if (inv.check_grid) {
        const auto grid = expand_grid(exp.base, exp.effective_axes());
        for (const GridPoint& g : grid) {
            try {
                (void)prepare_scenario(g.config);
            } catch (const Error& e) {
                throw ConfigError("grid point " + g.id() + ": " + e.what());
            }
        }
        std::cout << "sweep grid ok: " << grid.size() << " points\n";
    }
    if (inv.verbosity > 0) {
        for (const auto& [k, v] : config_echo(exp)) std::cout << k << " = " << v << "\n";
    }
    return 0;
}

namespace {

struct PointData {
    json j;
    SummaryRow row;
    double se = 0.0;
};

std::string csv_prefix(const SummaryRow& r) {
    using detail::format_double;
    return r.algorithm + "," + r.metric + "," + r.precoder + "," + std::to_string(r.K) + "," + format_double(r.rho) +
           "," + format_double(r.psat);
}

constexpr const char* kPrefixHeader = "algorithm,metric,precoder,K,rho,psat";

std::string cdf_csv(const std::vector<PointData>& pts, const char* field) {
    std::ostringstream s;
    s << kPrefixHeader << ",probability,value_db\n";
    for (const auto& p : pts) {
        const json& c = p.j.at(field);
        const auto& prob = c.at("probability");
        const auto& val = c.at("value_db");
        for (std::size_t i = 0; i < prob.size(); ++i) {
            s << csv_prefix(p.row) << ',' << detail::format_double(prob[i].get<double>()) << ','
              << detail::format_double(val[i].get<double>()) << '\n';
        }
    }
    return s.str();
}

} // namespace

int cmd_emit_plots(const Invocation& inv) {
    using detail::format_double;
    const auto result_path = inv.out / "result.json";
    if (!std::filesystem::exists(result_path)) throw IoError("no result file at '" + result_path.string() + "'");
    json doc;
    try {
        doc = json::parse(read_file(result_path));
    } catch (const json::exception& e) {
        throw ParseError(result_path.string(), 0, e.what());
    }

    std::vector<PointData> pts;
    std::vector<std::string> missing;
    for (const auto& id : doc.at("grid")) {
        const auto path = inv.out / "points" / (id.get<std::string>() + ".json");
        if (!std::filesystem::exists(path)) {
            missing.push_back(id.get<std::string>());
            continue;
        }
        PointData p;
        try {
            p.j = json::parse(read_file(path));
        } catch (const json::exception& e) {
            throw ParseError(path.string(), 0, e.what());
        }
        p.row = summary_row(p.j);
        p.se = p.j.at("aggregates").at("avg_rate_se").get<double>();
        pts.push_back(std::move(p));
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += "\n  " + m;
        throw IoError(std::to_string(missing.size()) + " grid points have no result:" + list);
    }

    const auto dir = inv.plots.empty() ? inv.out / "plots" : inv.plots;
    ensure_output_dir(dir);

    const auto sorted_by = [&](auto key) {
        std::vector<const PointData*> v;
        for (const auto& p : pts) v.push_back(&p);
        std::stable_sort(v.begin(), v.end(), [&](const PointData* a, const PointData* b) { return key(a->row) < key(b->row); });
        return v;
    };

    {
        std::ostringstream s;
        s << "algorithm,metric,precoder,rho,psat,K,avg_rate,avg_rate_se,outage_frac\n";
        for (const PointData* p : sorted_by([](const SummaryRow& r) {
                 return std::tie(r.algorithm, r.metric, r.precoder, r.rho, r.psat, r.K);
             })) {
            const auto& r = p->row;
            s << r.algorithm << ',' << r.metric << ',' << r.precoder << ',' << format_double(r.rho) << ','
              << format_double(r.psat) << ',' << r.K << ',' << format_double(r.avg_rate) << ',' << format_double(p->se)
              << ',' << format_double(r.outage_frac) << '\n';
        }
        write_file(dir / "rate_vs_K.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "algorithm,metric,precoder,K,rho,psat,avg_rate,avg_rate_se,outage_frac\n";
        for (const PointData* p : sorted_by([](const SummaryRow& r) {
                 return std::tie(r.algorithm, r.metric, r.precoder, r.K, r.rho, r.psat);
             })) {
            s << csv_prefix(p->row) << ',' << format_double(p->row.avg_rate) << ',' << format_double(p->se) << ','
              << format_double(p->row.outage_frac) << '\n';
        }
        write_file(dir / "rate_vs_psat.csv", s.str());
    }
    write_file(dir / "serving_sinr_cdf.csv", cdf_csv(pts, "serving_sinr_cdf"));
    write_file(dir / "sigma_dgamma_cdf.csv", cdf_csv(pts, "sigma_dgamma_cdf"));
    {
        std::ostringstream s;
        s << kPrefixHeader << ",size,count,rel_freq\n";
        for (const auto& p : pts) {
            for (const auto& h : p.j.at("cluster_size_histogram")) {
                s << csv_prefix(p.row) << ',' << h.at("size").get<std::size_t>() << ','
                  << h.at("count").get<std::size_t>() << ',' << format_double(h.at("rel_freq").get<double>()) << '\n';
            }
        }
        write_file(dir / "cluster_size_hist.csv", s.str());
    }
    {
        using Key = std::tuple<std::string, std::string, int, double, double>;
        std::map<Key, std::map<std::string, const PointData*>> by_metric;
        for (const auto& p : pts) {
            const auto& r = p.row;
            by_metric[{r.algorithm, r.precoder, r.K, r.rho, r.psat}][r.metric] = &p;
        }
        std::ostringstream s;
        s << "algorithm,precoder,K,rho,psat,rate_channel,rate_euclidean,gain\n";
        std::size_t n = 0;
        for (const auto& [k, m] : by_metric) {
            const auto ch = m.find("channel");
            const auto eu = m.find("euclidean");
            if (ch == m.end() || eu == m.end()) continue;
            const double a = ch->second->row.avg_rate, b = eu->second->row.avg_rate;
            s << std::get<0>(k) << ',' << std::get<1>(k) << ',' << std::get<2>(k) << ',' << format_double(std::get<3>(k))
              << ',' << format_double(std::get<4>(k)) << ',' << format_double(a) << ',' << format_double(b) << ','
              << format_double(a - b) << '\n';
            ++n;
        }
        if (n == 0) {
            std::cerr << "warning: results hold only one similarity metric; rate_gain.csv not written\n";
        } else {
            write_file(dir / "rate_gain.csv", s.str());
        }
    }
    if (inv.verbosity >= 0) std::cerr << "wrote plot data to " << dir.string() << "\n";
    return 0;
}

int run_main(int argc, char** argv) {
    CLI::App app{"Multi-beam GEO forward-link Monte Carlo simulator"};
    app.require_subcommand(1);
    Invocation inv;
    std::string seed_text;

    const auto common = [&](CLI::App* sub, bool runs) {
        sub->add_option("--config", inv.config, "key=value configuration file");
        sub->add_option("--set", inv.overrides, "override, key=value (repeatable)")->take_all();
        sub->add_option("--seed", seed_text, "master seed (unsigned 64-bit)");
        sub->add_flag("-v,--verbose", inv.verbosity, "more output");
        if (runs) {
            sub->add_option("--out", inv.out, "output directory")->capture_default_str();
            sub->add_option("--jobs", inv.jobs, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
            sub->add_flag("--detail", inv.detail, "write per-cluster records into the point JSON");
            sub->add_flag("--resume", inv.resume, "skip grid points whose result file exists");
        }
    };
    auto* run = app.add_subcommand("run", "simulate the base configuration");
    common(run, true);
    auto* sw = app.add_subcommand("sweep", "simulate every point of the sweep.* axes");
    common(sw, true);
    auto* val = app.add_subcommand("validate", "check a configuration without simulating");
    common(val, false);
    val->add_flag("--sweep", inv.check_grid, "also check every sweep grid point");
    auto* plots = app.add_subcommand("emit-plots", "write plot-ready CSVs from a result directory");
    plots->add_option("--out", inv.out, "result directory")->capture_default_str();
    plots->add_option("--plots", inv.plots, "target directory (default: <out>/plots)");
    plots->add_flag("-v,--verbose", inv.verbosity, "more output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (!seed_text.empty()) {
            try {
                inv.seed = detail::parse_u64(seed_text);
            } catch (const std::invalid_argument&) {
                throw ConfigError("--seed: expected an unsigned 64-bit integer, got '" + seed_text + "'");
            }
            inv.seed_set = true;
        }
        if (run->parsed()) return cmd_run(inv);
        if (sw->parsed()) return cmd_sweep(inv);
        if (val->parsed()) return cmd_validate(inv);
        return cmd_emit_plots(inv);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const GeometryError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace mbsat::cli
