#include "cli_app.hpp"

#include "worker_pool.hpp"

#include "endo/ptm.hpp"
#include "endo/scenario.hpp"
#include "endo/simenv.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace endo::cli {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kSpecVersion = "1";

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
};

/** @brief A fully resolved experiment: replaying it needs nothing else. */
struct ExperimentSpec {
    std::string command;
    Json scenario;
    Json options;
    fs::path out_dir;
    unsigned jobs = 1;
    bool gnuplot = false;
};

struct Outcome {
    Table table;
    Json summary = Json::object();
    /** Set when a numerical failure cut the experiment short; rows hold what finished before it. */
    std::optional<std::string> numerical_failure;
    std::string gnuplot;
};

// ---------------------------------------------------------------------------------------------
// Value lists

std::vector<double> parse_values(const std::string& text, double default_step)
{
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream ss(text);
        std::string p;
        while (std::getline(ss, p, ':')) {
            try {
                std::size_t used = 0;
                parts.push_back(std::stod(p, &used));
                if (used != p.size())
                    throw std::invalid_argument(p);
            } catch (const std::exception&) {
                throw ConfigError("bad range '" + text + "'");
            }
        }
        if (parts.size() < 2 || parts.size() > 3)
            throw ConfigError("range '" + text + "' must be start:stop[:step]");
        const double step = parts.size() == 3 ? parts[2] : default_step;
        if (!(step > 0) || parts[1] < parts[0])
            throw ConfigError("range '" + text + "' needs start <= stop and a positive step");
        const long n = std::lround(std::floor((parts[1] - parts[0]) / step + 1e-9));
        for (long i = 0; i <= n; ++i)
            out.push_back(parts[0] + i * step);
        if (parts[1] - out.back() > 1e-9 * (1.0 + std::abs(parts[1])))
            out.push_back(parts[1]);
        return out;
    }
    std::stringstream ss(text);
    std::string p;
    while (std::getline(ss, p, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(p, &used));
            if (used != p.size())
                throw std::invalid_argument(p);
        } catch (const std::exception&) {
            throw ConfigError("bad value list '" + text + "'");
        }
    }
    if (out.empty())
        throw ConfigError("empty value list");
    return out;
}

template <class T>
T option(const Json& options, const char* key)
{
    if (!options.contains(key))
        throw ConfigError(std::string("missing option '") + key + "'");
    try {
        return options.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("option '") + key + "' has the wrong type");
    }
}

void rethrow_first(const std::vector<std::exception_ptr>& errors, std::size_t& first_failed)
{
    first_failed = errors.size();
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (errors[i]) {
            first_failed = i;
            break;
        }
    // Config errors inside tasks are still config errors; numerical ones keep earlier rows.
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i])
            continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const ConfigError&) {
            throw;
        } catch (...) {
        }
    }
}

std::string failure_message(std::exception_ptr e)
{
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    }
    return "unknown failure";
}

// ---------------------------------------------------------------------------------------------
// Experiments

Outcome run_mc(const Scenario& sc, const Json& opt, unsigned jobs)
{
    const std::string variant = option<std::string>(opt, "variant");
    const std::vector<double> eps = parse_values(option<std::string>(opt, "eps"), 0.05);
    const int n = option<int>(opt, "n");
    if (n < 1)
        throw ConfigError("--n must be positive");
    McOptions mco;
    mco.random_start_direction = option<bool>(opt, "random_start");
    mco.start_offset = option<double>(opt, "start_offset");
    mco.newton = sc.episode.newton;

    std::vector<PtmVariantTag> tags;
    if (variant == "all")
        tags = {PtmVariantTag::proposed, PtmVariantTag::type_321, PtmVariantTag::type_222};
    else
        tags = {variant_from_string(variant)};

    struct Task {
        PtmVariantTag tag;
        double eps;
    };
    std::vector<Task> tasks;
    for (auto t : tags)
        for (double e : eps)
            tasks.push_back({t, e});

    const std::uint64_t seed = sc.episode.seed;
    auto res = run_indexed<McResult>(tasks.size(), jobs, [&](std::size_t i) {
        return monte_carlo_sensitivity(PtmConfigVariant::make(tasks[i].tag), tasks[i].eps, n, seed, mco);
    });
    std::size_t failed = 0;
    rethrow_first(res.errors, failed);

    Outcome o;
    o.table.header = {"variant", "eps_max", "n", "max_error", "mean_error", "failures"};
    for (std::size_t i = 0; i < failed; ++i) {
        const McResult& r = res.values[i];
        o.table.rows.push_back({to_string(tasks[i].tag), fmt(tasks[i].eps), std::to_string(n), fmt(r.max_error),
                                fmt(r.mean_error), std::to_string(r.failures)});
    }
    if (failed < tasks.size())
        o.numerical_failure = failure_message(res.errors[failed]);
    o.gnuplot = "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'eps_max [mm]'\n"
                "set ylabel 'max position error [mm]'\n"
                "plot for [v in 'proposed type_321 type_222'] 'results.csv' using 2:(strcol(1) eq v ? $4 : 1/0) "
                "with linespoints title v\n";
    return o;
}

Outcome run_workspace(const Scenario& sc, const Json& opt, const fs::path& out_dir)
{
    WorkspaceOptions wo;
    wo.resolution = option<double>(opt, "resolution");
    if (!(wo.resolution > 0))
        throw ConfigError("--resolution must be positive");
    wo.stroke_limit = sc.episode.ptm_sensor.stroke_limit;
    const WorkspaceResult w = workspace_analysis(sc.episode.ptm, wo);

    long members = 0;
    for (auto m : w.member)
        members += m;
    Outcome o;
    o.table.header = {"resolution", "grid_points", "member_points", "cylinder_points", "cylinder_members",
                      "cylinder_contained"};
    o.table.rows.push_back({fmt(w.resolution), std::to_string(w.member.size()), std::to_string(members),
                            std::to_string(w.cylinder_points), std::to_string(w.cylinder_members),
                            w.cylinder_contained ? "1" : "0"});
    o.summary = {{"cylinder_contained", w.cylinder_contained}, {"member_points", members}};

    if (option<bool>(opt, "grid")) {
        std::ofstream g(out_dir / "workspace_grid.csv");
        g << "x,y,z,dexterity,stroke_ok,member\n";
        for (int i = 0; i < w.n; ++i)
            for (int j = 0; j < w.n; ++j)
                for (int k = 0; k < w.n; ++k) {
                    const std::size_t id = w.index(i, j, k);
                    const Vec3 p = w.offset(i, j, k);
                    g << fmt(p.x()) << ',' << fmt(p.y()) << ',' << fmt(p.z()) << ',' << fmt(w.dexterity[id]) << ','
                      << int(w.stroke_ok[id]) << ',' << int(w.member[id]) << '\n';
                }
    }
    o.gnuplot = "set datafile separator ','\nset xlabel 'x [mm]'\nset ylabel 'y [mm]'\nset zlabel 'z [mm]'\n"
                "splot 'workspace_grid.csv' every ::1 using 1:2:($6 > 0 ? $3 : 1/0) with points pt 7 ps 0.3 "
                "title 'PTM workspace'\n";
    return o;
}

Outcome run_interference(const Scenario& sc, const Json& opt)
{
    RandomWalkParams rw;
    rw.duration = option<double>(opt, "duration");
    if (!(rw.duration > 0))
        throw ConfigError("--duration must be positive");
    const auto traj = random_walk_trajectory(rw, sc.episode.seed);
    const InterferenceResult r = interference_analysis(sc.episode.ptm, traj, HandpiecePrism::default_prism());

    Outcome o;
    o.table.header = {"kind", "string", "other", "min_distance", "sample"};
    for (const auto& p : r.pairs)
        o.table.rows.push_back({p.prism ? "string-prism" : "string-string", "s" + std::to_string(p.string_index + 1),
                                (p.prism ? "h" : "s") + std::to_string(p.other_index + 1), fmt(p.min_distance),
                                std::to_string(p.sample)});
    o.summary = {{"min_string_string", r.min_string_string},
                 {"min_string_prism", r.min_string_prism},
                 {"samples", traj.size()}};
    o.gnuplot = "set datafile separator ','\nset style data histograms\nset ylabel 'min distance [mm]'\n"
                "plot 'results.csv' every ::1 using 4:xtic(stringcolumn(2).'-'.stringcolumn(3)) title ''\n";
    return o;
}

Outcome run_align(const Scenario& sc, unsigned jobs)
{
    const std::vector<Scheme> schemes{Scheme::hybrid, Scheme::admittance_only, Scheme::admittance_flex};
    struct Task {
        Scheme scheme;
        double speed;
    };
    std::vector<Task> tasks;
    for (auto s : schemes)
        for (double v : sc.align_speeds)
            tasks.push_back({s, v});

    auto res = run_indexed<EpisodeLog>(tasks.size(), jobs, [&](std::size_t i) {
        return simulate_episode(alignment_config(tasks[i].scheme, tasks[i].speed, sc.episode.seed, sc.episode));
    });
    std::size_t failed = 0;
    rethrow_first(res.errors, failed);

    Outcome o;
    o.table.header = {"scheme",  "speed",   "rms_x",   "rms_y",   "rms_z",   "rms_phi",
                      "rms_psi", "rms_theta", "mean_fx", "mean_fy", "mean_fz", "mean_tx",
                      "mean_ty", "mean_tz", "mean_lateral_force", "ptm_failures", "clamp_events", "aborted"};
    bool aborted = false;
    for (std::size_t i = 0; i < failed; ++i) {
        const EpisodeLog& log = res.values[i];
        const EpisodeSummary s = summarize(log);
        Row r{to_string(tasks[i].scheme), fmt(tasks[i].speed)};
        for (int k = 0; k < 6; ++k)
            r.push_back(fmt(s.rms_error(k)));
        for (int k = 0; k < 6; ++k)
            r.push_back(fmt(s.mean_abs_wrench(k)));
        r.push_back(fmt(s.mean_lateral_force));
        r.push_back(std::to_string(log.ptm_failures));
        r.push_back(std::to_string(log.clamp_events));
        r.push_back(log.aborted ? "1" : "0");
        aborted = aborted || log.aborted;
        o.table.rows.push_back(r);
    }
    if (failed < tasks.size())
        o.numerical_failure = failure_message(res.errors[failed]);
    else if (aborted)
        o.numerical_failure = "at least one episode aborted; see the aborted column";
    o.gnuplot = "set datafile separator ','\nset style data histograms\nset ylabel 'RMS x error [mm]'\n"
                "plot 'results.csv' every ::1 using 3:xtic(stringcolumn(1).' '.stringcolumn(2)) title 'x'\n";
    return o;
}

Outcome run_episode(const Scenario& sc, const Json& scenario_json, const fs::path& out_dir)
{
    const EpisodeLog log = simulate_episode(sc.episode);
    {
        std::ofstream f(out_dir / "results.csv", std::ios::binary);
        write_episode_csv(f, log,
                          {"config_hash=" + config_hash(scenario_json), "seed=" + std::to_string(log.seed),
                           "spec_version=" + std::string(kSpecVersion)});
    }
    Outcome o;
    Json states = Json::array();
    for (auto s : log.state_sequence)
        states.push_back(to_string(s));
    const EpisodeSummary s = summarize(log);
    Json rms = Json::array();
    for (int k = 0; k < 6; ++k)
        rms.push_back(s.rms_error(k));
    o.summary = {{"state_sequence", states}, {"aborted", log.aborted},   {"abort_reason", log.abort_reason},
                 {"rms_error", rms},         {"fracture_flag", log.fracture_flag}, {"ptm_failures", log.ptm_failures},
                 {"clamp_events", log.clamp_events}, {"joint_clamps", log.joint_clamps}};
    if (log.aborted)
        o.numerical_failure = log.abort_reason;
    o.gnuplot = "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n"
                "set xlabel 't [s]'\nplot 'results.csv' using 1:7 with lines, '' using 1:8 with lines, "
                "'' using 1:15 with lines\n";
    return o;
}

Outcome run_sweep(const Scenario& sc, const Json& opt, unsigned jobs, bool ka_sweep)
{
    const std::vector<double> values = parse_values(option<std::string>(opt, "values"), ka_sweep ? 0.16 : 0.2);
    const double fixed = option<double>(opt, ka_sweep ? "kf" : "ka");
    const int reps = sc.sweep_repetitions;
    const double settle = option<double>(opt, "settle");

    const std::size_t n = values.size() * static_cast<std::size_t>(reps);
    auto res = run_indexed<double>(n, jobs, [&](std::size_t i) {
        PlatformConfig c = sc.platform;
        const double v = values[i / reps];
        const int rep = static_cast<int>(i % reps);
        c.seed = sc.platform.seed + static_cast<std::uint64_t>(rep);
        c.controller.ka(0) = ka_sweep ? v : fixed;
        c.controller.kf(0) = ka_sweep ? fixed : v;
        c.controller.validate();
        return platform_tracking_rms(c, settle);
    });
    std::size_t failed = 0;
    rethrow_first(res.errors, failed);

    Outcome o;
    const std::string name = ka_sweep ? "k_a" : "k_f";
    o.table.header = {"parameter", "value", "repetition", "seed", "rms_error"};
    Json means = Json::array();
    double best = std::numeric_limits<double>::infinity(), best_value = 0;
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        double sum = 0;
        int count = 0;
        for (int rep = 0; rep < reps; ++rep) {
            const std::size_t i = vi * reps + rep;
            if (i >= failed)
                break;
            o.table.rows.push_back({name, fmt(values[vi]), std::to_string(rep),
                                    std::to_string(sc.platform.seed + static_cast<std::uint64_t>(rep)),
                                    fmt(res.values[i])});
            sum += res.values[i];
            ++count;
        }
        if (count == reps) {
            const double mean = sum / reps;
            o.table.rows.push_back({name, fmt(values[vi]), "mean", "", fmt(mean)});
            means.push_back({{"value", values[vi]}, {"mean_rms", mean}});
            if (mean < best) {
                best = mean;
                best_value = values[vi];
            }
        }
    }
    o.summary = {{"means", means}, {"argmin", best_value}, {"min_mean_rms", best}};
    if (failed < n)
        o.numerical_failure = failure_message(res.errors[failed]);
    o.gnuplot = "set datafile separator ','\nset xlabel '" + name +
                "'\nset ylabel 'RMS tracking error [mm]'\n"
                "plot 'results.csv' using 2:(strcol(3) eq 'mean' ? $5 : 1/0) with linespoints title 'mean', "
                "'' using 2:(strcol(3) ne 'mean' ? $5 : 1/0) with points title 'runs'\n";
    return o;
}

Outcome run_calib(const Scenario& sc, const Json& opt)
{
    const std::vector<double> sigmas = parse_values(option<std::string>(opt, "sigmas"), 1.0);
    const int trials = option<int>(opt, "trials");
    Outcome o;
    o.table.header = {"sigma", "tcp_position_error", "tcp_axis_error_deg", "gravity_weight_error",
                      "gravity_centroid_error", "gravity_yaw_error_deg"};
    for (double s : sigmas) {
        try {
            const CalibrationDemo d = calibration_demo(s, sc.episode.seed, trials);
            o.table.rows.push_back({fmt(s), fmt(d.tcp_position_error), fmt(d.tcp_axis_error_deg),
                                    fmt(d.gravity_weight_error), fmt(d.gravity_centroid_error),
                                    fmt(d.gravity_yaw_error_deg)});
        } catch (const NumericalError& e) {
            o.numerical_failure = e.what();
            break;
        }
    }
    o.gnuplot = "set datafile separator ','\nset logscale xy\nset key autotitle columnhead\n"
                "plot 'results.csv' using 1:2 with linespoints, '' using 1:4 with linespoints\n";
    return o;
}

// ---------------------------------------------------------------------------------------------
// Output

void write_table(const fs::path& path, const Table& t)
{
    std::ofstream f(path, std::ios::binary);
    for (std::size_t i = 0; i < t.header.size(); ++i)
        f << (i ? "," : "") << t.header[i];
    f << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i)
            f << (i ? "," : "") << r[i];
        f << '\n';
    }
}

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_error(const fs::path& out_dir, std::ostream& err, const std::string& kind, const std::string& message)
{
    const Json rec{{"status", "error"}, {"kind", kind}, {"message", message}};
    err << rec.dump() << '\n';
    std::error_code ec;
    if (!out_dir.empty() && fs::is_directory(out_dir, ec)) {
        std::ofstream f(out_dir / "error.json");
        f << rec.dump(2) << '\n';
    }
}

int execute(const ExperimentSpec& spec, std::ostream& out, std::ostream& err)
{
    // Everything that can reject the configuration happens before any file is written.
    Scenario sc;
    try {
        sc = scenario_from_json(spec.scenario);
    } catch (const ConfigError& e) {
        write_error(spec.out_dir, err, "config", e.what());
        return kExitConfig;
    }
    const Json resolved = scenario_to_json(sc);

    std::error_code ec;
    fs::create_directories(spec.out_dir, ec);
    if (ec) {
        write_error({}, err, "config", "cannot create output directory '" + spec.out_dir.string() + "'");
        return kExitConfig;
    }
    fs::remove(spec.out_dir / "error.json", ec);

    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::string& c = spec.command;
        if (c == "mc-sensitivity")
            o = run_mc(sc, spec.options, spec.jobs);
        else if (c == "workspace")
            o = run_workspace(sc, spec.options, spec.out_dir);
        else if (c == "interference")
            o = run_interference(sc, spec.options);
        else if (c == "align")
            o = run_align(sc, spec.jobs);
        else if (c == "episode")
            o = run_episode(sc, resolved, spec.out_dir);
        else if (c == "sweep-ka")
            o = run_sweep(sc, spec.options, spec.jobs, true);
        else if (c == "sweep-kf")
            o = run_sweep(sc, spec.options, spec.jobs, false);
        else if (c == "calib-demo")
            o = run_calib(sc, spec.options);
        else
            throw ConfigError("unknown command '" + c + "'");
    } catch (const ConfigError& e) {
        write_error(spec.out_dir, err, "config", e.what());
        return kExitConfig;
    } catch (const NumericalError& e) {
        o.numerical_failure = e.what();
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (spec.command != "episode")
        write_table(spec.out_dir / "results.csv", o.table);
    if (spec.gnuplot && !o.gnuplot.empty()) {
        std::ofstream g(spec.out_dir / "plot.gp");
        g << "# gnuplot -p plot.gp (run inside the output directory)\n" << o.gnuplot;
    }

    Json manifest{{"format_version", kFormatVersion},
                  {"spec_version", kSpecVersion},
                  {"command", spec.command},
                  {"options", spec.options},
                  {"scenario", resolved},
                  {"config_hash", config_hash(resolved)},
                  {"seed", sc.episode.seed},
                  {"jobs", spec.jobs},
                  {"status", o.numerical_failure ? "numerical_failure" : "ok"},
                  {"summary", o.summary},
                  {"created_utc", utc_now()},
                  {"elapsed_s", elapsed}};
    std::ofstream(spec.out_dir / "manifest.json") << manifest.dump(2) << '\n';

    for (const auto& r : o.table.rows) {
        for (std::size_t i = 0; i < r.size(); ++i)
            out << (i ? "," : "") << r[i];
        out << '\n';
    }
    if (!o.summary.empty())
        out << o.summary.dump() << '\n';

    if (o.numerical_failure) {
        write_error(spec.out_dir, err, "numerical", *o.numerical_failure);
        return kExitNumerical;
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Patient tracking, alignment and cleaning experiments for a dental robot"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    bool gnuplot = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", scenario_path, "Scenario JSON file");
        sub->add_option("--out", out_dir, std::string("Output directory (default $") + kOutputDirEnv + " or ./out)");
        sub->add_option("--seed", seed, "Seed for every random draw of the experiment");
        sub->add_option("--set", sets, "Scenario override key.path=value (repeatable)");
        sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
        sub->add_flag("--gnuplot-script", gnuplot, "Also write plot.gp next to results.csv");
    };

    Json options = Json::object();

    std::string variant = "all", eps = "0.2";
    int n = 10000;
    bool random_start = false;
    double start_offset = 20.0;
    auto* mc = app.add_subcommand("mc-sensitivity", "Monte Carlo pose error under string-length noise");
    common(mc);
    mc->add_option("--variant", variant, "proposed, type_321, type_222 or all");
    mc->add_option("--eps", eps, "eps_max values: a,b,c or start:stop[:step]");
    mc->add_option("--n", n, "Trials per point");
    mc->add_flag("--random-start", random_start, "Random direction for the 20 mm initial-guess offset");
    mc->add_option("--start-offset", start_offset, "Initial guess distance from the true pose, mm");

    double resolution = 1.0;
    bool grid = false;
    auto* ws = app.add_subcommand("workspace", "Stroke-feasible full-dexterity region around the home pose");
    common(ws);
    ws->add_option("--resolution", resolution, "Grid spacing, mm");
    ws->add_flag("--grid", grid, "Also write the full grid to workspace_grid.csv");

    double duration = 500.0;
    auto* itf = app.add_subcommand("interference", "String-string and string-handpiece clearances on a random walk");
    common(itf);
    itf->add_option("--duration", duration, "Random-walk duration, s");

    auto* al = app.add_subcommand("align", "Three control schemes at each alignment speed");
    common(al);

    auto* ep = app.add_subcommand("episode", "One episode of the scenario; writes the full transcript");
    common(ep);

    std::string ka_values = "0.64:1.6:0.16", kf_values = "0:1.2:0.2";
    double ka_fixed = 0.8, kf_fixed = 1.0, settle = 2.0;
    auto* ska = app.add_subcommand("sweep-ka", "Platform tracking error over admittance gains");
    common(ska);
    ska->add_option("--values", ka_values, "k_a values: a,b,c or start:stop[:step]");
    ska->add_option("--kf", kf_fixed, "Flexibility gain held during the sweep");
    ska->add_option("--settle", settle, "Seconds excluded from the RMS");
    auto* skf = app.add_subcommand("sweep-kf", "Platform tracking error over flexibility gains");
    common(skf);
    skf->add_option("--values", kf_values, "k_f values: a,b,c or start:stop[:step]");
    skf->add_option("--ka", ka_fixed, "Admittance gain held during the sweep");
    skf->add_option("--settle", settle, "Seconds excluded from the RMS");

    std::string sigmas = "0,1e-4,1e-3,1e-2,1e-1";
    int trials = 20;
    auto* cal = app.add_subcommand("calib-demo", "TCP and gravity calibration on synthetic data");
    common(cal);
    cal->add_option("--sigmas", sigmas, "Noise levels");
    cal->add_option("--trials", trials, "Trials averaged per level");

    std::string manifest_path;
    auto* rp = app.add_subcommand("replay", "Re-run the experiment recorded in a manifest");
    rp->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
    rp->add_option("--out", out_dir, "Output directory");
    rp->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1u, 1024u));

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << Json{{"status", "error"}, {"kind", "config"}, {"message", e.what()}}.dump() << '\n';
        return kExitConfig;
    }

    ExperimentSpec spec;
    spec.jobs = jobs;
    spec.gnuplot = gnuplot;
    if (out_dir.empty()) {
        const char* env = std::getenv(kOutputDirEnv);
        out_dir = env && *env ? env : "out";
    }
    spec.out_dir = out_dir;

    CLI::App* sub = app.get_subcommands().front();
    spec.command = sub->get_name();
    try {
        if (spec.command == "replay") {
            const Json m = load_scenario_json(manifest_path);
            if (!m.contains("command") || !m.contains("scenario") || !m.contains("options"))
                throw ConfigError("'" + manifest_path + "' is not a manifest");
            spec.command = m.at("command").get<std::string>();
            spec.scenario = m.at("scenario");
            spec.options = m.at("options");
            return execute(spec, out, err);
        }

        spec.scenario = load_scenario_json(scenario_path);
        for (const auto& s : sets)
            apply_override(spec.scenario, s);
        if (seed) {
            apply_override(spec.scenario, "episode.seed=" + std::to_string(*seed));
            apply_override(spec.scenario, "platform.seed=" + std::to_string(*seed));
        }
    } catch (const ConfigError& e) {
        write_error({}, err, "config", e.what());
        return kExitConfig;
    }

    if (sub == mc)
        options = {{"variant", variant}, {"eps", eps}, {"n", n}, {"random_start", random_start},
                   {"start_offset", start_offset}};
    else if (sub == ws)
        options = {{"resolution", resolution}, {"grid", grid}};
    else if (sub == itf)
        options = {{"duration", duration}};
    else if (sub == ska)
        options = {{"values", ka_values}, {"kf", kf_fixed}, {"settle", settle}};
    else if (sub == skf)
        options = {{"values", kf_values}, {"ka", ka_fixed}, {"settle", settle}};
    else if (sub == cal)
        options = {{"sigmas", sigmas}, {"trials", trials}};
    spec.options = options;
    return execute(spec, out, err);
}

}  // namespace endo::cli
