// Command-line front end: builds coefficient tables, evaluates densities,
// reproduces the reference tables, and runs the exact-oracle checks.
//
// Exit codes: 0 ok, 2 bad configuration/usage, 3 I/O failure, 4 regime
// precondition violated.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "asymfp/analytics.hpp"
#include "asymfp/coefficients.hpp"
#include "asymfp/error_control.hpp"
#include "asymfp/oracle.hpp"
#include "asymfp/params.hpp"
#include "asymfp/series.hpp"

namespace {

using nlohmann::json;

class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Config {
    double sigma = 0.0;
    bool sigma_set = false;
    double epsilon = 0.005;
    double eta = 0.0;
    int N = 100;
    int K = 4;
    double t = 0.0;
    bool t_set = false;
    double t_days = 0.0;
    double t_months = 0.0;
    double tol = 0.05;
    double grid_sd = 8.0;
    int grid_points = 2001;
    unsigned prec_bits = 256;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::string out;
    std::string format = "csv";

    // Command-specific knobs.
    bool full = false;
    double x = 0.0;
    std::vector<double> qs;
    std::string side = "left";
    double bulk = 3.0;
    double mass_tol = 1e-13;
    int k_max = 9;
    int n_min = 10;
    int n_max = 100;
    int n_step = 10;
    double x_sd = 5.0;
    double stab_tol = 1e-12;
    std::string symbol_out;
    std::string config_path;

    asymfp::ModelParams params() const {
        if (!sigma_set) throw CLI::ValidationError("--sigma is required (flag or config file)");
        return asymfp::ModelParams{sigma, epsilon, eta};
    }

    asymfp::Truncation trunc() const { return asymfp::Truncation{N, K, prec_bits}; }

    double horizon() const {
        int given = (t_set ? 1 : 0) + (t_days > 0 ? 1 : 0) + (t_months > 0 ? 1 : 0);
        if (given == 0) throw CLI::ValidationError("one of --t / --t-days / --t-months is required");
        if (given > 1) throw CLI::ValidationError("give only one of --t / --t-days / --t-months");
        if (t_set) return t;
        if (t_days > 0) return 0.004 * t_days;  // 1 day = 0.004 time units
        return 0.08 * t_months;                 // 1 month = 0.08 time units
    }

    std::vector<double> grid_xs(double horizon_t) const {
        if (grid_points < 3 || grid_points % 2 == 0)
            throw CLI::ValidationError("--grid-points must be odd and >= 3");
        return asymfp::symmetric_grid(params(), horizon_t, grid_sd, grid_points);
    }
};

// --config <file> is applied before flag parsing, so flags override it.
void apply_config_file(Config& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw CLI::ValidationError(std::string("config file is not valid JSON: ") + e.what());
    }
    for (const auto& [key, value] : doc.items()) {
        if (key == "sigma") {
            cfg.sigma = value.get<double>();
            cfg.sigma_set = true;
        } else if (key == "epsilon") {
            cfg.epsilon = value.get<double>();
        } else if (key == "eta") {
            cfg.eta = value.get<double>();
        } else if (key == "N") {
            cfg.N = value.get<int>();
        } else if (key == "K") {
            cfg.K = value.get<int>();
        } else if (key == "t") {
            cfg.t = value.get<double>();
            cfg.t_set = true;
        } else if (key == "tol") {
            cfg.tol = value.get<double>();
        } else if (key == "grid_sd") {
            cfg.grid_sd = value.get<double>();
        } else if (key == "grid_points") {
            cfg.grid_points = value.get<int>();
        } else if (key == "prec_bits") {
            cfg.prec_bits = value.get<unsigned>();
        } else if (key == "threads") {
            cfg.threads = value.get<unsigned>();
        } else if (key == "out") {
            cfg.out = value.get<std::string>();
        } else if (key == "format") {
            cfg.format = value.get<std::string>();
        } else {
            throw CLI::ValidationError("unknown config key: " + key);
        }
    }
}

void add_common_options(CLI::App* cmd, Config& cfg) {
    cmd->add_option("--config", cfg.config_path,
                    "JSON config file mirroring the flags (flags override file values)");
    cmd->add_option_function<double>(
           "--sigma", [&cfg](double v) { cfg.sigma = v; cfg.sigma_set = true; },
           "volatility per sqrt(time unit)");
    cmd->add_option("--epsilon", cfg.epsilon, "bid-offer spread width (price units)");
    cmd->add_option("--eta", cfg.eta, "buyer/seller imbalance in [-1, 1]");
    cmd->add_option("--N", cfg.N, "series truncation depth (max row index)");
    cmd->add_option("--K", cfg.K, "equation truncation order");
    cmd->add_option_function<double>("--t", [&cfg](double v) { cfg.t = v; cfg.t_set = true; },
                                     "horizon in time units");
    cmd->add_option("--t-days", cfg.t_days, "horizon in days (1 day = 0.004)");
    cmd->add_option("--t-months", cfg.t_months, "horizon in months (1 month = 0.08)");
    cmd->add_option("--tol", cfg.tol, "relative error tolerance for cutoff estimates");
    cmd->add_option("--grid-sd", cfg.grid_sd, "grid half-span in standard deviations");
    cmd->add_option("--grid-points", cfg.grid_points, "grid point count (odd)");
    cmd->add_option("--prec-bits", cfg.prec_bits, "mantissa bits for coefficient arithmetic");
    cmd->add_option("--threads", cfg.threads, "worker threads for grid evaluation");
    cmd->add_option("--out", cfg.out, "output file (default: stdout)");
    cmd->add_option("--format", cfg.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
}

void write_output(const std::string& path, const std::string& payload) {
    if (path.empty()) {
        std::cout << payload;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open output file: " + path);
    out << payload;
    if (!out) throw io_error("failed while writing: " + path);
}

std::string grid_to_payload(const asymfp::DensityGrid& grid, const std::string& format,
                            int digits = 30) {
    if (format == "json") {
        json points = json::array();
        for (const auto& p : grid.points)
            points.push_back({{"x", p.x},
                              {"density", asymfp::to_decimal(p.value, digits)},
                              {"max_monomial", asymfp::to_decimal(p.max_monomial, digits)},
                              {"final_over_max", asymfp::to_decimal(p.final_over_max, digits)}});
        return json{{"t", grid.t}, {"table", grid.table_id}, {"points", points}}.dump(2) + "\n";
    }
    std::ostringstream os;
    asymfp::write_grid_csv(os, grid, digits);
    return os.str();
}

int cmd_coeffs(const Config& cfg) {
    const auto params = cfg.params();
    const auto trunc = cfg.trunc();
    const auto table = cfg.full ? asymfp::CoefficientTable::build_full(params, trunc)
                                : asymfp::CoefficientTable::build_truncated(params, trunc);
    const asymfp::Real residual = asymfp::residual_check(table);
    write_output(cfg.out, table.to_json().dump(2) + "\n");
    std::cerr << "rows=" << table.rows() << " form=" << (table.is_full() ? "full" : "truncated")
              << " residual=" << asymfp::to_decimal(residual, 6) << "\n";
    return 0;
}

int cmd_density(const Config& cfg) {
    const double t = cfg.horizon();
    const auto table = cfg.full
                           ? asymfp::CoefficientTable::build_full(cfg.params(), cfg.trunc())
                           : asymfp::CoefficientTable::build_truncated(cfg.params(), cfg.trunc());
    const auto grid = asymfp::eval_grid(table, cfg.grid_xs(t), t, cfg.threads);
    write_output(cfg.out, grid_to_payload(grid, cfg.format));
    return 0;
}

int cmd_tails(const Config& cfg) {
    const double t = cfg.horizon();
    const auto table = asymfp::CoefficientTable::build_truncated(cfg.params(), cfg.trunc());
    const auto grid = asymfp::eval_grid(table, cfg.grid_xs(t), t, cfg.threads);

    std::vector<double> qs = cfg.qs.empty() ? std::vector<double>{3.0, 4.0} : cfg.qs;
    std::vector<asymfp::TailSide> sides;
    if (cfg.side == "left") sides = {asymfp::TailSide::left};
    else if (cfg.side == "right") sides = {asymfp::TailSide::right};
    else if (cfg.side == "both") sides = {asymfp::TailSide::left, asymfp::TailSide::right};
    else throw CLI::ValidationError("--side must be left, right, or both");

    json rows = json::array();
    std::ostringstream csv;
    csv << "q,side,probability,gaussian\n";
    for (double q : qs) {
        for (auto side : sides) {
            const asymfp::Real prob = asymfp::tail_probability(grid, asymfp::TailQuery{q, side});
            const asymfp::Real gauss = asymfp::gaussian_tail(q);
            const char* side_name = side == asymfp::TailSide::left ? "left" : "right";
            csv << q << ',' << side_name << ',' << asymfp::to_decimal(prob, 20) << ','
                << asymfp::to_decimal(gauss, 20) << '\n';
            rows.push_back({{"q", q},
                            {"side", side_name},
                            {"probability", asymfp::to_decimal(prob, 20)},
                            {"gaussian", asymfp::to_decimal(gauss, 20)}});
        }
    }
    write_output(cfg.out, cfg.format == "json" ? rows.dump(2) + "\n" : csv.str());
    return 0;
}

int cmd_moments(const Config& cfg) {
    const double t = cfg.horizon();
    const auto table = asymfp::CoefficientTable::build_truncated(cfg.params(), cfg.trunc());
    const auto grid = asymfp::eval_grid(table, cfg.grid_xs(t), t, cfg.threads);
    const auto report = asymfp::empirical_moments(grid);
    const json doc = asymfp::to_json(report);
    if (cfg.format == "csv") {
        std::ostringstream csv;
        csv << "field,value\n";
        for (const auto& [key, value] : doc.items())
            csv << key << ",\"" << (value.is_string() ? value.get<std::string>() : value.dump())
                << "\"\n";
        write_output(cfg.out, csv.str());
        return 0;
    }
    write_output(cfg.out, doc.dump(2) + "\n");
    return 0;
}

int cmd_cutoff(const Config& cfg) {
    const auto params = cfg.params();
    const int need_rows = std::max(cfg.k_max, cfg.K) + 2;
    asymfp::Truncation trunc{std::max(cfg.N, need_rows), 1, cfg.prec_bits};
    const auto table = asymfp::CoefficientTable::build_full(params, trunc);
    const auto est = asymfp::ratio_coefficients(table, cfg.K + 1);
    const asymfp::Real tmin = asymfp::min_time(est, cfg.x, cfg.tol);

    json doc{{"K", cfg.K},
             {"c1", asymfp::to_decimal(est.c1, 20)},
             {"c2", asymfp::to_decimal(est.c2, 20)},
             {"x", cfg.x},
             {"tolerance", cfg.tol},
             {"min_t", asymfp::to_decimal(tmin, 20)}};
    std::ostringstream text;
    text << "K=" << cfg.K << " c1=" << asymfp::to_decimal(est.c1, 10)
         << " c2=" << asymfp::to_decimal(est.c2, 10)
         << " min_t=" << asymfp::to_decimal(tmin, 10) << "\n";
    if (cfg.t_set || cfg.t_days > 0 || cfg.t_months > 0) {
        const double t = cfg.horizon();
        const int safe = asymfp::max_safe_k(table, t, cfg.x, cfg.tol, cfg.k_max);
        doc["t"] = t;
        doc["K_safe"] = safe;
        text << "t=" << t << " K_safe=" << safe << "\n";
    }
    write_output(cfg.out, cfg.format == "json" ? doc.dump(2) + "\n" : text.str());
    return 0;
}

int cmd_oracle(const Config& cfg) {
    const auto params = cfg.params();
    const double t = cfg.horizon();

    // Regime gate first: the comparison is meaningless for nearly-atomic laws.
    const double regime = params.sigma * params.sigma * t / (params.epsilon * params.epsilon);
    if (!(regime >= 25.0)) {
        std::ostringstream os;
        os << "local-limit regime requires sigma^2*t/epsilon^2 >= 25, got " << regime;
        throw asymfp::regime_error(os.str());
    }

    const asymfp::Real taylor_residual = asymfp::symbol_taylor_check(params, std::max(cfg.K, 5));
    const auto lattice = asymfp::lattice_pmf(params, t, cfg.mass_tol, cfg.prec_bits);
    const auto table = asymfp::CoefficientTable::build_truncated(params, cfg.trunc());
    const auto grid = asymfp::eval_grid(table, cfg.grid_xs(t), t, cfg.threads);
    const auto cmp = asymfp::compare_series_to_oracle(grid, lattice, cfg.bulk);
    const auto kappa_lattice = asymfp::lattice_cumulants(lattice);
    const auto kappa_analytic = asymfp::oracle_cumulants(params, t);

    if (!cfg.out.empty()) {
        std::ostringstream csv;
        csv << "j,x,mass\n";
        for (std::size_t i = 0; i < lattice.masses.size(); ++i)
            csv << (lattice.j_min + static_cast<long>(i)) << ','
                << asymfp::to_decimal(lattice.support[i], 20) << ','
                << asymfp::to_decimal(lattice.masses[i], 30) << '\n';
        write_output(cfg.out, csv.str());
    }
    if (!cfg.symbol_out.empty()) {
        std::ostringstream csv;
        csv << "omega,re,im\n";
        asymfp::PrecisionGuard guard(cfg.prec_bits);
        const double omega_max = 2.0 * M_PI / params.epsilon;
        for (int i = 0; i <= 400; ++i) {
            const double omega = -omega_max + 2.0 * omega_max * i / 400;
            const auto v = asymfp::symbol(params, asymfp::Real(omega));
            csv << omega << ',' << asymfp::to_decimal(v.re, 20) << ','
                << asymfp::to_decimal(v.im, 20) << '\n';
        }
        write_output(cfg.symbol_out, csv.str());
    }

    std::ostringstream report;
    report << "symbol_taylor_residual=" << asymfp::to_decimal(taylor_residual, 6) << "\n"
           << "lattice_points=" << lattice.masses.size()
           << " total_mass=" << asymfp::to_decimal(lattice.total_mass, 20) << "\n"
           << "kappa2_lattice=" << asymfp::to_decimal(kappa_lattice[1], 20)
           << " kappa2_analytic=" << asymfp::to_decimal(kappa_analytic[1], 20) << "\n"
           << "kappa3_lattice=" << asymfp::to_decimal(kappa_lattice[2], 20)
           << " kappa3_analytic=" << asymfp::to_decimal(kappa_analytic[2], 20) << "\n"
           << "compare_points=" << cmp.points
           << " max_rel_error=" << asymfp::to_decimal(cmp.max_rel_error, 6)
           << " mean_rel_error=" << asymfp::to_decimal(cmp.mean_rel_error, 6) << "\n";
    std::cout << report.str();
    return 0;
}

int cmd_table(const Config& cfg, int which) {
    asymfp::TableDocument doc;
    asymfp::ModelParams params = cfg.params();
    if (which == 1) {
        doc = asymfp::reproduce_table1(params, cfg.N, cfg.prec_bits);
    } else if (which == 2) {
        doc = asymfp::reproduce_table2(params, cfg.N, cfg.K, cfg.prec_bits, cfg.grid_points, 7.0,
                                       cfg.threads);
    } else {
        doc = asymfp::reproduce_table3(params, cfg.tol, cfg.prec_bits);
    }
    write_output(cfg.out, doc.csv);
    std::cout << doc.summary.dump(2) << "\n";
    return 0;
}

int cmd_scan_k(const Config& cfg) {
    const auto params = cfg.params();
    const double t = cfg.horizon();
    std::vector<asymfp::CoefficientTable> family;
    family.reserve(static_cast<std::size_t>(cfg.k_max));
    for (int k = 1; k <= cfg.k_max; ++k)
        family.push_back(asymfp::CoefficientTable::build_truncated(
            params, asymfp::Truncation{cfg.N, k, cfg.prec_bits}));
    const auto xs = asymfp::midtail_grid(params, t, 41);
    const auto scan = asymfp::divergence_scan(family, xs, t);
    std::ostringstream csv;
    csv << "K,d_sup\n";
    for (const auto& [k, d] : scan) csv << k << ',' << asymfp::to_decimal(d, 20) << '\n';
    write_output(cfg.out, csv.str());
    return 0;
}

int cmd_scan_n(const Config& cfg) {
    const auto params = cfg.params();
    const double t = cfg.horizon();
    if (cfg.n_step < 1 || cfg.n_min < 1 || cfg.n_max < cfg.n_min)
        throw CLI::ValidationError("invalid --n-min/--n-max/--n-step ladder");
    std::vector<asymfp::CoefficientTable> family;
    for (int n = cfg.n_min; n <= cfg.n_max; n += cfg.n_step)
        family.push_back(asymfp::CoefficientTable::build_truncated(
            params, asymfp::Truncation{n, cfg.K, cfg.prec_bits}));
    const double x = cfg.x_sd * params.sigma * std::sqrt(t);

    std::vector<asymfp::Real> values;
    for (const auto& table : family) values.push_back(asymfp::eval_density(table, x, t).value);
    const auto n0 = asymfp::convergence_in_n(family, x, t, asymfp::Real(cfg.stab_tol));

    asymfp::PrecisionGuard guard(cfg.prec_bits);
    std::ostringstream csv;
    csv << "N,value,rel_change\n";
    for (std::size_t i = 0; i < family.size(); ++i) {
        csv << family[i].rows() << ',' << asymfp::to_decimal(values[i], 25) << ',';
        if (i > 0)
            csv << asymfp::to_decimal(abs(values[i] - values[i - 1]) / abs(values[i]), 6);
        csv << '\n';
    }
    write_output(cfg.out, csv.str());
    std::cout << (n0 ? "stabilized_at=" + std::to_string(*n0) : std::string("not_stabilized"))
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"asymptotic density toolkit for illiquid price dynamics"};
    app.require_subcommand(1);

    Config cfg;

    // Pre-scan for --config so flag values parsed afterwards take precedence.
    try {
        for (int i = 1; i + 1 < argc; ++i) {
            if (std::string(argv[i]) == "--config") apply_config_file(cfg, argv[i + 1]);
        }
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    auto* coeffs = app.add_subcommand("coeffs", "build a coefficient table and write it as JSON");
    add_common_options(coeffs, cfg);
    coeffs->add_flag("--full", cfg.full, "solve the full equation (all derivative orders)");

    auto* density = app.add_subcommand("density", "evaluate the density on a grid");
    add_common_options(density, cfg);
    density->add_flag("--full", cfg.full, "use the full-equation table");

    auto* tails = app.add_subcommand("tails", "tail probabilities at sd multiples");
    add_common_options(tails, cfg);
    tails->add_option("--q", cfg.qs, "sd multiples (repeatable; default 3 4)");
    tails->add_option("--side", cfg.side, "left, right, or both");

    auto* moments = app.add_subcommand("moments", "empirical moments of the density");
    add_common_options(moments, cfg);

    auto* cutoff = app.add_subcommand("cutoff", "ratio estimate, minimum horizon, safe K");
    add_common_options(cutoff, cfg);
    cutoff->add_option("--x", cfg.x, "price offset for the cutoff estimate");
    cutoff->add_option("--k-max", cfg.k_max, "largest K considered for K_safe");

    auto* oracle = app.add_subcommand("oracle", "exact-law checks and series comparison");
    add_common_options(oracle, cfg);
    oracle->add_option("--bulk", cfg.bulk, "comparison window in sd multiples");
    oracle->add_option("--mass-tol", cfg.mass_tol, "discarded lattice mass bound");
    oracle->add_option("--symbol-out", cfg.symbol_out, "write symbol dump CSV here");

    auto* table1 = app.add_subcommand("table1", "reproduce the monomial-size table");
    add_common_options(table1, cfg);
    auto* table2 = app.add_subcommand("table2", "reproduce the tail-percentile table");
    add_common_options(table2, cfg);
    auto* table3 = app.add_subcommand("table3", "reproduce the cutoff-coefficient table");
    add_common_options(table3, cfg);

    auto* scan_k = app.add_subcommand("scan-k", "mid-tail sup differences across K");
    add_common_options(scan_k, cfg);
    scan_k->add_option("--k-max", cfg.k_max, "largest K in the scan");

    auto* scan_n = app.add_subcommand("scan-n", "tail-value stabilization across N");
    add_common_options(scan_n, cfg);
    scan_n->add_option("--n-min", cfg.n_min, "smallest N in the ladder");
    scan_n->add_option("--n-max", cfg.n_max, "largest N in the ladder");
    scan_n->add_option("--n-step", cfg.n_step, "ladder step");
    scan_n->add_option("--x-sd", cfg.x_sd, "evaluation point in sd multiples");
    scan_n->add_option("--stab-tol", cfg.stab_tol, "relative stabilization tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        std::cerr << "error: " << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (coeffs->parsed()) return cmd_coeffs(cfg);
        if (density->parsed()) return cmd_density(cfg);
        if (tails->parsed()) return cmd_tails(cfg);
        if (moments->parsed()) return cmd_moments(cfg);
        if (cutoff->parsed()) return cmd_cutoff(cfg);
        if (oracle->parsed()) return cmd_oracle(cfg);
        if (table1->parsed()) return cmd_table(cfg, 1);
        if (table2->parsed()) return cmd_table(cfg, 2);
        if (table3->parsed()) return cmd_table(cfg, 3);
        if (scan_k->parsed()) return cmd_scan_k(cfg);
        if (scan_n->parsed()) return cmd_scan_n(cfg);
    } catch (const asymfp::regime_error& e) {
        std::cerr << "regime error: " << e.what() << "\n";
        return 4;
    } catch (const io_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
