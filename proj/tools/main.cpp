// evoell: experiment runner for the stochastically evolving ellipsoid.
//
// Subcommands:
//   run            one trajectory -> JSONL + density report + manifest
//   ensemble       many trajectories in parallel -> JSONL files + CSV curves
//   verify         fast built-in invariant suites
//   siegel         Monte Carlo lattice-sum average vs. its volume target
//   shell-integral reduced shell integral and its polar cross-check
//
// All numeric output is printed with %.17g so identical flags give
// byte-identical files.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "evoell/analysis.hpp"
#include "evoell/errors.hpp"
#include "evoell/evolve.hpp"
#include "evoell/lattice.hpp"
#include "evoell/rng.hpp"
#include "evoell/sampler.hpp"
#include "evoell/symcore.hpp"

namespace fs = std::filesystem;
using namespace evoell;

namespace {

constexpr const char* kVersion = "evoell 1.0.0";

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

std::string real17(double x) { return fmt("%.17g", x); }

struct Options {
    int n = 0;
    std::string lattice = "Zn";
    std::int64_t p = 0;
    std::uint64_t seed = 0;
    double dt_max = 0.0;
    double dt_min = 0.0;
    double eps_contact = 1e-9;
    double eta = 0.5;
    double alpha = 0.0;
    std::string a0 = "paper";
    std::string max_time = "paper";
    int count = 1;
    std::string out = ".";
    std::string suite = "all";
    std::int64_t samples = 10000;
    double radius = 1.0;
    double c0 = 2.0;
};

void add_common_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--n", o.n, "ambient dimension");
    cmd->add_option("--lattice", o.lattice, "Zn|Dn|E8|exact2d|hecke|file:PATH");
    cmd->add_option("--p", o.p, "Hecke modulus (0: smallest prime >= n^4)");
    cmd->add_option("--seed", o.seed, "64-bit seed");
    cmd->add_option("--out", o.out, "output directory");
    cmd->set_config("--config", "", "key=value config file (keys = flag names)");
    cmd->allow_config_extras(false);
}

void add_evolve_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--dt-max", o.dt_max, "max step size (0: T/2000)");
    cmd->add_option("--dt-min", o.dt_min, "min step size (0: dt-max*1e-6)");
    cmd->add_option("--eps-contact", o.eps_contact, "contact admission tolerance");
    cmd->add_option("--eta", o.eta, "watch-list inflation margin");
    cmd->add_option("--alpha", o.alpha, "drift exponent (0: plain projection)");
    cmd->add_option("--a0", o.a0, "number|paper|auto");
    cmd->add_option("--max-time", o.max_time, "number|paper (= 16 n^-2 log n)");
}

EvolveConfig make_evolve_config(const Options& o) {
    EvolveConfig cfg;
    cfg.dt_max = o.dt_max;
    cfg.dt_min = o.dt_min;
    cfg.eps_contact = o.eps_contact;
    cfg.eta = o.eta;
    cfg.alpha = o.alpha;
    if (o.a0 == "paper") {
        cfg.a0_policy = EvolveConfig::A0Policy::Paper;
    } else if (o.a0 == "auto") {
        cfg.a0_policy = EvolveConfig::A0Policy::Auto;
    } else {
        cfg.a0_policy = EvolveConfig::A0Policy::Fixed;
        cfg.a0_value = std::stod(o.a0);
    }
    if (o.max_time == "paper")
        cfg.max_time = 0.0;  // resolved to 16 n^-2 log n
    else
        cfg.max_time = std::stod(o.max_time);
    return cfg;
}

// Sampled sources draw from a stream disjoint from every trajectory stream.
constexpr std::uint64_t kSamplerStreamBase = 0x53414d504c455200ull;

LatticeBasis load_lattice(const Options& o, std::uint64_t sample_index) {
    const std::string& src = o.lattice;
    if (src == "Zn" || src == "Dn" || src == "E8") {
        NamedLattice kind = src == "Zn"   ? NamedLattice::Zn
                            : src == "Dn" ? NamedLattice::Dn
                                          : NamedLattice::E8;
        int n = src == "E8" ? 8 : o.n;
        if (n < 1)
            throw UsageError("--n is required for named lattices");
        LatticeBasis l = named_lattice(kind, n);
        return normalize_covolume(l, vol_ball(n));
    }
    if (src == "exact2d" || src == "hecke") {
        int n = src == "exact2d" ? 2 : o.n;
        if (n < 1)
            throw UsageError("--n is required for sampled lattices");
        SamplerKind kind = src == "exact2d" ? SamplerKind::exact2d()
                                            : SamplerKind::hecke(o.p);
        RngStream rng(o.seed, kSamplerStreamBase + sample_index);
        return sample_lattice(n, kind, rng);
    }
    if (src.rfind("file:", 0) == 0) {
        LatticeBasis l = read_basis_file(src.substr(5));
        return normalize_covolume(l, vol_ball(l.dim()));
    }
    throw UsageError("unknown --lattice source: " + src);
}

int effective_n(const Options& o) {
    if (o.lattice == "E8")
        return 8;
    if (o.lattice == "exact2d")
        return 2;
    if (o.lattice.rfind("file:", 0) == 0)
        return read_basis_file(o.lattice.substr(5)).dim();
    return o.n;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string config_echo_json(const Options& o, const std::string& command) {
    std::ostringstream os;
    os << "{\"command\": \"" << command << "\", \"n\": " << o.n
       << ", \"lattice\": \"" << o.lattice << "\", \"p\": " << o.p
       << ", \"seed\": " << o.seed << ", \"dt_max\": " << real17(o.dt_max)
       << ", \"dt_min\": " << real17(o.dt_min)
       << ", \"eps_contact\": " << real17(o.eps_contact)
       << ", \"eta\": " << real17(o.eta) << ", \"alpha\": " << real17(o.alpha)
       << ", \"a0\": \"" << o.a0 << "\", \"max_time\": \"" << o.max_time
       << "\", \"count\": " << o.count << ", \"samples\": " << o.samples
       << ", \"radius\": " << real17(o.radius) << ", \"c0\": " << real17(o.c0)
       << "}";
    return os.str();
}

void write_manifest(const fs::path& dir, const Options& o, const std::string& command,
                    const std::string& started, const std::string& ended) {
    std::ofstream f(dir / "manifest.json");
    f << "{\n"
      << "  \"version\": \"" << kVersion << "\",\n"
      << "  \"seed\": " << o.seed << ",\n"
      << "  \"started\": \"" << started << "\",\n"
      << "  \"ended\": \"" << ended << "\",\n"
      << "  \"config\": " << config_echo_json(o, command) << "\n"
      << "}\n";
}

void write_trajectory_jsonl(const fs::path& path, const Trajectory& traj,
                            std::uint64_t stream_id) {
    std::ofstream f(path);
    for (const TrajectoryRecord& r : traj.records)
        f << "{\"t\": " << real17(r.t) << ", \"logdet\": " << real17(r.logdet)
          << ", \"contacts\": " << r.contacts << ", \"dimF\": " << r.dim_f
          << ", \"opdev\": " << real17(r.opdev) << ", \"event\": \"" << r.event
          << "\"}\n";
    const ProcessState& s = *traj.final_state;
    f << "{\"final_state\": {\"n\": " << traj.n << ", \"stream\": " << stream_id
      << ", \"t\": " << real17(s.t) << ", \"a0\": " << real17(traj.a0)
      << ", \"frozen\": " << (traj.frozen ? "true" : "false") << ", \"a_packed\": [";
    const Eigen::VectorXd packed = [&] {
        Eigen::VectorXd v(s.a.packed_size());
        int k = 0;
        for (int i = 0; i < s.a.dim(); ++i)
            for (int j = i; j < s.a.dim(); ++j)
                v[k++] = s.a(i, j);
        return v;
    }();
    for (int i = 0; i < packed.size(); ++i)
        f << (i ? ", " : "") << real17(packed[i]);
    f << "], \"contacts\": [";
    bool first = true;
    for (const LatticePoint& p : s.contacts.representatives()) {
        f << (first ? "[" : ", [");
        for (int i = 0; i < p.coords.size(); ++i)
            f << (i ? ", " : "") << p.coords[i];
        f << "]";
        first = false;
    }
    f << "]}}\n";
}

void write_density_json(const fs::path& path, const DensityReport& r) {
    std::ofstream f(path);
    f << "{\"n\": " << r.n << ", \"final_volume_ratio\": " << real17(r.final_volume_ratio)
      << ", \"packing_density\": " << real17(r.packing_density)
      << ", \"minkowski_ratio\": " << real17(r.minkowski_ratio)
      << ", \"n2_ratio\": " << real17(r.n2_ratio) << "}\n";
}

void write_ensemble_csv(const fs::path& path, const EnsembleStats& s) {
    std::ofstream f(path);
    f << "t,mean_logdet,se_logdet,mean_contacts,mean_dimF\n";
    for (size_t k = 0; k < s.t.size(); ++k)
        f << real17(s.t[k]) << "," << real17(s.mean_logdet[k]) << ","
          << real17(s.se_logdet[k]) << "," << real17(s.mean_contacts[k]) << ","
          << real17(s.mean_dim_f[k]) << "\n";
}

int cmd_run(const Options& o) {
    const std::string started = iso_now();
    LatticeBasis lattice = load_lattice(o, 0);
    EvolveConfig cfg = make_evolve_config(o);
    Trajectory traj = run(lattice, cfg, RngStream(o.seed, 0));

    fs::create_directories(o.out);
    write_trajectory_jsonl(fs::path(o.out) / "trajectory.jsonl", traj, 0);
    write_density_json(fs::path(o.out) / "density.json",
                       density_report(traj.final_state->a, lattice));
    write_manifest(o.out, o, "run", started, iso_now());
    std::cout << (traj.frozen ? "frozen" : "timeout") << " t=" << real17(traj.records.back().t)
              << " contacts=" << traj.records.back().contacts << "\n";
    return 0;
}

int cmd_ensemble(const Options& o) {
    const std::string started = iso_now();
    if (o.count < 1)
        throw UsageError("--count must be >= 1");
    EvolveConfig cfg = make_evolve_config(o);
    const bool sampled = o.lattice == "exact2d" || o.lattice == "hecke";
    LatticeBasis shared = sampled ? named_lattice(NamedLattice::Zn, 1)
                                  : load_lattice(o, 0);

    std::vector<Trajectory> trajectories(o.count);
    std::vector<std::string> errors(o.count);
    std::atomic<int> next{0};
    const unsigned workers =
        std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                           static_cast<unsigned>(o.count));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < o.count; i = next.fetch_add(1)) {
                try {
                    LatticeBasis l = sampled
                                         ? load_lattice(o, static_cast<std::uint64_t>(i))
                                         : shared;
                    trajectories[i] =
                        run(l, cfg, RngStream(o.seed, static_cast<std::uint64_t>(i)));
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    for (int i = 0; i < o.count; ++i)
        if (!errors[i].empty())
            throw NumericalError("trajectory " + std::to_string(i) + ": " + errors[i]);

    fs::create_directories(o.out);
    for (int i = 0; i < o.count; ++i)
        write_trajectory_jsonl(fs::path(o.out) / fmt("traj_%04d.jsonl", i),
                               trajectories[i], static_cast<std::uint64_t>(i));
    const int n = trajectories.front().n;
    const double horizon = cfg.resolved(n).max_time;
    write_ensemble_csv(fs::path(o.out) / "ensemble.csv",
                       ensemble_stats(trajectories, horizon));
    write_manifest(o.out, o, "ensemble", started, iso_now());
    int frozen = 0;
    for (const Trajectory& t : trajectories)
        frozen += t.frozen ? 1 : 0;
    std::cout << "trajectories=" << o.count << " frozen=" << frozen << "\n";
    return 0;
}

int cmd_siegel(const Options& o) {
    if (o.n < 2)
        throw UsageError("--n is required");
    SamplerKind kind;
    std::string kind_name;
    if (o.lattice == "exact2d" || (o.lattice == "Zn" && o.n == 2 && o.p == 0)) {
        kind = SamplerKind::exact2d();
        kind_name = "exact2d";
    } else if (o.lattice == "hecke" || o.lattice == "Zn") {
        kind = SamplerKind::hecke(o.p);
        kind_name = "hecke";
    } else {
        throw UsageError("siegel supports --lattice exact2d|hecke");
    }
    if (kind_name == "exact2d" && o.n != 2)
        throw UsageError("exact2d sampler requires --n 2");
    RngStream rng(o.seed, 0);
    SiegelResult r =
        siegel_mc(o.n, kind, RadialStepFn::ball_indicator(o.radius), o.samples, rng);
    std::cout << "{\"n\": " << o.n << ", \"kind\": \"" << kind_name
              << "\", \"samples\": " << r.samples << ", \"estimate\": "
              << real17(r.estimate) << ", \"se\": " << real17(r.se)
              << ", \"target\": " << real17(r.target) << "}\n";
    return 0;
}

int cmd_shell_integral(const Options& o) {
    if (o.n < 2)
        throw UsageError("--n is required");
    const double t = o.max_time == "paper" ? paper_time_horizon(o.n)
                                           : std::stod(o.max_time);
    const double a0 = (o.a0 == "paper" || o.a0 == "auto") ? paper_a0(o.n)
                                                          : std::stod(o.a0);
    const double reduced = shell_integral(o.n, t, a0, o.c0);
    const double normalized = reduced / std::exp(o.n * o.n * t / 8.0);
    std::cout << "{\"n\": " << o.n << ", \"t\": " << real17(t) << ", \"a0\": "
              << real17(a0) << ", \"c0\": " << real17(o.c0) << ", \"integral\": "
              << real17(reduced) << ", \"normalized_ratio\": " << real17(normalized);
    if (o.n <= 16)
        std::cout << ", \"polar\": " << real17(shell_integral_polar(o.n, t, a0, o.c0));
    std::cout << "}\n";
    return 0;
}

// --- verify: fast self-contained invariant suites ------------------------

#define VERIFY(cond)                                                      \
    do {                                                                  \
        if (!(cond))                                                      \
            throw NumericalError(std::string("verify failed: ") + #cond); \
    } while (0)

void verify_symcore() {
    RngStream rng(7, 0);
    SymMatrix a = dyson_increment(4, 1.0, rng);
    VERIFY(frob_norm(SymMatrix::from_iso(4, a.iso()) - a) < 1e-14);
    Eigen::Vector2d e1(1, 0), e2(0, 1);
    VERIFY(std::abs(inner(sym_tensor(e1, e2), sym_tensor(e1, e2)) - 0.5) < 1e-14);
    SymMatrix two = SymMatrix::identity(3);
    two *= 2.0;
    VERIFY(std::abs(log_det(two) - 3.0 * std::log(2.0)) < 1e-13);
    double sum = 0.0;
    const int reps = 20000;
    for (int i = 0; i < reps; ++i) {
        SymMatrix w = dyson_increment(3, 0.3, rng);
        sum += w(0, 1) * w(0, 1);
    }
    VERIFY(std::abs(sum / reps - 0.15) < 0.01);
}

void verify_lattice() {
    LatticeBasis z2 = named_lattice(NamedLattice::Zn, 2);
    auto pts = enumerate_in_ellipsoid(z2, SymMatrix::identity(2), 6.26);
    VERIFY(pts.size() == 20);
    VERIFY(shortest_vector(z2).embedding.squaredNorm() == 1.0);
    LatticeBasis e8 = named_lattice(NamedLattice::E8, 8);
    VERIFY(std::abs(e8.covolume() - 1.0) < 1e-12);
    VERIFY(std::abs(shortest_vector(e8).embedding.squaredNorm() - 2.0) < 1e-12);
    Eigen::MatrixXd skew(2, 2);
    skew << 1, 0, 1000, 1;
    LatticeBasis red = lll_reduce(LatticeBasis(skew));
    VERIFY(std::abs(red.covolume() - 1.0) < 1e-12);
    VERIFY(shortest_vector(red).embedding.squaredNorm() < 1.0 + 1e-12);
}

void verify_sampler() {
    RngStream rng(11, 0);
    for (int i = 0; i < 5; ++i) {
        VERIFY(std::abs(sample_lattice(2, SamplerKind::exact2d(), rng).covolume() -
                        vol_ball(2)) < 1e-9);
        VERIFY(std::abs(sample_lattice(3, SamplerKind::hecke(), rng).covolume() -
                        vol_ball(3)) < 1e-9);
    }
    SiegelResult r = siegel_mc(2, SamplerKind::exact2d(),
                               RadialStepFn::ball_indicator(1.5), 4000, rng);
    VERIFY(std::abs(r.estimate - 2.25) <= 5.0 * r.se);
}

void verify_evolve() {
    LatticeBasis z2 = normalize_covolume(named_lattice(NamedLattice::Zn, 2), vol_ball(2));
    EvolveConfig cfg;
    cfg.a0_policy = EvolveConfig::A0Policy::Auto;
    cfg.max_time = 40.0;
    Trajectory a = run(z2, cfg, RngStream(3, 0));
    VERIFY(a.frozen);
    VERIFY(a.records.back().contacts == 6);
    Trajectory b = run(z2, cfg, RngStream(3, 0));
    VERIFY(a.records.size() == b.records.size());
    VERIFY(a.records.back().logdet == b.records.back().logdet);
    for (const LatticePoint& p : a.final_state->contacts.representatives())
        VERIFY(std::abs(quad_form(a.final_state->a, p.embedding) - 1.0) < 1e-10);
}

void verify_analysis() {
    VERIFY(phi(0.0) == 0.5);
    VERIFY(gaussian_tail(0.0) == 0.5);
    for (int i = 0; i <= 100; ++i)
        VERIFY(gaussian_tail(0.1 * i) <= phi(0.1 * i) + 1e-15);
    VERIFY(std::abs(shell_integral(8, 0.04, paper_a0(8)) -
                    shell_integral_polar(8, 0.04, paper_a0(8))) <=
           1e-6 * shell_integral(8, 0.04, paper_a0(8)));
    LatticeBasis z2 = named_lattice(NamedLattice::Zn, 2);
    DensityReport r = density_report(SymMatrix::identity(2), z2);
    VERIFY(std::abs(r.packing_density - M_PI / 4.0) < 1e-14);
}

int cmd_verify(const Options& o) {
    struct Suite {
        const char* name;
        void (*fn)();
    };
    const Suite suites[] = {{"symcore", verify_symcore},
                            {"lattice", verify_lattice},
                            {"sampler", verify_sampler},
                            {"evolve", verify_evolve},
                            {"analysis", verify_analysis}};
    bool matched = false;
    for (const Suite& s : suites) {
        if (o.suite != "all" && o.suite != s.name)
            continue;
        matched = true;
        s.fn();
        std::cout << s.name << ": ok\n";
    }
    if (!matched)
        throw UsageError("unknown --suite: " + o.suite);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastically evolving ellipsoid simulator"};
    app.require_subcommand(1);

    Options o;
    CLI::App* c_run = app.add_subcommand("run", "run one trajectory");
    add_common_flags(c_run, o);
    add_evolve_flags(c_run, o);

    CLI::App* c_ens = app.add_subcommand("ensemble", "run an ensemble of trajectories");
    add_common_flags(c_ens, o);
    add_evolve_flags(c_ens, o);
    c_ens->add_option("--count", o.count, "number of trajectories");

    CLI::App* c_ver = app.add_subcommand("verify", "run built-in invariant suites");
    add_common_flags(c_ver, o);
    c_ver->add_option("--suite", o.suite, "symcore|lattice|sampler|evolve|analysis|all");

    CLI::App* c_sie = app.add_subcommand("siegel", "Monte Carlo Siegel average");
    add_common_flags(c_sie, o);
    c_sie->add_option("--samples", o.samples, "Monte Carlo sample count");
    c_sie->add_option("--radius", o.radius, "ball-indicator radius");

    CLI::App* c_shl = app.add_subcommand("shell-integral", "reduced shell integral");
    add_common_flags(c_shl, o);
    c_shl->add_option("--a0", o.a0, "number|paper");
    c_shl->add_option("--max-time", o.max_time, "shell time parameter t: number|paper");
    c_shl->add_option("--c0", o.c0, "operator-norm tail constant");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (c_run->parsed())
            return cmd_run(o);
        if (c_ens->parsed())
            return cmd_ensemble(o);
        if (c_ver->parsed())
            return cmd_verify(o);
        if (c_sie->parsed())
            return cmd_siegel(o);
        return cmd_shell_integral(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: bad numeric argument: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 3;
    }
}
