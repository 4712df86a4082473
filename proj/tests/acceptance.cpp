#include "helpers.hpp"

#include "techdiff/bootstrap.hpp"
#include "techdiff/decay.hpp"
#include "techdiff/did.hpp"
#include "techdiff/errors.hpp"
#include "techdiff/geo.hpp"
#include "techdiff/io.hpp"
#include "techdiff/pipeline.hpp"
#include "techdiff/simulate.hpp"
#include "techdiff/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace techdiff;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// The seeded default simulation, shared by the decay, spectral, placebo and dual-channel checks.
struct DefaultRun {
    RunConfig cfg;
    Dataset data;
    std::vector<TechDecay> decay;
    double generate_seconds = 0.0;
    double decay_seconds = 0.0;

    DefaultRun() {
        cfg.resolve();
        Clock c;
        data = to_dataset(generate(cfg.simulation));
        generate_seconds = c.seconds();
        Clock d;
        decay = decay_stage(data, cfg);
        decay_seconds = d.seconds();
    }
};

// Union of `components` random connected graphs on consecutive vertex ranges.
YearNetwork random_graph(std::size_t n, std::size_t components, std::mt19937_64& rng) {
    YearNetwork net;
    net.n = n;
    std::size_t offset = 0;
    for (std::size_t c = 0; c < components; ++c) {
        const std::size_t size = c + 1 < components ? n / components : n - offset;
        std::uniform_real_distribution<double> density(0.0, 0.1);
        const auto part = testutil::random_connected(size, density(rng), rng);
        for (const auto& e : part.edges)
            net.edges.push_back({e.i + offset, e.j + offset, e.weight});
        offset += size;
    }
    return net;
}

Outcome laplacian_suite() {
    Clock clock;
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> size(8, 200), parts(1, 4);
    std::normal_distribution<double> z(0.0, 1.0);
    int failures = 0;
    double worst_quad = std::numeric_limits<double>::infinity(), worst_row = 0.0, worst_lambda1 = 0.0;
    for (int g = 0; g < 100; ++g) {
        const std::size_t n = size(rng);
        const std::size_t c = parts(rng);
        const auto net = random_graph(n, c, rng);
        const auto L = laplacian_from_edges(n, net.edges);
        const Eigen::MatrixXd D = L.dense();
        const double scale = L.max_abs_row_sum();
        bool ok = (D - D.transpose()).cwiseAbs().maxCoeff() == 0.0;
        for (int v = 0; v < 1000; ++v) {
            Eigen::VectorXd x(static_cast<Eigen::Index>(n));
            for (auto& xi : x)
                xi = z(rng);
            const double q = x.dot(D * x) / (x.squaredNorm() * scale);
            worst_quad = std::min(worst_quad, q);
            ok = ok && q >= -1e-12;
        }
        const double row = (D * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n))).cwiseAbs().maxCoeff();
        worst_row = std::max(worst_row, row);
        ok = ok && row <= 1e-10;
        const auto spec = dense_spectrum(L);
        worst_lambda1 = std::max(worst_lambda1, std::abs(spec.eigenvalues(0)));
        ok = ok && std::abs(spec.eigenvalues(0)) <= 1e-10;
        ok = ok && spec.zero_count == c && component_count(n, net.edges) == c;
        failures += ok ? 0 : 1;
    }
    const double t = clock.seconds();
    return {failures == 0 && t < 30.0,
            fmt("100 graphs, %d failing; min x'Lx/(|x|^2 |L|) %.1e, max |L1| %.1e, max |lambda1| %.1e; %.1f s",
                failures, worst_quad, worst_row, worst_lambda1, t)};
}

Outcome lanczos_vs_dense() {
    Clock clock;
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<std::size_t> size(50, 500);
    std::uniform_real_distribution<double> density(0.005, 0.08);
    double worst = 0.0;
    for (int g = 0; g < 50; ++g) {
        const auto net = testutil::random_connected(size(rng), density(rng), rng);
        const auto L = laplacian_from_edges(net.n, net.edges);
        const double a = lambda2_lanczos(L).lambda2;
        const double b = dense_spectrum(L).lambda2();
        worst = std::max(worst, std::abs(a - b));
    }
    const double t = clock.seconds();
    return {worst <= 1e-8 && t < 60.0, fmt("50 graphs, max |difference| %.2e; %.1f s", worst, t)};
}

Outcome boundary_formula() {
    const double a = spatial_boundary(0.0435, 0.05);
    const double b = spatial_boundary(0.0435, 0.01);
    return {std::abs(a - 68.9) <= 0.05 && std::abs(b - 105.9) <= 0.05,
            fmt("d*(0.05) = %.3f km, d*(0.01) = %.3f km", a, b)};
}

Outcome decay_recovery(const DefaultRun& run) {
    bool ok = run.generate_seconds + run.decay_seconds < 120.0;
    std::ostringstream s;
    for (const auto& t : run.decay) {
        const auto& e = t.fits.exponential;
        ok = ok && e.rate >= 0.040 && e.rate <= 0.047 && e.r_squared >= 0.98 && e.d_star >= 64.0 && e.d_star <= 75.0;
        s << fmt("%s k=%.4f R2=%.4f d*=%.1f; ", t.tech.c_str(), e.rate, e.r_squared, e.d_star);
    }
    s << fmt("%.1f s", run.generate_seconds + run.decay_seconds);
    return {ok, s.str()};
}

Outcome form_ordering(const DefaultRun& run) {
    bool ok = true;
    std::ostringstream s;
    for (const auto& t : run.decay) {
        const auto& f = t.fits;
        ok = ok && f.exponential.r_squared > f.power.r_squared && f.power.r_squared > f.linear.r_squared;
        s << fmt("%s %.3f>%.3f>%.3f; ", t.tech.c_str(), f.exponential.r_squared, f.power.r_squared,
                 f.linear.r_squared);
    }
    auto text = s.str();
    text.resize(text.size() - 2);
    return {ok, text};
}

Outcome lambda2_dynamics(const DefaultRun& run) {
    const auto series = spectral_stage(run.data, run.cfg);
    bool floor_ok = true;
    int in_band = 0, techs = 0;
    std::ostringstream s;
    for (const auto& sr : series) {
        if (sr.tech == "network")
            continue;
        ++techs;
        const double growth = 100.0 * (sr.lambda2.back() / sr.lambda2.front() - 1.0);
        const double corr = pearson(sr.lambda2, sr.adoption);
        floor_ok = floor_ok && growth >= 150.0 && corr >= 0.90;
        in_band += growth >= 300.0 && growth <= 380.0 ? 1 : 0;
        s << fmt("%s +%.0f%% r=%.3f; ", sr.tech.c_str(), growth, corr);
    }
    s << fmt("%d of %d in the 300-380%% band", in_band, techs);
    return {floor_ok && in_band >= 4, s.str()};
}

Outcome mixing_reduction() {
    const double eps = 0.05;
    const double before = mixing_time(5.22, eps);
    const double after = mixing_time(21.61, eps);
    const double pct = 100.0 * (1.0 - after / before);
    return {std::abs(pct - 75.8) <= 0.1, fmt("tau %.4f -> %.4f, reduction %.3f%%", before, after, pct)};
}

Outcome bias_direction() {
    Clock clock;
    int pairs = 0, larger = 0, skipped = 0;
    double bias_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        RunConfig cfg;
        cfg.seed = seed;
        cfg.resolve();
        const auto data = to_dataset(generate(cfg.simulation));
        const auto decay = decay_stage(data, cfg);
        const auto dm = distance_matrix(data.firms);
        for (std::size_t k = 0; k < data.panel.n_techs(); ++k) {
            const auto p = make_did_panel(data.panel, k, dm, data.shock.treated);
            try {
                const double trad = traditional_did(p, cfg.event.spec).effect;
                const double spat = spatial_did(p, cfg.event.spec, decay[k].fits.exponential.rate).effect;
                ++pairs;
                larger += trad > spat ? 1 : 0;
                bias_sum += relative_bias(trad, spat);
            } catch (const EstimationError&) {
                ++skipped;
            }
        }
    }
    const double share = static_cast<double>(larger) / pairs;
    const double mean_bias = bias_sum / pairs;
    const double t = clock.seconds();
    return {share >= 0.90 && mean_bias >= 0.30 && t < 600.0,
            fmt("%d/%d pairs with traditional > spatial (%.1f%%), mean relative bias %.1f%%, %d pairs not estimable; "
                "%.0f s",
                larger, pairs, 100.0 * share, 100.0 * mean_bias, skipped, t)};
}

Outcome pretrend_size_power() {
    const EventSpec spec;
    const int reps = 200;
    int null_rejects = 0, trend_rejects = 0;
    std::mt19937_64 rng(909);
    for (int r = 0; r < reps; ++r) {
        const auto null_panel = testutil::linear_panel(200, 2010, 2023, 2020, 0.1, 0.2, rng);
        null_rejects += pretrend_test(null_panel, spec, 3).p_value < 0.05 ? 1 : 0;
        const auto trend_panel = testutil::linear_panel(200, 2010, 2023, 2020, 0.1, 0.2, rng, 0.02);
        trend_rejects += pretrend_test(trend_panel, spec, 3).p_value < 0.05 ? 1 : 0;
    }
    const double size = 100.0 * null_rejects / reps;
    const double power = 100.0 * trend_rejects / reps;
    return {std::abs(size - 5.0) <= 3.0 && power >= 80.0,
            fmt("rejection rate %.1f%% under the null, %.1f%% under a 2 pp/year pre-trend", size, power)};
}

Outcome placebo_pattern(const EventStudy& study) {
    bool ok = !study.placebos.empty();
    bool saw_actual = false;
    std::ostringstream s;
    for (const auto& p : study.placebos) {
        for (const auto* e : {&p.traditional, &p.spatial}) {
            const bool want = p.actual;
            ok = ok && e->has_ci() && e->significant() == want;
        }
        saw_actual = saw_actual || p.actual;
        s << fmt("%d%s trad %.2f [%.2f, %.2f] spatial %.2f [%.2f, %.2f]; ", p.year, p.actual ? " (shock)" : "",
                 p.traditional.effect, p.traditional.ci_low, p.traditional.ci_high, p.spatial.effect,
                 p.spatial.ci_low, p.spatial.ci_high);
    }
    auto text = s.str();
    text.resize(text.size() - 2);
    return {ok && saw_actual, text};
}

Outcome bootstrap_coverage() {
    Clock clock;
    const EventSpec spec;
    const double beta = 0.1;
    int covered = 0;
    const int reps = 200;
    std::mt19937_64 rng(1111);
    for (int r = 0; r < reps; ++r) {
        const auto p = testutil::linear_panel(200, 2014, 2023, 2020, beta, 0.3, rng);
        BootstrapOptions boot;
        boot.replicates = 200;
        boot.seed = static_cast<std::uint64_t>(r) + 1;
        const auto est = bootstrap_did(p, spec, DidMethod::Traditional, boot);
        covered += est.ci_low <= 100.0 * beta && 100.0 * beta <= est.ci_high ? 1 : 0;
    }
    const double rate = 100.0 * covered / reps;
    const double t = clock.seconds();
    return {rate >= 93.0 && rate <= 97.0 && t < 900.0,
            fmt("%d/%d intervals cover the true effect (%.1f%%); %.0f s", covered, reps, rate, t)};
}

Outcome dual_complementarity(const DefaultRun& run) {
    const auto dm = distance_matrix(run.data.firms);
    bool ok = true;
    std::ostringstream s;
    for (std::size_t k = 0; k < run.data.panel.n_techs(); ++k) {
        auto p = make_did_panel(run.data.panel, k, dm, run.data.shock.treated);
        attach_network(p, run.data.panel, k, run.data.networks, run.cfg.multiplier);
        const auto d = dual_channel_r2(p);
        ok = ok && d.improvement > 0.0;
        s << fmt("%s %+.4f; ", run.data.panel.techs()[k].c_str(), d.improvement);
    }
    auto text = s.str();
    text.resize(text.size() - 2);
    return {ok, "R2 improvement " + text};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const fs::path& scratch) {
    fs::remove_all(scratch);
    RunConfig cfg;
    cfg.bootstrap.replicates = 200;
    cfg.resolve();
    cmd_replicate(cfg, std::nullopt, scratch / "first");
    const auto echo = load_run_config(scratch / "first" / "config_echo.json");
    cmd_replicate(echo, std::nullopt, scratch / "second");
    cmd_replicate(echo, std::nullopt, scratch / "third");
    const auto a = slurp(scratch / "second" / "digests.json");
    const auto b = slurp(scratch / "third" / "digests.json");
    const auto c = slurp(scratch / "first" / "digests.json");
    const auto files = read_json(scratch / "second" / "digests.json")["sha256"].size();
    fs::remove_all(scratch);
    return {!a.empty() && a == b && a == c,
            fmt("two runs from the config echo: digests %s over %zu files (first run %s)",
                a == b ? "identical" : "differ", files, a == c ? "identical too" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
    bool strict = false;
    std::string report_path;
    for (int a = 1; a < argc; ++a) {
        const std::string arg = argv[a];
        if (arg == "--strict")
            strict = true;
        else if (arg == "--report" && a + 1 < argc)
            report_path = argv[++a];
    }
    std::ofstream report_file;
    if (!report_path.empty())
        report_file.open(report_path);
    auto emit = [&](const std::string& line) {
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        if (report_file)
            report_file << line << '\n' << std::flush;
    };
    int passed = 0, total = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        ++total;
        passed += o.pass ? 1 : 0;
        emit(fmt("%s %2d %s: ", o.pass ? "PASS" : "FAIL", id, name) + o.detail);
    };

    report(1, "Laplacian properties", laplacian_suite);
    report(2, "Lanczos matches dense", lanczos_vs_dense);
    report(3, "Boundary formula", boundary_formula);

    std::unique_ptr<DefaultRun> run;
    std::unique_ptr<EventStudy> study;
    try {
        run = std::make_unique<DefaultRun>();
        study = std::make_unique<EventStudy>(event_stage(run->data, run->cfg, run->decay));
    } catch (const std::exception& e) {
        emit(std::string("default simulation failed: ") + e.what());
    }
    auto with_run = [&](Outcome (*f)(const DefaultRun&)) {
        return [&, f] { return run ? f(*run) : Outcome{false, "no default run"}; };
    };

    report(4, "Decay recovery", with_run(decay_recovery));
    report(5, "Functional-form ordering", with_run(form_ordering));
    report(6, "Lambda2 dynamics", with_run(lambda2_dynamics));
    report(7, "Mixing-time reduction", mixing_reduction);
    report(8, "DID bias direction", bias_direction);
    report(9, "Pre-trend size and power", pretrend_size_power);
    report(10, "Placebo pattern", [&] { return study ? placebo_pattern(*study) : Outcome{false, "no event study"}; });
    report(11, "Bootstrap coverage", bootstrap_coverage);
    report(12, "Dual-channel complementarity", with_run(dual_complementarity));
    report(13, "Determinism", [] { return determinism(fs::temp_directory_path() / "techdiff_acceptance"); });

    emit(fmt("acceptance: %d of %d criteria pass", passed, total));
    return strict && passed != total ? 1 : 0;
}
