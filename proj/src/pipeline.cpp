#include "techdiff/pipeline.hpp"

#include "techdiff/errors.hpp"
#include "techdiff/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace techdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json estimate_json(const std::string& tech, const DidEstimate& e) {
    return {{"tech", tech},         {"method", to_string(e.method)}, {"effect_pp", e.effect},
            {"ci_low", e.ci_low},   {"ci_high", e.ci_high},          {"significant", e.significant()},
            {"n_obs", e.n_obs}};
}

std::vector<std::string> estimate_row(const std::string& tech, const DidEstimate& e) {
    return {tech, to_string(e.method), format_double(e.effect), format_double(e.ci_low), format_double(e.ci_high),
            e.significant() ? "1" : "0"};
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : std::numeric_limits<double>::quiet_NaN();
}

Dataset load_or_generate(const RunConfig& cfg, const std::optional<fs::path>& data) {
    if (data)
        return read_dataset(*data);
    return to_dataset(generate(cfg.simulation));
}

void finish_run(const fs::path& out, const RunConfig& cfg, std::vector<std::string> names) {
    write_json(out / "config_echo.json", cfg);
    names.insert(names.begin(), "config_echo.json");
    json digests = json::object();
    for (const auto& [name, hash] : digest_files(out, names))
        digests[name] = hash;
    write_json(out / "digests.json", {{"sha256", digests}});
}

}  // namespace

void RunConfig::resolve() {
    simulation.seed = seed;
    simulation.multiplier = multiplier;
    bootstrap.seed = seed;
}

void RunConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ConfigError("epsilon must lie in (0, 1)");
    multiplier.validate();
    simulation.validate();
    if (!(decay.bin_width_km > 0.0) || !(decay.max_distance_km > decay.bin_width_km))
        throw ConfigError("decay bins need a positive width below the distance cap");
    if (spectral.dense_cap < 2)
        throw ConfigError("dense_cap must be at least 2");
    if (!(spectral.tol > 0.0))
        throw ConfigError("spectral tolerance must be positive");
    try {
        event.spec.validate();
    } catch (const InputError& e) {
        throw ConfigError(std::string("event window: ") + e.what());
    }
    if (event.n_leads < 1)
        throw ConfigError("event study needs at least one lead");
    if (bootstrap.replicates < 100)
        throw ConfigError("bootstrap needs at least 100 replicates");
    if (!(bootstrap.level > 0.0 && bootstrap.level < 1.0))
        throw ConfigError("bootstrap level must lie in (0, 1)");
    if (!(bootstrap.max_failure_share >= 0.0 && bootstrap.max_failure_share < 1.0))
        throw ConfigError("bootstrap max_failure_share must lie in [0, 1)");
}

void to_json(json& j, const RunConfig& c) {
    json sim = c.simulation;
    sim.erase("seed");
    sim.erase("multiplier");
    j = {{"seed", c.seed},
         {"epsilon", c.epsilon},
         {"multiplier", c.multiplier},
         {"simulation", sim},
         {"decay", {{"bin_width_km", c.decay.bin_width_km}, {"max_distance_km", c.decay.max_distance_km}}},
         {"spectral", {{"dense_cap", c.spectral.dense_cap}, {"tol", c.spectral.tol}}},
         {"event",
          {{"event_year", c.event.spec.event_year},
           {"pre_first", c.event.spec.pre_first},
           {"pre_last", c.event.spec.pre_last},
           {"post_first", c.event.spec.post_first},
           {"post_last", c.event.spec.post_last},
           {"n_leads", c.event.n_leads},
           {"base_year", c.event.base_year},
           {"placebo_years", c.event.placebo_years}}},
         {"bootstrap",
          {{"replicates", c.bootstrap.replicates},
           {"level", c.bootstrap.level},
           {"max_failure_share", c.bootstrap.max_failure_share}}}};
}

void from_json(const json& j, RunConfig& c) {
    ConfigFields f(j, "config");
    std::string schema(kSchema);
    f.get("schema", schema);
    if (schema != kSchema)
        throw ConfigError("config schema '" + schema + "' is not " + std::string(kSchema));
    f.get("seed", c.seed);
    f.get("epsilon", c.epsilon);
    f.get("multiplier", c.multiplier);
    f.get("simulation", c.simulation);
    json block;
    for (const char* key : {"decay", "spectral", "event", "bootstrap"})
        f.get(key, block);
    if (j.contains("decay")) {
        ConfigFields d(j.at("decay"), "decay");
        d.get("bin_width_km", c.decay.bin_width_km);
        d.get("max_distance_km", c.decay.max_distance_km);
        d.finish();
    }
    if (j.contains("spectral")) {
        ConfigFields s(j.at("spectral"), "spectral");
        s.get("dense_cap", c.spectral.dense_cap);
        s.get("tol", c.spectral.tol);
        s.finish();
    }
    if (j.contains("event")) {
        ConfigFields e(j.at("event"), "event");
        e.get("event_year", c.event.spec.event_year);
        e.get("pre_first", c.event.spec.pre_first);
        e.get("pre_last", c.event.spec.pre_last);
        e.get("post_first", c.event.spec.post_first);
        e.get("post_last", c.event.spec.post_last);
        e.get("n_leads", c.event.n_leads);
        e.get("base_year", c.event.base_year);
        e.get("placebo_years", c.event.placebo_years);
        e.finish();
    }
    if (j.contains("bootstrap")) {
        ConfigFields b(j.at("bootstrap"), "bootstrap");
        b.get("replicates", c.bootstrap.replicates);
        b.get("level", c.bootstrap.level);
        b.get("max_failure_share", c.bootstrap.max_failure_share);
        b.finish();
    }
    f.finish();
}

RunConfig load_run_config(const fs::path& path) {
    RunConfig cfg = read_json(path).get<RunConfig>();
    cfg.resolve();
    return cfg;
}

std::vector<TechDecay> decay_stage(const Dataset& data, const RunConfig& cfg) {
    const auto dm = distance_matrix(data.firms);
    std::vector<TechDecay> out;
    for (std::size_t k = 0; k < data.panel.n_techs(); ++k) {
        TechDecay t;
        t.tech = data.panel.techs()[k];
        t.first_year = data.panel.first_year();
        t.last_year = data.panel.last_year();
        const auto hs = pooled_hazard_sample(data.panel, dm, k, t.first_year, t.last_year);
        t.curve = bin_adoption_by_distance(hs.km, hs.adopted, cfg.decay.bin_width_km, cfg.decay.max_distance_km);
        t.fits = fit_alternatives(t.curve, cfg.epsilon);
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Lambda2Series> spectral_stage(const Dataset& data, const RunConfig& cfg) {
    auto solve = [&](const YearNetwork& net, double& lambda2, int& iterations) {
        const auto L = laplacian_from_edges(net.n, net.edges);
        try {
            const auto r = lambda2_lanczos(L, 0, cfg.spectral.tol);
            lambda2 = r.lambda2;
            iterations = r.iterations;
        } catch (const ConvergenceError&) {
            if (net.n > cfg.spectral.dense_cap)
                throw;
            lambda2 = dense_spectrum(L, false, cfg.spectral.dense_cap).lambda2();
            iterations = 0;
        }
    };
    std::vector<Lambda2Series> out;
    Lambda2Series raw;
    raw.tech = "network";
    for (const auto& net : data.networks) {
        double l = 0.0;
        int it = 0;
        solve(net, l, it);
        raw.years.push_back(net.year);
        raw.lambda2.push_back(l);
        raw.iterations.push_back(it);
    }
    for (std::size_t k = 0; k < data.panel.n_techs(); ++k) {
        Lambda2Series s;
        s.tech = data.panel.techs()[k];
        for (const auto& net : data.networks) {
            double l = 0.0;
            int it = 0;
            solve(tech_weighted_network(net, data.panel, k, net.year, cfg.multiplier), l, it);
            s.years.push_back(net.year);
            s.lambda2.push_back(l);
            s.iterations.push_back(it);
            s.adoption.push_back(data.panel.adoption_rate(k, net.year));
        }
        out.push_back(std::move(s));
    }
    out.push_back(std::move(raw));
    return out;
}

EventStudy event_stage(const Dataset& data, const RunConfig& cfg, const std::vector<TechDecay>& decay) {
    if (data.shock.treated.empty())
        throw InputError("the event study needs a treated set (treated.csv)");
    const auto dm = distance_matrix(data.firms);
    const auto& spec = cfg.event.spec;
    EventStudy study;
    PanelSet set;
    for (std::size_t k = 0; k < data.panel.n_techs(); ++k) {
        TechEvent ev;
        ev.tech = data.panel.techs()[k];
        ev.kappa_hat = decay.at(k).fits.exponential.rate;
        auto p = make_did_panel(data.panel, k, dm, data.shock.treated);
        attach_network(p, data.panel, k, data.networks, cfg.multiplier);
        try {
            ev.traditional = bootstrap_did(p, spec, DidMethod::Traditional, cfg.bootstrap);
            ev.spatial = bootstrap_did(p, spec, DidMethod::Spatial, cfg.bootstrap, ev.kappa_hat);
            ev.network = bootstrap_did(p, spec, DidMethod::Network, cfg.bootstrap, 0.0, cfg.event.base_year);
        } catch (const EstimationError& e) {
            study.skipped.push_back({ev.tech, e.what()});
            continue;
        }
        ev.bias = ev.traditional.effect != 0.0 ? relative_bias(ev.traditional.effect, ev.spatial.effect)
                                               : std::numeric_limits<double>::quiet_NaN();
        try {
            ev.pretrend = pretrend_test(p, spec, cfg.event.n_leads);
        } catch (const Error& e) {
            study.warnings.push_back(ev.tech + ": pre-trend test skipped: " + e.what());
        }
        try {
            ev.dynamic = dynamic_effects(p, spec);
        } catch (const Error& e) {
            study.warnings.push_back(ev.tech + ": dynamic effects skipped: " + e.what());
        }
        try {
            ev.dual = dual_channel_r2(p);
        } catch (const Error& e) {
            study.warnings.push_back(ev.tech + ": dual-channel fit skipped: " + e.what());
        }
        set.panels.push_back(std::move(p));
        set.kappa_hat.push_back(ev.kappa_hat);
        study.techs.push_back(std::move(ev));
    }
    if (set.panels.empty())
        throw EstimationError("no technology supports the event study");
    study.average_traditional = bootstrap_average(set, spec, DidMethod::Traditional, cfg.bootstrap);
    study.average_spatial = bootstrap_average(set, spec, DidMethod::Spatial, cfg.bootstrap);
    study.average_network = bootstrap_average(set, spec, DidMethod::Network, cfg.bootstrap, cfg.event.base_year);
    study.average_bias = relative_bias(study.average_traditional.effect, study.average_spatial.effect);
    study.placebos = placebo_test(set, spec, cfg.event.placebo_years, cfg.bootstrap, &study.warnings);
    return study;
}

std::vector<std::string> write_decay(const fs::path& out, const std::vector<TechDecay>& fits, const RunConfig& cfg) {
    json rows = json::array();
    std::vector<std::vector<std::string>> csv, curves;
    for (const auto& t : fits) {
        const std::string range = std::to_string(t.first_year) + "-" + std::to_string(t.last_year);
        for (const auto* f : {&t.fits.exponential, &t.fits.power, &t.fits.linear}) {
            const bool exp_form = f->form == DecayForm::Exponential;
            const double d_star = exp_form ? f->d_star : std::numeric_limits<double>::quiet_NaN();
            rows.push_back({{"tech", t.tech},
                            {"year_range", range},
                            {"form", to_string(f->form)},
                            {"kappa", f->rate},
                            {"u0", f->u0},
                            {"r2", f->r_squared},
                            {"d_star", d_star},
                            {"stderr", f->rate_stderr},
                            {"best", f->form == t.fits.best}});
            csv.push_back({t.tech, range, to_string(f->form), format_double(f->rate), format_double(f->u0),
                           format_double(f->r_squared), format_double(d_star), format_double(f->rate_stderr)});
        }
        const auto& e = t.fits.exponential;
        for (const auto& b : t.curve.bins)
            curves.push_back({t.tech, format_double(b.distance), format_double(b.rate), std::to_string(b.count),
                              format_double(e.u0 * std::exp(-e.rate * b.distance))});
    }
    write_json(out / "decay_fits.json",
               {{"epsilon", cfg.epsilon}, {"bin_width_km", cfg.decay.bin_width_km},
                {"max_distance_km", cfg.decay.max_distance_km}, {"fits", rows}});
    write_csv(out / "decay_fits.csv", {"tech", "year_range", "form", "kappa", "u0", "r2", "d_star", "stderr"}, csv);
    write_csv(out / "decay_curves.csv", {"tech", "distance_km", "rate", "count", "fitted_exponential"}, curves);
    return {"decay_fits.json", "decay_fits.csv", "decay_curves.csv"};
}

std::vector<std::string> write_spectral(const fs::path& out, const std::vector<Lambda2Series>& series,
                                        const RunConfig& cfg) {
    json rows = json::array(), summary = json::array(), mixing = json::array();
    std::vector<std::vector<std::string>> csv, mix_csv;
    const double e_inv = std::exp(-1.0);
    for (const auto& s : series) {
        for (std::size_t t = 0; t < s.years.size(); ++t) {
            const double tau = s.lambda2[t] > 0.0 ? mixing_time(s.lambda2[t], e_inv)
                                                  : std::numeric_limits<double>::infinity();
            rows.push_back({{"year", s.years[t]},
                            {"tech", s.tech},
                            {"lambda2", s.lambda2[t]},
                            {"mixing_time_e", tau},
                            {"n_iter", s.iterations[t]}});
            csv.push_back({std::to_string(s.years[t]), s.tech, format_double(s.lambda2[t]), format_double(tau),
                           std::to_string(s.iterations[t]),
                           s.adoption.empty() ? "nan" : format_double(s.adoption[t])});
        }
        const double first = s.lambda2.front(), last = s.lambda2.back();
        json sum = {{"tech", s.tech},
                    {"first_year", s.years.front()},
                    {"last_year", s.years.back()},
                    {"lambda2_first", first},
                    {"lambda2_last", last},
                    {"growth_pct", first > 0.0 ? 100.0 * (last / first - 1.0) : std::nan("")}};
        if (!s.adoption.empty())
            sum["corr_adoption"] = correlation(s.lambda2, s.adoption);
        summary.push_back(sum);
        if (first > 0.0 && last > 0.0) {
            const double tau0 = mixing_time(first, cfg.epsilon), tau1 = mixing_time(last, cfg.epsilon);
            const double reduction = 100.0 * (1.0 - tau1 / tau0);
            mixing.push_back({{"tech", s.tech},
                              {"epsilon", cfg.epsilon},
                              {"lambda2_first", first},
                              {"lambda2_last", last},
                              {"tau_first", tau0},
                              {"tau_last", tau1},
                              {"reduction_pct", reduction}});
            mix_csv.push_back({s.tech, format_double(cfg.epsilon), format_double(first), format_double(last),
                               format_double(tau0), format_double(tau1), format_double(reduction)});
        }
    }
    write_json(out / "lambda2_series.json", {{"series", rows}, {"summary", summary}});
    write_csv(out / "lambda2_series.csv", {"year", "tech", "lambda2", "mixing_time_e", "n_iter", "adoption_rate"},
              csv);
    write_json(out / "mixing_times.json", {{"mixing_times", mixing}});
    write_csv(out / "mixing_times.csv",
              {"tech", "epsilon", "lambda2_first", "lambda2_last", "tau_first", "tau_last", "reduction_pct"}, mix_csv);
    return {"lambda2_series.json", "lambda2_series.csv", "mixing_times.json", "mixing_times.csv"};
}

std::vector<std::string> write_event_study(const fs::path& out, const EventStudy& study) {
    const std::vector<std::string> est_header{"tech", "method", "effect_pp", "ci_low", "ci_high", "significant"};
    json est = json::array(), bias = json::array();
    std::vector<std::vector<std::string>> est_csv;
    for (const auto& t : study.techs) {
        for (const auto* e : {&t.traditional, &t.spatial, &t.network}) {
            est.push_back(estimate_json(t.tech, *e));
            est_csv.push_back(estimate_row(t.tech, *e));
        }
        bias.push_back({{"tech", t.tech}, {"kappa_hat", t.kappa_hat}, {"relative_bias", t.bias}});
    }
    for (const auto* e : {&study.average_traditional, &study.average_spatial, &study.average_network}) {
        est.push_back(estimate_json("Average", *e));
        est_csv.push_back(estimate_row("Average", *e));
    }
    bias.push_back({{"tech", "Average"}, {"relative_bias", study.average_bias}});
    json skipped = json::array();
    for (const auto& [tech, reason] : study.skipped)
        skipped.push_back({{"tech", tech}, {"reason", reason}});
    write_json(out / "event_study.json",
               {{"estimates", est}, {"bias", bias}, {"skipped", skipped}, {"warnings", study.warnings}});
    write_csv(out / "event_study.csv", est_header, est_csv);

    json pre = json::array();
    std::vector<std::vector<std::string>> pre_csv, dyn_csv, dual_csv;
    json dual = json::array();
    for (const auto& t : study.techs) {
        if (t.pretrend) {
            json leads = json::array();
            for (const auto& l : t.pretrend->leads) {
                leads.push_back(
                    {{"year", l.year}, {"coef_pp", l.coef}, {"stderr_pp", l.stderr_pp}, {"p_value", l.p_value}});
                pre_csv.push_back({t.tech, std::to_string(l.year), format_double(l.coef), format_double(l.stderr_pp),
                                   format_double(l.p_value), format_double(t.pretrend->f_stat),
                                   format_double(t.pretrend->p_value)});
            }
            pre.push_back({{"tech", t.tech},
                           {"leads", leads},
                           {"f_stat", t.pretrend->f_stat},
                           {"df1", t.pretrend->df1},
                           {"df2", t.pretrend->df2},
                           {"p_value", t.pretrend->p_value},
                           {"n_obs", t.pretrend->n_obs}});
        }
        for (const auto& d : t.dynamic)
            dyn_csv.push_back({t.tech, std::to_string(d.year), format_double(d.coef), format_double(d.stderr_pp),
                               format_double(d.p_value)});
        if (t.dual) {
            dual.push_back({{"tech", t.tech},
                            {"r2_spatial", t.dual->r2_spatial},
                            {"r2_network", t.dual->r2_network},
                            {"r2_both", t.dual->r2_both},
                            {"improvement", t.dual->improvement},
                            {"n_obs", t.dual->n_obs}});
            dual_csv.push_back({t.tech, format_double(t.dual->r2_spatial), format_double(t.dual->r2_network),
                                format_double(t.dual->r2_both), format_double(t.dual->improvement)});
        }
    }
    write_json(out / "pretrends.json", {{"pretrends", pre}});
    write_csv(out / "pretrends.csv", {"tech", "year", "coef_pp", "stderr_pp", "p_value", "f_stat", "f_p_value"},
              pre_csv);
    write_csv(out / "dynamic_effects.csv", {"tech", "year", "coef_pp", "stderr_pp", "p_value"}, dyn_csv);
    write_json(out / "dual_channel_r2.json", {{"dual_channel", dual}});
    write_csv(out / "dual_channel_r2.csv", {"tech", "r2_spatial", "r2_network", "r2_both", "improvement"}, dual_csv);

    json placebo = json::array();
    std::vector<std::vector<std::string>> pl_csv;
    for (const auto& r : study.placebos) {
        const bool significant = r.traditional.significant() || r.spatial.significant();
        placebo.push_back({{"year", r.year},
                           {"actual", r.actual},
                           {"window",
                            {{"pre_first", r.window.pre_first},
                             {"pre_last", r.window.pre_last},
                             {"post_first", r.window.post_first},
                             {"post_last", r.window.post_last}}},
                           {"traditional", estimate_json("Average", r.traditional)},
                           {"spatial", estimate_json("Average", r.spatial)},
                           {"significant", significant},
                           {"expected", r.actual}});
        pl_csv.push_back({std::to_string(r.year), r.actual ? "1" : "0", format_double(r.traditional.effect),
                          format_double(r.traditional.ci_low), format_double(r.traditional.ci_high),
                          format_double(r.spatial.effect), format_double(r.spatial.ci_low),
                          format_double(r.spatial.ci_high), significant ? "1" : "0", r.actual ? "1" : "0"});
    }
    write_json(out / "placebos.json", {{"placebos", placebo}});
    write_csv(out / "placebos.csv",
              {"placebo_year", "actual", "traditional_pp", "traditional_ci_low", "traditional_ci_high", "spatial_pp",
               "spatial_ci_low", "spatial_ci_high", "significant", "expected"},
              pl_csv);
    return {"event_study.json", "event_study.csv",     "pretrends.json",      "pretrends.csv", "dynamic_effects.csv",
            "dual_channel_r2.json", "dual_channel_r2.csv", "placebos.json", "placebos.csv"};
}

void cmd_simulate(const RunConfig& cfg, const fs::path& out) {
    cfg.validate();
    const auto ds = generate(cfg.simulation);
    finish_run(out, cfg, write_dataset(out, ds));
}

void cmd_replicate(const RunConfig& cfg, const std::optional<fs::path>& data, const fs::path& out) {
    cfg.validate();
    std::vector<std::string> names;
    Dataset d;
    if (data) {
        d = read_dataset(*data);
        fs::create_directories(out);
    } else {
        const auto ds = generate(cfg.simulation);
        names = write_dataset(out, ds);
        d = to_dataset(ds);
    }
    const auto decay = decay_stage(d, cfg);
    const auto spectra = spectral_stage(d, cfg);
    const auto study = event_stage(d, cfg, decay);
    for (const auto& group : {write_decay(out, decay, cfg), write_spectral(out, spectra, cfg),
                              write_event_study(out, study)})
        names.insert(names.end(), group.begin(), group.end());
    finish_run(out, cfg, names);
}

void cmd_spectral(const RunConfig& cfg, const std::optional<fs::path>& data, const fs::path& out) {
    cfg.validate();
    const auto d = load_or_generate(cfg, data);
    const auto spectra = spectral_stage(d, cfg);
    fs::create_directories(out);
    finish_run(out, cfg, write_spectral(out, spectra, cfg));
}

void cmd_fit_decay(const RunConfig& cfg, const std::optional<fs::path>& data, const fs::path& out) {
    cfg.validate();
    const auto d = load_or_generate(cfg, data);
    const auto decay = decay_stage(d, cfg);
    fs::create_directories(out);
    finish_run(out, cfg, write_decay(out, decay, cfg));
}

void cmd_event_study(const RunConfig& cfg, const std::optional<fs::path>& data, const fs::path& out) {
    cfg.validate();
    const auto d = load_or_generate(cfg, data);
    if (d.shock.treated.empty())
        throw InputError("the event study needs a treated set (treated.csv)");
    const auto study = event_stage(d, cfg, decay_stage(d, cfg));
    fs::create_directories(out);
    finish_run(out, cfg, write_event_study(out, study));
}

}  // namespace techdiff
