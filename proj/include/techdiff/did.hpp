#pragma once

#include "techdiff/bootstrap.hpp"
#include "techdiff/geo.hpp"
#include "techdiff/spectral.hpp"
#include "techdiff/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace techdiff {

struct EventSpec {
    int event_year = 2020;
    int pre_first = 2017;
    int pre_last = 2019;
    int post_first = 2020;
    int post_last = 2023;

    void validate() const;
};

enum class DidMethod { Traditional, Spatial, Network };

std::string to_string(DidMethod method);

struct DidEstimate {
    DidMethod method = DidMethod::Traditional;
    double effect = 0.0;  // percentage points
    double ci_low = std::numeric_limits<double>::quiet_NaN();
    double ci_high = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_obs = 0;

    bool has_ci() const { return ci_low == ci_low && ci_high == ci_high; }
    bool significant() const { return has_ci() && (ci_low > 0.0 || ci_high < 0.0); }
};

// One technology's firm-by-year inputs for the event-study estimators.
struct DidPanel {
    int first_year = 0;
    Eigen::MatrixXd outcome;   // firms x years, adoption indicator
    Eigen::MatrixXd dmin;      // km to the nearest adopter at t-1 (0 for prior adopters); NaN if none
    Eigen::MatrixXd exposure;  // adopter-weighted network strength at t-1; NaN in the first year
    std::vector<std::uint8_t> treated;
    std::vector<double> lambda2;  // adopter-weighted lambda2 per year

    std::size_t n_firms() const { return static_cast<std::size_t>(outcome.rows()); }
    int n_years() const { return static_cast<int>(outcome.cols()); }
    int last_year() const { return first_year + n_years() - 1; }
    bool covers(int year) const { return year >= first_year && year <= last_year(); }
};

DidPanel make_did_panel(const AdoptionPanel& panel, TechId tech, const DistanceMatrix& dm,
                        std::span<const std::uint8_t> treated);

// Fills lambda2 and exposure from yearly networks aligned with the panel's years.
void attach_network(DidPanel& did, const AdoptionPanel& panel, TechId tech, const std::vector<YearNetwork>& networks,
                    const MultiplierScheme& m = {});

// Bootstrap hooks: resampled firms carry all their rows; the lambda2 series is held fixed.
std::size_t firm_count(const DidPanel& p);
DidPanel resample_firms(const DidPanel& p, std::span<const std::size_t> firms);

// Weighted least squares after sweeping out firm effects and, optionally, year effects.
struct FeDesign {
    std::vector<std::size_t> firm;
    std::vector<std::size_t> year;
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    Eigen::VectorXd w;  // empty means unit weights
    std::vector<std::string> names;
    bool year_effects = true;
};

struct FeFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov;  // classical OLS covariance
    double rss = 0.0;
    double tss = 0.0;  // within sum of squares of y
    double r2_within = 0.0;
    int df_resid = 0;
    std::size_t n_obs = 0;
};

// Alternating weighted demeaning of every column of `M` by firm and (optionally) year groups,
// until a sweep moves no entry by more than `tol`.
void within_transform(Eigen::MatrixXd& M, std::span<const std::size_t> firm, std::span<const std::size_t> year,
                      const Eigen::VectorXd& w, bool year_effects, double tol = 1e-12);

FeFit fit_fe(const FeDesign& design);

DidEstimate traditional_did(const DidPanel& p, const EventSpec& spec);
DidEstimate spatial_did(const DidPanel& p, const EventSpec& spec, double kappa_hat);
DidEstimate network_did(const DidPanel& p, const EventSpec& spec, int base_year = 2019);

// Relative bias of the traditional estimate against the spatial-adjusted one, on the traditional scale.
double relative_bias(double traditional, double spatial);

struct LeadEstimate {
    int year = 0;
    double coef = 0.0;  // percentage points
    double stderr_pp = 0.0;
    double p_value = 1.0;
};

struct PretrendResult {
    std::vector<LeadEstimate> leads;
    double f_stat = 0.0;
    int df1 = 0;
    int df2 = 0;
    double p_value = 1.0;
    std::size_t n_obs = 0;
};

// Upper-tail probability of the F(df1, df2) distribution.
double f_upper_tail(double f, double df1, double df2);

// Leads T * 1[t = event - k], k = 1..n_leads, next to T * post on every year from the panel start
// through post_last; the years before the earliest lead are the reference period.
PretrendResult pretrend_test(const DidPanel& p, const EventSpec& spec, int n_leads);

// Event-time coefficients T * 1[t = year] for every year from the panel start through post_last,
// relative to pre_last, whose row is reported as zero.
std::vector<LeadEstimate> dynamic_effects(const DidPanel& p, const EventSpec& spec);

// Window around a placebo year that never straddles the actual event: at most three pre years and up
// to four post years on the same side of the event. Empty when fewer than two pre years remain.
std::optional<EventSpec> placebo_window(const EventSpec& actual, int placebo_year, int first_year, int last_year);

struct PlaceboResult {
    int year = 0;
    bool actual = false;
    EventSpec window;
    DidEstimate traditional;
    DidEstimate spatial;
};

// Point estimate with a firm-cluster percentile interval.
DidEstimate bootstrap_did(const DidPanel& p, const EventSpec& spec, DidMethod method, const BootstrapOptions& boot,
                          double kappa_hat = 0.0, int base_year = 2019);

// Several technologies observed on the same firms. Resampling draws firms once and keeps each firm's
// rows together across every technology.
struct PanelSet {
    std::vector<DidPanel> panels;
    std::vector<double> kappa_hat;  // per panel, used by the spatial estimator
};

std::size_t firm_count(const PanelSet& s);
PanelSet resample_firms(const PanelSet& s, std::span<const std::size_t> firms);

// Unweighted mean of the per-technology effects.
double average_effect(const PanelSet& s, const EventSpec& spec, DidMethod method, int base_year = 2019);
DidEstimate bootstrap_average(const PanelSet& s, const EventSpec& spec, DidMethod method, const BootstrapOptions& boot,
                              int base_year = 2019);

// Traditional and spatial estimates of the cross-technology average at each placebo year.
std::vector<PlaceboResult> placebo_test(const PanelSet& s, const EventSpec& actual, const std::vector<int>& years,
                                        const BootstrapOptions& boot, std::vector<std::string>* warnings = nullptr);
std::vector<PlaceboResult> placebo_test(const DidPanel& p, const EventSpec& actual, const std::vector<int>& years,
                                        double kappa_hat, const BootstrapOptions& boot,
                                        std::vector<std::string>* warnings = nullptr);

struct DualChannelR2 {
    double r2_spatial = 0.0;
    double r2_network = 0.0;
    double r2_both = 0.0;
    double improvement = 0.0;
    std::size_t n_obs = 0;
};

// Firm fixed effects only, so the year-level lambda2 regressor stays identified; within R-squared on
// the firm-years where every regressor is defined.
DualChannelR2 dual_channel_r2(const DidPanel& p);

}  // namespace techdiff
