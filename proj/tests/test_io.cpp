#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "ndpa/figures.hpp"
#include "ndpa/presets.hpp"
#include "ndpa/serialize.hpp"
#include "ndpa/sweep.hpp"

using namespace ndpa;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no ndpa::Error thrown";
    return ErrorKind::InvalidParameter;
}

std::size_t column(const Table& t, const std::string& name) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), name);
    if (it == t.columns.end()) throw std::runtime_error("no column " + name);
    return static_cast<std::size_t>(it - t.columns.begin());
}

double value(const Table& t, std::size_t row, const std::string& name) {
    return std::get<double>(t.rows.at(row).at(column(t, name)));
}

std::string text(const Table& t, std::size_t row, const std::string& name) {
    return std::get<std::string>(t.rows.at(row).at(column(t, name)));
}

const Presets& presets() {
    static const Presets p = load_presets(std::string(NDPA_DATA_DIR) + "/presets.json");
    return p;
}

}  // namespace

TEST(Format, SpecialValues) {
    EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
    EXPECT_EQ(format_number(std::nan("")), "nan");
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Csv, SchemaHeaderAndQuoting) {
    Table t;
    t.name = "demo";
    t.add_meta("source", "unit test");
    t.columns = {"a", "b,c"};
    t.rows.push_back({1.5, std::string("say \"hi\"")});
    t.rows.push_back({std::numeric_limits<double>::infinity(), std::string("plain")});
    std::ostringstream out;
    write_csv(out, t);
    EXPECT_EQ(out.str(),
              "# ndpa-csv-schema: 1\n# table: demo\n# source: unit test\na,\"b,c\"\n1.5,\"say \"\"hi\"\"\"\ninf,plain\n");
}

TEST(Json, TableRoundTrip) {
    Table t;
    t.name = "demo";
    t.columns = {"x", "status"};
    t.rows.push_back({std::nan(""), std::string("ok")});
    t.rows.push_back({2.0, std::string("divergent")});
    const auto j = nlohmann::json::parse(to_json(t).dump());
    EXPECT_EQ(j.at("schema"), 1);
    EXPECT_EQ(j.at("rows").at(0).at("x"), "nan");
    EXPECT_EQ(j.at("rows").at(1).at("x"), 2.0);
    EXPECT_EQ(j.at("rows").at(1).at("status"), "divergent");
}

TEST(Json, CovarianceFlagsDivergence) {
    const auto rep = engine_covariance(reference_system(1.0, 1e3, {}), 1.0);
    const auto j = to_json(rep);
    EXPECT_EQ(j.at("labels").size(), 6u);
    EXPECT_EQ(j.at("method"), "frequency-integral");
    const std::size_t xm = 1;
    EXPECT_EQ(j.at("sigma").at(xm).at(xm), "inf");
}

TEST(Presets, LoadAndErrors) {
    const auto& p = presets();
    const auto sys = p.system();
    EXPECT_NEAR(sys.mode_i.gamma, 2.0 * std::numbers::pi * 0.1, 1e-12);
    for (const auto& name : figure_names()) EXPECT_TRUE(p.figures().contains(name)) << name;
    EXPECT_EQ(kind_of([] { (void)load_presets("/nonexistent/presets.json"); }), ErrorKind::ParseError);
    EXPECT_EQ(kind_of([] { (void)load_presets(std::string(NDPA_TEST_DATA) + "/malformed.json"); }),
              ErrorKind::ParseError);
}

TEST(Figures, UnknownName) {
    EXPECT_EQ(kind_of([] { (void)make_figure("nope", presets().system(), presets().figures()); }),
              ErrorKind::UnknownFigure);
}

TEST(Figures, AmplitudesClampAtThreshold) {
    const auto t = make_figure("amplitudes", presets().system(), presets().figures()).at(0);
    ASSERT_EQ(t.rows.size(), 301u);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double mu = value(t, r, "mu");
        EXPECT_NEAR(value(t, r, "a_s_over_critical"), std::min(mu, 1.0), 1e-12);
        if (mu <= 1.0) {
            EXPECT_EQ(value(t, r, "a_i"), 0.0);
        }
    }
    const double a2 = value(t, 200, "a_i");
    EXPECT_NEAR(value(t, 300, "a_i") / a2, std::sqrt(2.0), 1e-9);
    EXPECT_EQ(text(t, 0, "regime"), "below");
}

TEST(Figures, CrossoverDivergesAtThreshold) {
    const auto t = make_figure("crossover", presets().system(), presets().figures()).at(0);
    bool seen = false;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (value(t, r, "mu") != 1.0) continue;
        seen = true;
        EXPECT_TRUE(std::isinf(value(t, r, "y_plus")));
        EXPECT_TRUE(std::isinf(value(t, r, "matched_y_plus")));
        EXPECT_NEAR(value(t, r, "matched_y_minus"), 0.5, 1e-9);
    }
    EXPECT_TRUE(seen);
    EXPECT_NEAR(value(t, t.rows.size() - 1, "matched_y_minus"), 0.5, 1e-9);
}

TEST(Figures, FiniteTimeBoundedAtThreshold) {
    const auto t = make_figure("finite-time", presets().system(), presets().figures()).at(0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        EXPECT_TRUE(std::isfinite(value(t, r, "y_plus_finite"))) << value(t, r, "mu");
        EXPECT_LE(value(t, r, "y_minus_finite"), value(t, r, "y_minus_steady") * (1.0 + 1e-9));
    }
}

TEST(Figures, DetuningPeakMatchesClosedForm) {
    const auto tables = make_figure("detuning", presets().system(), presets().figures());
    ASSERT_EQ(tables.size(), 2u);
    const auto& peak = tables[1];
    for (std::size_t r = 0; r < peak.rows.size(); ++r) {
        EXPECT_NEAR(value(peak, r, "peak_squeezed_engine"), value(peak, r, "peak_squeezed"), 1e-5);
    }
}

TEST(Sweep, MuAxisMonotoneSqueezing) {
    SweepSpec s;
    const auto t = run_sweep(presets().system(), s);
    ASSERT_EQ(t.rows.size(), 100u);
    EXPECT_NEAR(value(t, 0, "x_plus"), 1.0, 1e-9);
    EXPECT_NEAR(value(t, 99, "x_plus"), 1.0 / 1.99, 1e-9);
    for (std::size_t r = 1; r < t.rows.size(); ++r) {
        EXPECT_LT(value(t, r, "x_plus"), value(t, r - 1, "x_plus"));
        EXPECT_EQ(text(t, r, "status"), "ok");
    }
}

TEST(Sweep, DetuningAxis) {
    SweepSpec s;
    s.axis = SweepAxis::Delta;
    s.start = 0.0;
    s.stop = 2.0;
    s.points = 5;
    s.mu = 0.5;
    const auto t = run_sweep(presets().system(), s);
    EXPECT_NEAR(value(t, 0, "xy_plus"), 0.0, 1e-12);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        EXPECT_NEAR(value(t, r, "peak_squeezed"), value(t, r, "peak_squeezed_closed_form"), 1e-5);
    }
}

TEST(Sweep, MeasurementTimeAtThreshold) {
    SweepSpec s;
    s.axis = SweepAxis::TauM;
    s.start = 10.0;
    s.stop = 1000.0;
    s.points = 3;
    s.spacing = Spacing::Log;
    s.mu = 1.0;
    const auto t = run_sweep(presets().system(), s);
    EXPECT_NEAR(value(t, 1, "tau_m"), 100.0, 1e-9);
    EXPECT_NEAR(value(t, 1, "x_minus") / value(t, 0, "x_minus"), 10.0, 1e-6);
    EXPECT_NEAR(value(t, 2, "x_minus") / value(t, 1, "x_minus"), 10.0, 1e-6);
    const double gamma = presets().system().mode_i.gamma;
    EXPECT_NEAR(value(t, 2, "x_plus"), closed_form::truncated_lorentzian(gamma, gamma, 1000.0), 1e-9);
}

TEST(Sweep, ThresholdRowIsDivergent) {
    SweepSpec s;
    s.start = 0.5;
    s.stop = 1.0;
    s.points = 2;
    const auto t = run_sweep(presets().system(), s);
    EXPECT_EQ(text(t, 1, "status"), "divergent");
}

TEST(Sweep, InvalidRanges) {
    SweepSpec s;
    s.points = 1;
    EXPECT_EQ(kind_of([&] { (void)run_sweep(presets().system(), s); }), ErrorKind::InvalidRange);
    s.points = 10;
    s.spacing = Spacing::Log;
    EXPECT_EQ(kind_of([&] { (void)run_sweep(presets().system(), s); }), ErrorKind::InvalidRange);
    EXPECT_EQ(kind_of([] { (void)parse_axis("sideways"); }), ErrorKind::InvalidRange);
    EXPECT_EQ(parse_axis("tau_m"), SweepAxis::TauM);
}
