#include "fundalpha/error.hpp"
#include "fundalpha/panel.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace fundalpha;

namespace {

FactorPanel parse_panel(const std::string& text, FactorCsvFormat fmt = {}) {
    std::istringstream in(text);
    return ingest_factor_panel(in, fmt);
}

std::vector<FundSeries> parse_funds(const std::string& text) {
    std::istringstream in(text);
    return ingest_funds(in);
}

template <class E, class F>
std::string error_of(F&& f) {
    try {
        f();
    } catch (const E& e) {
        return e.what();
    }
    return "<no error>";
}

const char* kThreeMonths =
    "date,MKT_RF,SMB,HML,RF\n"
    "199001,0.01,-0.002,0.003,0.004\n"
    "199002,0.02,0.001,-0.001,0.004\n"
    "199003,-0.01,0.000,0.002,0.005\n";

} // namespace

TEST_CASE("MonthId parsing and arithmetic") {
    const auto m = MonthId::parse("199912");
    CHECK(m.year == 1999);
    CHECK(m.month == 12);
    CHECK(m.next() == MonthId{2000, 1});
    CHECK(m.str() == "199912");
    CHECK(MonthId::from_index(m.index()) == m);
    CHECK(MonthId{2000, 1} > m);
    CHECK_THROWS_AS(MonthId::parse("199913"), ParseError);
    CHECK_THROWS_AS(MonthId::parse("1999-1"), ParseError);
    CHECK_THROWS_AS(MonthId::parse(""), ParseError);
}

TEST_CASE("models map to their regressors") {
    CHECK(model_factors(Model::Capm).size() == 1);
    CHECK(model_factors(Model::FF3).size() == 3);
    const auto c4 = model_factors(Model::Carhart4);
    REQUIRE(c4.size() == 4);
    CHECK(c4[3] == Factor::Mom);
    const auto f5 = model_factors(Model::FF5);
    REQUIRE(f5.size() == 5);
    CHECK(f5[3] == Factor::Rmw);
    CHECK(f5[4] == Factor::Cma);
    CHECK(parse_model("FF5") == Model::FF5);
    CHECK(parse_model("capm") == Model::Capm);
    CHECK(model_name(Model::Carhart4) == "carhart4");
    CHECK_THROWS_AS(parse_model("ff7"), ConfigError);
}

TEST_CASE("minimal factor file") {
    const auto p = parse_panel("date,MKT_RF,SMB,HML,RF\n199001,0.01,-0.002,0.003,0.004\n");
    CHECK(p.size() == 1);
    CHECK(p.first() == MonthId{1990, 1});
    CHECK_FALSE(p.has(Factor::Mom));
    CHECK_FALSE(p.has(Factor::Rmw));
    CHECK_FALSE(p.has(Factor::Cma));
    CHECK(p.column(Factor::MktRf)[0] == 0.01);
    CHECK(p.column(Factor::Smb)[0] == -0.002);
    CHECK(p.column(Factor::Rf)[0] == 0.004);
}

TEST_CASE("month gaps are rejected") {
    const auto msg = error_of<DataError>([] {
        parse_panel("date,MKT_RF,SMB,HML,RF\n199001,0,0,0,0\n199003,0,0,0,0\n");
    });
    CHECK(msg == "month gap at 199002");
}

TEST_CASE("row order in the file does not matter") {
    const auto sorted = parse_panel(kThreeMonths);
    const auto shuffled = parse_panel(
        "date,MKT_RF,SMB,HML,RF\n"
        "199003,-0.01,0.000,0.002,0.005\n"
        "199001,0.01,-0.002,0.003,0.004\n"
        "199002,0.02,0.001,-0.001,0.004\n");
    CHECK(sorted == shuffled);
}

TEST_CASE("factor file errors") {
    CHECK(error_of<DataError>([] {
              parse_panel("date,MKT_RF,SMB,HML,RF\n199001,0,0,0,0\n199001,0,0,0,0\n");
          }) == "duplicate month 199001");
    CHECK(error_of<DataError>([] { parse_panel("date,MKT_RF,SMB,RF\n199001,0,0,0\n"); }) ==
          "missing mandatory column HML");
    CHECK(error_of<ParseError>([] { parse_panel("date,MKT_RF,SMB,HML,RF\n199001,0,abc,0,0\n"); })
              .find("non-numeric value 'abc'") != std::string::npos);
    CHECK_THROWS_AS(parse_panel(""), ParseError);
    CHECK_THROWS_AS(parse_panel("date,MKT_RF,SMB,HML,RF\n199001,0,0,0\n"), ParseError);
}

TEST_CASE("headers are case-insensitive, in any order, with optional columns") {
    const auto p = parse_panel(
        "RF;cma;Mkt-RF;smb;hml;date;rmw;mom\n"
        "0.001;0.5;1.5;2;3;200001;4;5\n",
        {';', true});
    CHECK(p.has(Factor::Mom));
    CHECK(p.has(Factor::Rmw));
    CHECK(p.has(Factor::Cma));
    CHECK(p.column(Factor::MktRf)[0] == doctest::Approx(0.015));
    CHECK(p.column(Factor::Cma)[0] == doctest::Approx(0.005));
    CHECK(p.column(Factor::Rf)[0] == doctest::Approx(0.00001));
}

TEST_CASE("scientific notation and explicit signs") {
    const auto p = parse_panel("date,MKT_RF,SMB,HML,RF\n199001,1e-2,+0.5,-2.5E-3,4e-3\n");
    CHECK(p.column(Factor::MktRf)[0] == 0.01);
    CHECK(p.column(Factor::Smb)[0] == 0.5);
    CHECK(p.column(Factor::Hml)[0] == -0.0025);
}

TEST_CASE("column() names the missing factor") {
    const auto p = parse_panel(kThreeMonths);
    CHECK(error_of<DataError>([&] { (void)p.column(Factor::Rmw); }) == "factor RMW unavailable");
    CHECK_THROWS_AS(p.require(Model::FF5), DataError);
    CHECK_NOTHROW(p.require(Model::FF3));
}

TEST_CASE("slice keeps the requested window") {
    const auto p = parse_panel(kThreeMonths);
    const auto s = p.slice({1990, 2}, {1995, 1});
    CHECK(s.size() == 2);
    CHECK(s.first() == MonthId{1990, 2});
    CHECK(s.column(Factor::MktRf)[0] == 0.02);
    CHECK(p.index_of({1990, 3}) == 2u);
    CHECK_FALSE(p.index_of({1991, 1}).has_value());
}

TEST_CASE("property: factor panel CSV round trip is exact") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.05);
    std::uniform_int_distribution<int> len(1, 60);
    for (int c = 0; c < 100; ++c) {
        const int n = len(rng);
        std::vector<MonthId> months;
        FactorPanel::Columns cols;
        const bool with_optional = c % 2 == 0;
        for (std::size_t f = 0; f < kFactorCount; ++f) {
            const auto factor = static_cast<Factor>(f);
            const bool optional = factor == Factor::Mom || factor == Factor::Rmw || factor == Factor::Cma;
            if (!optional || with_optional) cols[f].emplace();
        }
        MonthId m{1960 + c % 30, 1 + c % 12};
        for (int t = 0; t < n; ++t, m = m.next()) {
            months.push_back(m);
            for (auto& col : cols) {
                if (col) col->push_back(g(rng));
            }
        }
        const FactorPanel p(months, cols);
        std::ostringstream out;
        write_factor_panel(out, p);
        const auto back = parse_panel(out.str());
        CHECK(back == p);
        std::ostringstream again;
        write_factor_panel(again, back);
        CHECK(again.str() == out.str());
    }
}

TEST_CASE("fund file ingestion") {
    const auto funds = parse_funds(
        "fund_id,date,net_return,aum\n"
        "A,199002,0.02,10\n"
        "B,199001,-0.01,\n"
        "A,199001,0.01,9.5\n");
    REQUIRE(funds.size() == 2);
    CHECK(funds[0].id() == "A");
    CHECK(funds[0].size() == 2);
    CHECK(funds[1].size() == 1);
    CHECK(funds[0].observations()[0].month == MonthId{1990, 1});
    CHECK(funds[0].observations()[0].aum == 9.5);
    CHECK_FALSE(funds[1].observations()[0].aum.has_value());
    CHECK(funds[0].last_aum() == 10.0);
    CHECK_FALSE(funds[1].last_aum().has_value());
}

TEST_CASE("fund file errors name the fund and month") {
    const auto msg = error_of<DataError>([] {
        parse_funds("fund_id,date,net_return,aum\nA,199001,0.01,1\nA,199001,0.02,1\n");
    });
    CHECK(msg.find("A") != std::string::npos);
    CHECK(msg.find("199001") != std::string::npos);
    CHECK_THROWS_AS(parse_funds("fund_id,date,net_return,aum\nA,199001,x,1\n"), ParseError);
    CHECK_THROWS_AS(parse_funds("fund_id,date,aum\nA,199001,1\n"), DataError);
}

TEST_CASE("fund series round trip") {
    std::vector<FundSeries> funds;
    funds.emplace_back("X,1", std::vector<Observation>{{{2001, 1}, 0.1, 3.0}, {{2001, 4}, -0.05, std::nullopt}});
    funds.emplace_back("Y", std::vector<Observation>{{{2001, 2}, 1e-17, 1234.5}});
    std::ostringstream out;
    write_funds(out, funds);
    const auto back = parse_funds(out.str());
    CHECK(back == funds);
}

TEST_CASE("FundSeries requires increasing months") {
    CHECK_THROWS_AS(FundSeries("A", {{{2000, 2}, 0.0, {}}, {{2000, 1}, 0.0, {}}}), DataError);
    CHECK_THROWS_AS(FundSeries("A", {{{2000, 2}, 0.0, {}}, {{2000, 2}, 0.0, {}}}), DataError);
    const FundSeries f("A", {{{2000, 1}, 0.0, 1.0}, {{2000, 3}, 0.0, {}}, {{2000, 6}, 0.0, 2.0}});
    CHECK(f.restrict_to({2000, 2}, {2000, 5}).size() == 1);
    CHECK(f.last_aum() == 2.0);
}

TEST_CASE("align subtracts rf and skips months the fund lacks") {
    const auto p = parse_panel(kThreeMonths);
    const FundSeries f("A", {{{1990, 1}, 0.02, {}}, {{1990, 3}, 0.03, {}}});
    const auto s = align(f, p, Model::FF3);
    REQUIRE(s.n_obs() == 2);
    CHECK(s.y[0] == doctest::Approx(0.016));
    CHECK(s.months[1] == MonthId{1990, 3});
    CHECK(s.panel_rows == std::vector<std::size_t>{0, 2});
    CHECK(s.n_cols() == 4);
    CHECK(s.at(0, 0) == 1.0);
    CHECK(s.at(1, 0) == 1.0);
    CHECK(s.at(1, 1) == -0.01);
    CHECK(s.at(1, 3) == 0.002);

    const auto again = align(f, p, Model::FF3);
    CHECK(again.y == s.y);
    CHECK(again.x == s.x);

    CHECK(error_of<DataError>([&] { (void)align(f, p, Model::FF5); }) == "factor RMW unavailable");
    const FundSeries outside("B", {{{1989, 12}, 0.0, {}}});
    CHECK_THROWS_AS(align(outside, p, Model::Capm), DataError);
}

TEST_CASE("property: y + rf reproduces the fund's net returns") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 0.05);
    std::bernoulli_distribution keep(0.7);
    std::vector<MonthId> months;
    FactorPanel::Columns cols;
    for (auto& c : cols) c.emplace();
    MonthId m{1995, 1};
    for (int t = 0; t < 48; ++t, m = m.next()) {
        months.push_back(m);
        for (auto& c : cols) c->push_back(g(rng));
    }
    const FactorPanel p(months, cols);
    for (int c = 0; c < 100; ++c) {
        std::vector<Observation> obs;
        for (const auto& month : months) {
            if (keep(rng)) obs.push_back({month, g(rng), {}});
        }
        const FundSeries f("F", obs);
        const auto s = align(f, p, Model::FF5);
        REQUIRE(s.n_obs() == obs.size());
        for (std::size_t i = 0; i < s.n_obs(); ++i) {
            const double rf = p.column(Factor::Rf)[s.panel_rows[i]];
            CHECK(std::abs(s.y[i] + rf - obs[i].net_return) <= 4 * std::numeric_limits<double>::epsilon() *
                                                                  (std::abs(rf) + std::abs(obs[i].net_return)));
        }
    }
}
