#include "fundalpha/panel.hpp"

#include "fundalpha/csv.hpp"
#include "fundalpha/error.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

namespace fundalpha {

// ---------------------------------------------------------------------------
// MonthId
// ---------------------------------------------------------------------------

MonthId MonthId::parse(std::string_view text) {
    std::string_view s = text;
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    const bool digits = s.size() == 6 && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) != 0;
    });
    if (!digits) throw ParseError("invalid date '" + std::string(text) + "', expected YYYYMM");
    const int year = std::stoi(std::string(s.substr(0, 4)));
    const int month = std::stoi(std::string(s.substr(4, 2)));
    if (month < 1 || month > 12) {
        throw ParseError("invalid month in date '" + std::string(text) + "'");
    }
    return MonthId{year, month};
}

std::string MonthId::str() const {
    std::string y = std::to_string(year);
    while (y.size() < 4) y.insert(0, "0");
    return y + (month < 10 ? "0" : "") + std::to_string(month);
}

// ---------------------------------------------------------------------------
// Factors and models
// ---------------------------------------------------------------------------

std::string_view factor_name(Factor f) noexcept {
    switch (f) {
    case Factor::MktRf: return "MKT_RF";
    case Factor::Smb: return "SMB";
    case Factor::Hml: return "HML";
    case Factor::Mom: return "MOM";
    case Factor::Rmw: return "RMW";
    case Factor::Cma: return "CMA";
    case Factor::Rf: return "RF";
    }
    return "?";
}

namespace {

constexpr std::array kCapm{Factor::MktRf};
constexpr std::array kFF3{Factor::MktRf, Factor::Smb, Factor::Hml};
constexpr std::array kCarhart4{Factor::MktRf, Factor::Smb, Factor::Hml, Factor::Mom};
constexpr std::array kFF5{Factor::MktRf, Factor::Smb, Factor::Hml, Factor::Rmw, Factor::Cma};

constexpr std::array kAllFactors{Factor::MktRf, Factor::Smb, Factor::Hml, Factor::Mom,
                                 Factor::Rmw,   Factor::Cma, Factor::Rf};

bool is_optional_factor(Factor f) {
    return f == Factor::Mom || f == Factor::Rmw || f == Factor::Cma;
}

} // namespace

std::span<const Factor> model_factors(Model m) noexcept {
    switch (m) {
    case Model::Capm: return kCapm;
    case Model::FF3: return kFF3;
    case Model::Carhart4: return kCarhart4;
    case Model::FF5: return kFF5;
    }
    return {};
}

std::string_view model_name(Model m) noexcept {
    switch (m) {
    case Model::Capm: return "capm";
    case Model::FF3: return "ff3";
    case Model::Carhart4: return "carhart4";
    case Model::FF5: return "ff5";
    }
    return "?";
}

Model parse_model(std::string_view text) {
    const std::string s = csv::lower(text);
    for (Model m : {Model::Capm, Model::FF3, Model::Carhart4, Model::FF5}) {
        if (s == model_name(m)) return m;
    }
    throw ConfigError("unknown model '" + std::string(text) + "' (expected capm, ff3, carhart4, ff5)");
}

// ---------------------------------------------------------------------------
// FactorPanel
// ---------------------------------------------------------------------------

FactorPanel::FactorPanel(std::vector<MonthId> months, Columns columns)
    : months_(std::move(months)), columns_(std::move(columns)) {
    for (std::size_t i = 1; i < months_.size(); ++i) {
        if (months_[i] == months_[i - 1]) {
            throw DataError("duplicate month " + months_[i].str());
        }
        if (months_[i] < months_[i - 1]) {
            throw DataError("months not increasing at " + months_[i].str());
        }
        if (months_[i].index() != months_[i - 1].index() + 1) {
            throw DataError("month gap at " + months_[i - 1].next().str());
        }
    }
    for (Factor f : kAllFactors) {
        const auto& col = columns_[static_cast<std::size_t>(f)];
        if (!col) {
            if (!is_optional_factor(f)) {
                throw DataError("missing mandatory column " + std::string(factor_name(f)));
            }
            continue;
        }
        if (col->size() != months_.size()) {
            throw DataError("column " + std::string(factor_name(f)) + " has " +
                            std::to_string(col->size()) + " values for " +
                            std::to_string(months_.size()) + " months");
        }
    }
}

std::span<const double> FactorPanel::column(Factor f) const {
    const auto& col = columns_[static_cast<std::size_t>(f)];
    if (!col) throw DataError("factor " + std::string(factor_name(f)) + " unavailable");
    return *col;
}

void FactorPanel::require(Model m) const {
    for (Factor f : model_factors(m)) (void)column(f);
}

std::optional<std::size_t> FactorPanel::index_of(MonthId m) const noexcept {
    if (months_.empty()) return std::nullopt;
    const int off = m.index() - months_.front().index();
    if (off < 0 || static_cast<std::size_t>(off) >= months_.size()) return std::nullopt;
    return static_cast<std::size_t>(off);
}

FactorPanel FactorPanel::slice(MonthId from, MonthId to) const {
    std::vector<MonthId> months;
    Columns cols;
    for (std::size_t c = 0; c < kFactorCount; ++c) {
        if (columns_[c]) cols[c].emplace();
    }
    for (std::size_t i = 0; i < months_.size(); ++i) {
        if (months_[i] < from || to < months_[i]) continue;
        months.push_back(months_[i]);
        for (std::size_t c = 0; c < kFactorCount; ++c) {
            if (columns_[c]) cols[c]->push_back((*columns_[c])[i]);
        }
    }
    return FactorPanel(std::move(months), std::move(cols));
}

FactorPanel ingest_factor_panel(std::istream& in, const FactorCsvFormat& fmt) {
    std::string line;
    if (!csv::next_line(in, line)) throw ParseError("factor file is empty");
    const auto header = csv::split(line, fmt.delimiter);

    std::optional<std::size_t> date_col;
    std::array<std::optional<std::size_t>, kFactorCount> where{};
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name = csv::lower(header[i]);
        std::replace(name.begin(), name.end(), '-', '_');
        if (name == "date") {
            date_col = i;
            continue;
        }
        for (Factor f : kAllFactors) {
            if (name == csv::lower(factor_name(f))) {
                if (where[static_cast<std::size_t>(f)]) {
                    throw ParseError("duplicate column " + std::string(factor_name(f)));
                }
                where[static_cast<std::size_t>(f)] = i;
            }
        }
    }
    if (!date_col) throw DataError("missing mandatory column date");
    for (Factor f : kAllFactors) {
        if (!is_optional_factor(f) && !where[static_cast<std::size_t>(f)]) {
            throw DataError("missing mandatory column " + std::string(factor_name(f)));
        }
    }

    const double scale = fmt.percent ? 0.01 : 1.0;
    std::map<MonthId, std::array<double, kFactorCount>> rows;
    std::size_t line_no = 1;
    while (csv::next_line(in, line)) {
        ++line_no;
        const auto cells = csv::split(line, fmt.delimiter);
        if (cells.size() != header.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        }
        const MonthId month = MonthId::parse(cells[*date_col]);
        std::array<double, kFactorCount> values{};
        for (Factor f : kAllFactors) {
            const auto& col = where[static_cast<std::size_t>(f)];
            if (!col) continue;
            const std::string ctx = std::string(factor_name(f)) + " at " + month.str();
            values[static_cast<std::size_t>(f)] = csv::parse_decimal(cells[*col], ctx) * scale;
        }
        if (!rows.emplace(month, values).second) {
            throw DataError("duplicate month " + month.str());
        }
    }

    std::vector<MonthId> months;
    months.reserve(rows.size());
    FactorPanel::Columns cols;
    for (Factor f : kAllFactors) {
        if (where[static_cast<std::size_t>(f)]) cols[static_cast<std::size_t>(f)].emplace();
    }
    for (const auto& [month, values] : rows) {
        months.push_back(month);
        for (std::size_t c = 0; c < kFactorCount; ++c) {
            if (cols[c]) cols[c]->push_back(values[c]);
        }
    }
    return FactorPanel(std::move(months), std::move(cols));
}

void write_factor_panel(std::ostream& out, const FactorPanel& panel) {
    std::vector<Factor> present;
    for (Factor f : kAllFactors) {
        if (panel.has(f)) present.push_back(f);
    }
    out << "date";
    for (Factor f : present) out << ',' << factor_name(f);
    out << '\n';
    for (std::size_t i = 0; i < panel.size(); ++i) {
        out << panel.months()[i].str();
        for (Factor f : present) out << ',' << csv::format_decimal(panel.column(f)[i]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// FundSeries
// ---------------------------------------------------------------------------

FundSeries::FundSeries(std::string id, std::vector<Observation> observations)
    : id_(std::move(id)), obs_(std::move(observations)) {
    for (std::size_t i = 1; i < obs_.size(); ++i) {
        if (!(obs_[i - 1].month < obs_[i].month)) {
            throw DataError("fund " + id_ + ": months not strictly increasing at " +
                            obs_[i].month.str());
        }
    }
}

std::optional<double> FundSeries::last_aum() const noexcept {
    for (auto it = obs_.rbegin(); it != obs_.rend(); ++it) {
        if (it->aum) return it->aum;
    }
    return std::nullopt;
}

FundSeries FundSeries::restrict_to(MonthId from, MonthId to) const {
    std::vector<Observation> kept;
    for (const auto& o : obs_) {
        if (!(o.month < from) && !(to < o.month)) kept.push_back(o);
    }
    return FundSeries(id_, std::move(kept));
}

std::vector<FundSeries> ingest_funds(std::istream& in) {
    std::string line;
    if (!csv::next_line(in, line)) throw ParseError("fund file is empty");
    const auto header = csv::split(line);
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < header.size(); ++i) where[csv::lower(header[i])] = i;
    for (const char* name : {"fund_id", "date", "net_return", "aum"}) {
        if (!where.count(name)) throw DataError(std::string("missing mandatory column ") + name);
    }
    const std::size_t c_id = where["fund_id"], c_date = where["date"],
                      c_ret = where["net_return"], c_aum = where["aum"];

    std::vector<std::string> order;
    std::unordered_map<std::string, std::map<MonthId, Observation>> by_fund;
    std::size_t line_no = 1;
    while (csv::next_line(in, line)) {
        ++line_no;
        const auto cells = csv::split(line);
        if (cells.size() != header.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        }
        const std::string& id = cells[c_id];
        const MonthId month = MonthId::parse(cells[c_date]);
        const std::string ctx = "net_return of fund " + id + " at " + month.str();
        Observation obs{month, csv::parse_decimal(cells[c_ret], ctx), std::nullopt};
        if (!cells[c_aum].empty()) {
            obs.aum = csv::parse_decimal(cells[c_aum], "aum of fund " + id + " at " + month.str());
        }
        auto [it, fresh] = by_fund.try_emplace(id);
        if (fresh) order.push_back(id);
        if (!it->second.emplace(month, obs).second) {
            throw DataError("duplicate observation for fund " + id + " at " + month.str());
        }
    }

    std::vector<FundSeries> funds;
    funds.reserve(order.size());
    for (const auto& id : order) {
        std::vector<Observation> obs;
        for (auto& [m, o] : by_fund[id]) obs.push_back(o);
        funds.emplace_back(id, std::move(obs));
    }
    return funds;
}

void write_funds(std::ostream& out, std::span<const FundSeries> funds) {
    out << "fund_id,date,net_return,aum\n";
    for (const auto& f : funds) {
        const std::string id = csv::escape(f.id());
        for (const auto& o : f.observations()) {
            out << id << ',' << o.month.str() << ',' << csv::format_decimal(o.net_return) << ',';
            if (o.aum) out << csv::format_decimal(*o.aum);
            out << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

AlignedSample align_columns(const FundSeries& fund, const FactorPanel& panel,
                            std::span<const Factor> regressors, bool excess) {
    std::vector<std::span<const double>> cols;
    cols.reserve(regressors.size());
    for (Factor f : regressors) cols.push_back(panel.column(f));
    const auto rf = panel.column(Factor::Rf);

    AlignedSample s;
    s.fund_id = fund.id();
    s.cols = regressors.size() + 1;
    const std::size_t n = fund.size();
    s.months.reserve(n);
    s.panel_rows.reserve(n);
    s.y.reserve(n);
    s.x.reserve(n * s.cols);
    for (const auto& o : fund.observations()) {
        const auto row = panel.index_of(o.month);
        if (!row) {
            throw DataError("fund " + fund.id() + ": month " + o.month.str() +
                            " absent from factor panel");
        }
        s.months.push_back(o.month);
        s.panel_rows.push_back(*row);
        s.y.push_back(excess ? o.net_return - rf[*row] : o.net_return);
        s.x.push_back(1.0);
        for (const auto& c : cols) s.x.push_back(c[*row]);
    }
    return s;
}

AlignedSample align(const FundSeries& fund, const FactorPanel& panel, Model model) {
    return align_columns(fund, panel, model_factors(model), /*excess=*/true);
}

} // namespace fundalpha
