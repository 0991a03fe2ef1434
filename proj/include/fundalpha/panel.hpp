#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fundalpha {

/// Calendar month. Ordered; `index()` is a dense integer so consecutive
/// months differ by exactly one.
struct MonthId {
    int year = 1970;
    int month = 1;  // 1..12

    constexpr int index() const noexcept { return year * 12 + (month - 1); }
    static constexpr MonthId from_index(int idx) noexcept {
        return MonthId{idx / 12, idx % 12 + 1};
    }
    constexpr MonthId next() const noexcept { return from_index(index() + 1); }

    /// Parses YYYYMM. Throws ParseError.
    static MonthId parse(std::string_view text);
    /// Formats as YYYYMM.
    std::string str() const;

    friend constexpr bool operator==(MonthId, MonthId) = default;
    friend constexpr std::strong_ordering operator<=>(MonthId a, MonthId b) noexcept {
        return a.index() <=> b.index();
    }
};

enum class Factor { MktRf, Smb, Hml, Mom, Rmw, Cma, Rf };
inline constexpr std::size_t kFactorCount = 7;

std::string_view factor_name(Factor f) noexcept;

enum class Model { Capm, FF3, Carhart4, FF5 };

/// Regressors of a model, in design-matrix column order (after the intercept).
std::span<const Factor> model_factors(Model m) noexcept;
std::string_view model_name(Model m) noexcept;
/// Accepts capm, ff3, carhart4, ff5 (case-insensitive). Throws ConfigError.
Model parse_model(std::string_view text);

/// Month-indexed factor returns in monthly decimals. Months are contiguous.
/// MOM, RMW and CMA may be absent; the other columns are mandatory.
class FactorPanel {
public:
    using Columns = std::array<std::optional<std::vector<double>>, kFactorCount>;

    /// Validates ordering, contiguity and column lengths. Throws DataError.
    FactorPanel(std::vector<MonthId> months, Columns columns);

    std::size_t size() const noexcept { return months_.size(); }
    const std::vector<MonthId>& months() const noexcept { return months_; }
    MonthId first() const { return months_.front(); }
    MonthId last() const { return months_.back(); }

    bool has(Factor f) const noexcept { return columns_[static_cast<std::size_t>(f)].has_value(); }
    /// Throws DataError "factor X unavailable" when the column is absent.
    std::span<const double> column(Factor f) const;
    void require(Model m) const;

    std::optional<std::size_t> index_of(MonthId m) const noexcept;

    /// Sub-panel covering [from, to] intersected with this panel.
    FactorPanel slice(MonthId from, MonthId to) const;

    friend bool operator==(const FactorPanel&, const FactorPanel&) = default;

private:
    std::vector<MonthId> months_;
    Columns columns_;
};

struct FactorCsvFormat {
    char delimiter = ',';
    /// Input values are in percent (as in the Ken French library files).
    bool percent = false;
};

/// Header `date,MKT_RF,SMB,HML[,MOM][,RMW][,CMA],RF` in any column order,
/// case-insensitive. Rows may appear in any order.
FactorPanel ingest_factor_panel(std::istream& in, const FactorCsvFormat& fmt = {});
/// Writes decimals in shortest round-trip form, so re-ingesting is exact.
void write_factor_panel(std::ostream& out, const FactorPanel& panel);

struct Observation {
    MonthId month;
    double net_return = 0.0;
    std::optional<double> aum;  // millions

    friend bool operator==(const Observation&, const Observation&) = default;
};

class FundSeries {
public:
    /// Observations must be strictly increasing in month. Throws DataError.
    FundSeries(std::string id, std::vector<Observation> observations);

    const std::string& id() const noexcept { return id_; }
    const std::vector<Observation>& observations() const noexcept { return obs_; }
    std::size_t size() const noexcept { return obs_.size(); }
    bool empty() const noexcept { return obs_.empty(); }

    /// Last non-missing AuM in the series.
    std::optional<double> last_aum() const noexcept;

    /// Observations with month in [from, to].
    FundSeries restrict_to(MonthId from, MonthId to) const;

    friend bool operator==(const FundSeries&, const FundSeries&) = default;

private:
    std::string id_;
    std::vector<Observation> obs_;
};

/// Long format `fund_id,date,net_return,aum`; empty aum means missing.
/// Funds are returned in order of first appearance.
std::vector<FundSeries> ingest_funds(std::istream& in);
void write_funds(std::ostream& out, std::span<const FundSeries> funds);

/// A fund's observations joined to the panel: response vector and
/// row-major design matrix whose first column is the intercept.
struct AlignedSample {
    std::string fund_id;
    std::vector<MonthId> months;
    std::vector<std::size_t> panel_rows;  // index of each month in the panel
    std::vector<double> y;
    std::vector<double> x;  // n_obs() x n_cols(), row-major
    std::size_t cols = 0;

    std::size_t n_obs() const noexcept { return y.size(); }
    std::size_t n_cols() const noexcept { return cols; }
    double at(std::size_t row, std::size_t col) const noexcept { return x[row * cols + col]; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {x.data() + r * cols, cols};
    }
};

/// y = net_return - rf; X = [1, model factors...].
AlignedSample align(const FundSeries& fund, const FactorPanel& panel, Model model);

/// General form used by the screens: X = [1, regressors...] and y is the raw
/// net return unless `excess` is set.
AlignedSample align_columns(const FundSeries& fund, const FactorPanel& panel,
                            std::span<const Factor> regressors, bool excess);

} // namespace fundalpha
