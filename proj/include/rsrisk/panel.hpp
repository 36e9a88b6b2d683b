#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rsrisk/errors.hpp"

namespace rsrisk {

// Date-aligned panel of log returns for m named markets.  Dates are ISO-8601
// strings (lexicographic order == calendar order) with no missing cells.
struct ReturnPanel {
    std::vector<std::string> dates;
    std::vector<std::string> names;
    std::vector<std::vector<double>> returns; // returns[asset][t]
    std::vector<std::string> provenance;
    std::size_t dropped_dates = 0;

    std::size_t size() const { return dates.size(); }
    std::size_t assets() const { return names.size(); }

    void validate() const {
        if (returns.size() != names.size()) throw DataError("panel: names/series mismatch");
        for (const auto& col : returns) {
            if (col.size() != dates.size()) throw DataError("panel: ragged series");
            for (double r : col) {
                if (!std::isfinite(r)) throw DataError("panel: non-finite return");
            }
        }
        for (std::size_t i = 1; i < dates.size(); ++i) {
            if (!(dates[i - 1] < dates[i])) {
                throw DataError("panel: dates must be strictly ascending (at " + dates[i] + ")");
            }
        }
    }

    std::vector<double> row(std::size_t t) const {
        std::vector<double> out(assets());
        for (std::size_t a = 0; a < assets(); ++a) out[a] = returns[a][t];
        return out;
    }

    std::size_t asset_index(const std::string& name) const {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw ArgumentError("panel: unknown asset '" + name + "'");
        return static_cast<std::size_t>(it - names.begin());
    }

    // Rows with start <= date <= end (empty bounds mean unbounded).
    ReturnPanel window(const std::string& start, const std::string& end) const {
        ReturnPanel out;
        out.names = names;
        out.provenance = provenance;
        out.returns.resize(assets());
        for (std::size_t t = 0; t < size(); ++t) {
            if (!start.empty() && dates[t] < start) continue;
            if (!end.empty() && dates[t] > end) continue;
            out.dates.push_back(dates[t]);
            for (std::size_t a = 0; a < assets(); ++a) out.returns[a].push_back(returns[a][t]);
        }
        return out;
    }

    ReturnPanel head(std::size_t n) const {
        ReturnPanel out;
        out.names = names;
        out.provenance = provenance;
        n = std::min(n, size());
        out.dates.assign(dates.begin(), dates.begin() + n);
        out.returns.resize(assets());
        for (std::size_t a = 0; a < assets(); ++a) {
            out.returns[a].assign(returns[a].begin(), returns[a].begin() + n);
        }
        return out;
    }
};

inline std::string date_offset(const std::string& iso_start, int days) {
    std::chrono::year_month_day start;
    {
        int y = 0;
        unsigned m = 0, d = 0;
        if (std::sscanf(iso_start.c_str(), "%d-%u-%u", &y, &m, &d) != 3) {
            throw DataError("bad ISO date: " + iso_start);
        }
        start = std::chrono::year{y} / static_cast<int>(m) / static_cast<int>(d);
        if (!start.ok()) throw DataError("bad ISO date: " + iso_start);
    }
    const std::chrono::sys_days shifted = std::chrono::sys_days{start} + std::chrono::days{days};
    const std::chrono::year_month_day ymd{shifted};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline std::vector<std::string> synthetic_dates(std::size_t n,
                                                const std::string& start = "2000-01-03") {
    std::vector<std::string> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = date_offset(start, static_cast<int>(i));
    return out;
}

namespace detail {

struct PriceSeries {
    std::vector<std::string> dates;
    std::vector<double> closes;
};

inline PriceSeries read_price_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open price file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty price file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "date,close") {
        throw DataError("price file " + path + ": expected header 'date,close', got '" + line + "'");
    }
    PriceSeries out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw DataError(path + ":" + std::to_string(lineno) + ": unparseable row '" + line + "'");
        }
        const std::string date = line.substr(0, comma);
        double close = 0.0;
        try {
            std::size_t used = 0;
            close = std::stod(line.substr(comma + 1), &used);
            if (used == 0) throw std::invalid_argument("empty");
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": unparseable close '" +
                            line.substr(comma + 1) + "'");
        }
        if (!(close > 0.0) || !std::isfinite(close)) {
            throw DataError(path + ":" + std::to_string(lineno) + ": non-positive close " +
                            std::to_string(close));
        }
        if (!out.dates.empty() && !(out.dates.back() < date)) {
            throw DataError(path + ":" + std::to_string(lineno) + ": dates not strictly ascending");
        }
        out.dates.push_back(date);
        out.closes.push_back(close);
    }
    return out;
}

} // namespace detail

// Build a return panel from `date,close` delimited files: per-file log
// returns, then an inner join on the dates present in every file.
inline ReturnPanel ingest(const std::vector<std::string>& paths,
                          const std::vector<std::string>& names) {
    if (paths.empty()) throw ArgumentError("ingest: no price files given");
    if (paths.size() != names.size()) throw ArgumentError("ingest: paths/names mismatch");

    std::vector<std::map<std::string, double>> by_date(paths.size());
    std::size_t total_return_rows = 0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto series = detail::read_price_csv(paths[i]);
        for (std::size_t t = 1; t < series.dates.size(); ++t) {
            by_date[i][series.dates[t]] = std::log(series.closes[t] / series.closes[t - 1]);
        }
        total_return_rows += by_date[i].size();
    }

    std::vector<std::string> common;
    for (const auto& [date, r] : by_date[0]) {
        (void)r;
        bool everywhere = true;
        for (std::size_t i = 1; i < by_date.size() && everywhere; ++i) {
            everywhere = by_date[i].count(date) > 0;
        }
        if (everywhere) common.push_back(date);
    }
    if (common.empty()) throw DataError("ingest: no dates common to all price files");

    ReturnPanel panel;
    panel.dates = common;
    panel.names = names;
    panel.provenance = paths;
    panel.returns.assign(paths.size(), {});
    for (std::size_t i = 0; i < paths.size(); ++i) {
        panel.returns[i].reserve(common.size());
        for (const auto& date : common) panel.returns[i].push_back(by_date[i].at(date));
    }
    panel.dropped_dates = total_return_rows - common.size() * paths.size();
    panel.validate();
    return panel;
}

} // namespace rsrisk
