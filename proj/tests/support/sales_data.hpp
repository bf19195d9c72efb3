#pragma once

// The 12-row sales extract shared by tests: a small computer-business sales
// table with region/goods keys and unit/price values. Oracles below are
// independent scan-and-sum implementations used to freeze expected values.

#include <string>
#include <vector>

namespace testsupport {

struct SalesRow {
  int record;
  const char* date;  // ISO
  const char* region;
  const char* goods;
  double units;
  double price;
};

inline constexpr SalesRow kSalesRows[12] = {
    {1, "2013-12-25", "east", "laptops", 1, 712},
    {2, "2014-01-01", "south", "desktops", 1, 471},
    {3, "2014-01-02", "west", "tablets", 1, 570},
    {4, "2014-01-02", "midwest", "software", 4, 349},
    {5, "2014-01-02", "west", "laptops", 1, 584},
    {6, "2014-01-02", "midwest", "servers", 1, 1697},
    {7, "2014-01-03", "south", "software", 1, 482},
    {8, "2014-01-03", "south", "tablets", 2, 34},
    {9, "2014-01-03", "mountain", "tablets", 1, 118},
    {10, "2014-01-03", "west", "tablets", 1, 995},
    {11, "2014-01-03", "midwest", "laptops", 1, 622},
    {12, "2014-01-03", "midwest", "tablets", 1, 806},
};

inline std::vector<double> oracle_amounts() {
  std::vector<double> out;
  for (const auto& r : kSalesRows) out.push_back(r.units * r.price);
  return out;
}

inline double oracle_amount_total() {
  double total = 0;
  for (double a : oracle_amounts()) total += a;
  return total;
}

inline std::vector<std::string> oracle_distinct(const char* SalesRow::*field) {
  std::vector<std::string> out;
  for (const auto& r : kSalesRows) {
    std::string v = r.*field;
    bool seen = false;
    for (const auto& s : out) seen = seen || s == v;
    if (!seen) out.push_back(v);
  }
  return out;
}

inline std::vector<std::string> oracle_sorted_distinct(const char* SalesRow::*field) {
  std::vector<std::string> out = oracle_distinct(field);
  for (size_t i = 0; i < out.size(); ++i)
    for (size_t j = i + 1; j < out.size(); ++j)
      if (out[j] < out[i]) std::swap(out[i], out[j]);
  return out;
}

inline double oracle_sumifs(const std::string& region, const std::string& goods) {
  double total = 0;
  for (const auto& r : kSalesRows)
    if (region == r.region && goods == r.goods) total += r.units * r.price;
  return total;
}

// Workbook text for the crosstab pipeline over this data, with the CSV
// expected beside the workbook file as sales12.csv.
inline const char* kCrosstabWorkbook = R"(# crosstab pipeline over the sales extract
sheet Data
table Sales at Data!A1 from sales12.csv
cell H1 value amount
cell H2 formula =Sales[units]*Sales[price]
cell J3 formula =SORT(UNIQUE(Sales[region]))
cell K2 formula =TRANSPOSE(UNIQUE(Sales[goods]))
cell K3 formula =SUMIFS(amount#,Sales[region],region#,Sales[goods],goods#)
name amount ref Data!H2
name region ref Data!J3
name goods ref Data!K2
)";

inline std::string sales_csv() {
  std::string out = "record,date,region,goods,units,price\n";
  for (const auto& r : kSalesRows) {
    out += std::to_string(r.record);
    out += ',';
    out += r.date;
    out += ',';
    out += r.region;
    out += ',';
    out += r.goods;
    out += ',';
    out += std::to_string(static_cast<int>(r.units));
    out += ',';
    out += std::to_string(static_cast<int>(r.price));
    out += '\n';
  }
  return out;
}

}  // namespace testsupport
