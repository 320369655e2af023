#include "focs/data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "focs/error.hpp"

namespace focs {

namespace {

constexpr const char* kWeightColumn = "#weight";

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

Dataset::Dataset(std::vector<std::string> variables, std::vector<uint8_t> cells,
                 std::vector<uint64_t> weights)
    : variables_(std::move(variables)), cells_(std::move(cells)), weights_(std::move(weights)) {
  std::set<std::string> seen;
  for (const auto& v : variables_) {
    if (!seen.insert(v).second) throw ValidationError("duplicate variable name '" + v + "'");
  }
  if (!variables_.empty() && cells_.size() != weights_.size() * variables_.size())
    throw ValidationError("cell count does not match records x variables");
  for (uint8_t c : cells_) {
    if (c > 1) throw ValidationError("dataset cells must be 0 or 1");
  }
  for (uint64_t w : weights_) {
    if (w == 0) throw ValidationError("record weights must be >= 1");
    total_weight_ += w;
  }
}

std::size_t Dataset::index_of(const std::string& name) const {
  auto it = std::find(variables_.begin(), variables_.end(), name);
  if (it == variables_.end()) throw ValidationError("unknown variable '" + name + "'");
  return static_cast<std::size_t>(it - variables_.begin());
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<uint8_t> cells;
  std::vector<uint64_t> weights;
  cells.reserve(rows.size() * variables_.size());
  weights.reserve(rows.size());
  for (std::size_t r : rows) {
    auto rec = record(r);
    cells.insert(cells.end(), rec.begin(), rec.end());
    weights.push_back(weights_.at(r));
  }
  return Dataset(variables_, std::move(cells), std::move(weights));
}

FamilyView::FamilyView(std::shared_ptr<const Dataset> data, std::size_t child,
                       std::vector<std::size_t> parents)
    : data_(std::move(data)), child_(child), parents_(std::move(parents)) {
  if (!data_) throw ValidationError("family view over a null dataset");
  const std::size_t nv = data_->num_variables();
  if (child_ >= nv) throw ValidationError("child index out of range");
  std::set<std::size_t> seen;
  for (std::size_t p : parents_) {
    if (p >= nv) throw ValidationError("parent index out of range");
    if (p == child_) throw ValidationError("child cannot be its own parent");
    if (!seen.insert(p).second) throw ValidationError("repeated parent index");
  }
  parent_rows_.resize(data_->num_records() * parents_.size());
  for (std::size_t r = 0; r < data_->num_records(); ++r) {
    for (std::size_t j = 0; j < parents_.size(); ++j)
      parent_rows_[r * parents_.size() + j] = data_->value(r, parents_[j]);
  }
}

FamilyView FamilyView::all_parents(std::shared_ptr<const Dataset> data, const std::string& child) {
  std::size_t c = data->index_of(child);
  std::vector<std::size_t> parents;
  for (std::size_t i = 0; i < data->num_variables(); ++i) {
    if (i != c) parents.push_back(i);
  }
  return FamilyView(std::move(data), c, std::move(parents));
}

std::vector<std::string> FamilyView::parent_names() const {
  std::vector<std::string> names;
  for (std::size_t p : parents_) names.push_back(data_->variable(p));
  return names;
}

FamilyView FamilyView::subset(std::span<const std::size_t> rows) const {
  return FamilyView(std::make_shared<const Dataset>(data_->subset(rows)), child_, parents_);
}

uint64_t count(const FamilyView& view, const Query& q) {
  for (const auto& [var, val] : q) {
    bool member = var == view.child() ||
                  std::find(view.parents().begin(), view.parents().end(), var) != view.parents().end();
    if (!member) throw std::invalid_argument("query variable is not in the family");
    if (val > 1) throw std::invalid_argument("query value must be 0 or 1");
  }
  const Dataset& d = view.dataset();
  uint64_t total = 0;
  for (std::size_t r = 0; r < d.num_records(); ++r) {
    bool ok = std::all_of(q.begin(), q.end(), [&](const auto& kv) { return d.value(r, kv.first) == kv.second; });
    if (ok) total += d.weight(r);
  }
  return total;
}

Dataset read_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": empty file, expected a header row");
  strip_cr(line);
  auto header = split_line(line);
  std::vector<std::string> names;
  std::ptrdiff_t weight_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == kWeightColumn) {
      if (weight_col >= 0) throw ValidationError(source + ": duplicate header '#weight'");
      weight_col = static_cast<std::ptrdiff_t>(i);
    } else {
      if (header[i].empty()) throw ValidationError(source + ": empty column name in header");
      names.push_back(header[i]);
    }
  }
  {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (!seen.insert(n).second) throw ValidationError(source + ": duplicate header '" + n + "'");
    }
  }

  std::vector<uint8_t> cells;
  std::vector<uint64_t> weights;
  std::size_t row = 1;  // file line number; the header is row 1
  while (std::getline(in, line)) {
    ++row;
    strip_cr(line);
    if (line.empty()) continue;
    auto parts = split_line(line);
    if (parts.size() != header.size()) {
      throw ValidationError(source + ": row " + std::to_string(row) + " has " + std::to_string(parts.size()) +
                            " cells, expected " + std::to_string(header.size()));
    }
    uint64_t w = 1;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (static_cast<std::ptrdiff_t>(i) == weight_col) {
        std::size_t used = 0;
        try {
          long long v = std::stoll(parts[i], &used);
          if (used != parts[i].size() || v < 1) throw std::invalid_argument("bad weight");
          w = static_cast<uint64_t>(v);
        } catch (const std::exception&) {
          throw ValidationError(source + ": row " + std::to_string(row) + ", column '#weight': invalid weight '" +
                                parts[i] + "'");
        }
        continue;
      }
      if (parts[i] != "0" && parts[i] != "1") {
        throw ValidationError(source + ": row " + std::to_string(row) + ", column '" + header[i] +
                              "': non-binary value '" + parts[i] + "'");
      }
      cells.push_back(parts[i] == "1" ? 1 : 0);
    }
    weights.push_back(w);
  }
  return Dataset(std::move(names), std::move(cells), std::move(weights));
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return read_csv(in, path.string());
}

void write_csv(std::ostream& out, const Dataset& data) {
  bool weighted = false;
  for (std::size_t r = 0; r < data.num_records(); ++r) weighted = weighted || data.weight(r) != 1;
  const auto& vars = data.variables();
  for (std::size_t i = 0; i < vars.size(); ++i) out << (i ? "," : "") << vars[i];
  if (weighted) out << (vars.empty() ? "" : ",") << kWeightColumn;
  out << '\n';
  for (std::size_t r = 0; r < data.num_records(); ++r) {
    auto rec = data.record(r);
    for (std::size_t i = 0; i < rec.size(); ++i) out << (i ? "," : "") << int(rec[i]);
    if (weighted) out << (rec.empty() ? "" : ",") << data.weight(r);
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  write_csv(out, data);
}

FamilyView load_csv(const std::filesystem::path& path, const std::string& child) {
  auto data = std::make_shared<const Dataset>(read_csv(path));
  return FamilyView::all_parents(std::move(data), child);
}

bool in_low_cardinality_context(std::span<const uint8_t> u, std::size_t k) {
  std::size_t ones = 0;
  for (uint8_t b : u) ones += b;
  return ones * k <= u.size();
}

FamilyView gen_cardinality(std::size_t n, std::size_t k, std::size_t count, uint64_t seed) {
  if (n < 1 || k < 1 || count < 1) throw ValidationError("gen_cardinality: n, k and count must be >= 1");
  std::vector<std::size_t> low, high;
  for (std::size_t c = 0; c <= n; ++c) (c * k <= n ? low : high).push_back(c);
  if (low.empty() || high.empty())
    throw ValidationError("gen_cardinality: k=" + std::to_string(k) + " leaves one context empty for n=" +
                          std::to_string(n));

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("u" + std::to_string(i));
  names.push_back("x");

  std::vector<uint8_t> cells;
  cells.reserve(count * (n + 1));
  std::vector<std::size_t> idx(n);
  for (std::size_t r = 0; r < count; ++r) {
    bool is_low = coin(rng);
    const auto& feasible = is_low ? low : high;
    std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
    std::size_t card = feasible[pick(rng)];
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<uint8_t> u(n, 0);
    for (std::size_t j = 0; j < card; ++j) u[idx[j]] = 1;
    std::bernoulli_distribution child(is_low ? 0.05 : 0.95);
    cells.insert(cells.end(), u.begin(), u.end());
    cells.push_back(child(rng) ? 1 : 0);
  }
  auto data = std::make_shared<const Dataset>(std::move(names), std::move(cells), std::vector<uint64_t>(count, 1));
  return FamilyView::all_parents(std::move(data), "x");
}

}  // namespace focs
