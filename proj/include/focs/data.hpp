#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace focs {

/// Weighted table of complete 0/1 assignments. Immutable once built.
class Dataset {
public:
  Dataset(std::vector<std::string> variables, std::vector<uint8_t> cells,
          std::vector<uint64_t> weights);

  std::size_t num_variables() const noexcept { return variables_.size(); }
  std::size_t num_records() const noexcept { return weights_.size(); }
  const std::vector<std::string>& variables() const noexcept { return variables_; }
  const std::string& variable(std::size_t i) const { return variables_.at(i); }

  /// Index of a named variable; throws ValidationError if absent.
  std::size_t index_of(const std::string& name) const;

  std::span<const uint8_t> record(std::size_t r) const {
    return {cells_.data() + r * variables_.size(), variables_.size()};
  }
  uint8_t value(std::size_t r, std::size_t var) const { return cells_[r * variables_.size() + var]; }
  uint64_t weight(std::size_t r) const { return weights_[r]; }
  uint64_t total_weight() const noexcept { return total_weight_; }

  /// Dataset restricted to the given record indices (in that order).
  Dataset subset(std::span<const std::size_t> rows) const;

private:
  std::vector<std::string> variables_;
  std::vector<uint8_t> cells_;
  std::vector<uint64_t> weights_;
  uint64_t total_weight_ = 0;
};

/// A family X|U over a shared dataset. Parent rows are materialized contiguously
/// so scorers can read them without gathering.
class FamilyView {
public:
  FamilyView(std::shared_ptr<const Dataset> data, std::size_t child,
             std::vector<std::size_t> parents);

  /// Child = named column, parents = every other column in header order.
  static FamilyView all_parents(std::shared_ptr<const Dataset> data, const std::string& child);

  const Dataset& dataset() const noexcept { return *data_; }
  const std::shared_ptr<const Dataset>& dataset_ptr() const noexcept { return data_; }
  std::size_t child() const noexcept { return child_; }
  const std::vector<std::size_t>& parents() const noexcept { return parents_; }
  std::size_t arity() const noexcept { return parents_.size(); }
  std::size_t size() const noexcept { return data_->num_records(); }

  std::span<const uint8_t> parent_values(std::size_t r) const {
    return {parent_rows_.data() + r * parents_.size(), parents_.size()};
  }
  uint8_t child_value(std::size_t r) const { return data_->value(r, child_); }
  uint64_t weight(std::size_t r) const { return data_->weight(r); }
  uint64_t total_weight() const noexcept { return data_->total_weight(); }

  const std::string& child_name() const { return data_->variable(child_); }
  std::vector<std::string> parent_names() const;

  /// The same family over a subset of records.
  FamilyView subset(std::span<const std::size_t> rows) const;

private:
  std::shared_ptr<const Dataset> data_;
  std::size_t child_;
  std::vector<std::size_t> parents_;
  std::vector<uint8_t> parent_rows_;
};

/// Partial instantiation: variable index -> value.
using Query = std::map<std::size_t, uint8_t>;

/// D#(q): total weight of records consistent with q. Every variable of q must
/// be the child or a parent of the family.
uint64_t count(const FamilyView& view, const Query& q);

Dataset read_csv(std::istream& in, const std::string& source = "<stream>");
Dataset read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const Dataset& data);
void save_csv(const std::filesystem::path& path, const Dataset& data);

FamilyView load_csv(const std::filesystem::path& path, const std::string& child);

/// Two-context cardinality benchmark. Parents u0..u{n-1}, child "x". A context
/// (fraction of ones <= 1/k, or > 1/k) is picked by a fair coin, then a
/// cardinality uniformly from that context's feasible set, then a uniformly
/// random parent vector of that cardinality. Pr(x=1) is 0.05 in the low
/// context and 0.95 in the high one.
FamilyView gen_cardinality(std::size_t n, std::size_t k, std::size_t count, uint64_t seed);

/// True iff the parent assignment lies in the low (<= 1/k) cardinality context.
bool in_low_cardinality_context(std::span<const uint8_t> u, std::size_t k);

}  // namespace focs
