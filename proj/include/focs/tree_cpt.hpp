#pragma once

#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "focs/data.hpp"
#include "focs/focs_cpt.hpp"

namespace focs {

/// Decision-tree CPT over parent positions (indices into the family's parent list).
class TreeCpt {
public:
  struct Node {
    // Internal nodes: var >= 0 with both children set. Leaves: var < 0.
    int var = -1;
    std::unique_ptr<Node> lo;
    std::unique_ptr<Node> hi;
    CptColumn column;

    bool is_leaf() const { return var < 0; }
  };

  TreeCpt(std::unique_ptr<Node> root, std::size_t max_depth, std::size_t arity);

  const Node& root() const { return *root_; }
  std::size_t max_depth() const noexcept { return max_depth_; }
  std::size_t arity() const noexcept { return arity_; }

private:
  std::unique_ptr<Node> root_;
  std::size_t max_depth_;
  std::size_t arity_;
};

/// Greedy top-down splitting on the parent with the largest smoothed
/// training-CLL gain (lowest index on ties). Splits with zero gain are taken,
/// so parity-like targets can still be represented once depth permits.
TreeCpt learn_tree(const FamilyView& view, std::size_t max_depth);

CptColumn tree_predict(const TreeCpt& tree, std::span<const uint8_t> u);
double tree_cll(const FamilyView& view, const TreeCpt& tree);
std::size_t leaf_count(const TreeCpt& tree);
std::size_t depth(const TreeCpt& tree);

nlohmann::json to_json(const TreeCpt& tree);
TreeCpt tree_from_json(const nlohmann::json& j);

}  // namespace focs
