#include "gbox/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "gbox/errors.hpp"
#include "gbox/io_util.hpp"

namespace gbox {
namespace {

std::string strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return std::string(line);
}

// Returns one cycle as a list of node indices, or empty when the graph is acyclic.
std::vector<std::size_t> find_cycle(const std::vector<std::vector<std::size_t>>& children) {
  const std::size_t n = children.size();
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::size_t> parent_of(n, n);
  for (std::size_t start = 0; start < n; ++start) {
    if (state[start] != 0) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{start, 0}};
    state[start] = 1;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < children[node].size()) {
        const std::size_t child = children[node][next++];
        if (state[child] == 1) {
          std::vector<std::size_t> cycle{child};
          for (std::size_t cur = node; cur != child; cur = parent_of[cur]) cycle.push_back(cur);
          std::reverse(cycle.begin() + 1, cycle.end());
          return cycle;
        }
        if (state[child] == 0) {
          state[child] = 1;
          parent_of[child] = node;
          stack.emplace_back(child, 0);
        }
      } else {
        state[node] = 2;
        stack.pop_back();
      }
    }
  }
  return {};
}

}  // namespace

TaxonomyGraph TaxonomyGraph::build(std::vector<ConceptRecord> nodes, std::vector<Edge> edges) {
  if (nodes.empty()) throw ValidationError("taxonomy has no nodes");
  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id.empty()) throw ValidationError("empty node id");
    if (nodes[i].surface.empty()) throw ValidationError("node '" + nodes[i].id + "' has an empty surface name");
    if (i > 0 && nodes[i].id == nodes[i - 1].id) throw ValidationError("duplicate node id '" + nodes[i].id + "'");
  }

  TaxonomyGraph g;
  g.records_ = std::move(nodes);
  const std::size_t n = g.records_.size();
  g.index_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) g.index_.emplace(g.records_[i].id, i);

  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (i > 0 && e == edges[i - 1]) throw ValidationError("duplicate edge " + e.parent + " -> " + e.child);
    if (!g.index_.contains(e.parent)) throw ValidationError("dangling edge endpoint '" + e.parent + "' (" + e.parent + " -> " + e.child + ")");
    if (!g.index_.contains(e.child)) throw ValidationError("dangling edge endpoint '" + e.child + "' (" + e.parent + " -> " + e.child + ")");
  }
  g.edges_ = std::move(edges);

  g.parents_.assign(n, {});
  g.children_.assign(n, {});
  for (const auto& e : g.edges_) {
    const std::size_t p = g.index_.at(e.parent);
    const std::size_t c = g.index_.at(e.child);
    g.parents_[c].push_back(p);
    g.children_[p].push_back(c);
  }
  for (auto& list : g.parents_) std::sort(list.begin(), list.end());
  for (auto& list : g.children_) std::sort(list.begin(), list.end());

  if (const auto cycle = find_cycle(g.children_); !cycle.empty()) {
    std::string path;
    for (std::size_t idx : cycle) path += g.records_[idx].id + " -> ";
    path += g.records_[cycle.front()].id;
    throw ValidationError("cycle detected: " + path);
  }

  // Multi-source BFS from all roots gives shortest root-to-node depth.
  g.depth_.assign(n, 0);
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (g.parents_[i].empty()) {
      g.depth_[i] = 1;
      frontier.push_back(i);
    }
  }
  while (!frontier.empty()) {
    const std::size_t cur = frontier.front();
    frontier.pop_front();
    for (std::size_t child : g.children_[cur]) {
      if (g.depth_[child] == 0) {
        g.depth_[child] = g.depth_[cur] + 1;
        frontier.push_back(child);
      }
    }
  }
  return g;
}

std::size_t TaxonomyGraph::index_of(const NodeId& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown node '" + id + "'");
  return it->second;
}

std::vector<std::size_t> TaxonomyGraph::roots() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (is_root(i)) out.push_back(i);
  return out;
}

std::vector<std::size_t> TaxonomyGraph::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (is_leaf(i)) out.push_back(i);
  return out;
}

std::set<std::size_t> TaxonomyGraph::ancestors(std::size_t index) const {
  std::set<std::size_t> seen;
  std::vector<std::size_t> stack(parents_[index].begin(), parents_[index].end());
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    stack.insert(stack.end(), parents_[cur].begin(), parents_[cur].end());
  }
  return seen;
}

std::set<std::size_t> TaxonomyGraph::descendants(std::size_t index) const {
  std::set<std::size_t> seen;
  std::vector<std::size_t> stack(children_[index].begin(), children_[index].end());
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    stack.insert(stack.end(), children_[cur].begin(), children_[cur].end());
  }
  return seen;
}

bool TaxonomyGraph::single_parent() const {
  return std::all_of(parents_.begin(), parents_.end(), [](const auto& p) { return p.size() <= 1; });
}

TaxonomyGraph TaxonomyGraph::without(const std::set<NodeId>& removed) const {
  std::vector<ConceptRecord> nodes;
  for (const auto& r : records_)
    if (!removed.contains(r.id)) nodes.push_back(r);
  std::vector<Edge> kept;
  for (const auto& e : edges_)
    if (!removed.contains(e.parent) && !removed.contains(e.child)) kept.push_back(e);
  return build(std::move(nodes), std::move(kept));
}

std::vector<ConceptRecord> parse_nodes(std::string_view text, std::string_view source) {
  std::vector<ConceptRecord> out;
  std::size_t line_no = 0;
  for (auto raw : split_char(text, '\n')) {
    ++line_no;
    const std::string line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 3) {
      throw ValidationError(std::string(source) + ":" + std::to_string(line_no) +
                            ": expected id<TAB>surface<TAB>definition, got " + std::to_string(fields.size()) + " field(s)");
    }
    ConceptRecord rec{unescape_field(fields[0]), unescape_field(fields[1]),
                      fields.size() == 3 ? unescape_field(fields[2]) : std::string{}};
    if (rec.id.empty()) throw ValidationError(std::string(source) + ":" + std::to_string(line_no) + ": empty id");
    if (rec.surface.empty()) throw ValidationError(std::string(source) + ":" + std::to_string(line_no) + ": empty surface");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<Edge> parse_edges(std::string_view text, std::string_view source) {
  std::vector<Edge> out;
  std::size_t line_no = 0;
  for (auto raw : split_char(text, '\n')) {
    ++line_no;
    const std::string line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ValidationError(std::string(source) + ":" + std::to_string(line_no) + ": expected parent_id<TAB>child_id");
    }
    out.push_back({unescape_field(fields[0]), unescape_field(fields[1])});
  }
  return out;
}

TaxonomyGraph load_taxonomy(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path) {
  auto nodes = parse_nodes(read_file(nodes_path), nodes_path.string());
  auto edges = parse_edges(read_file(edges_path), edges_path.string());
  return TaxonomyGraph::build(std::move(nodes), std::move(edges));
}

std::string format_nodes(const TaxonomyGraph& g) {
  std::string out;
  for (const auto& r : g.records()) {
    out += escape_field(r.id) + '\t' + escape_field(r.surface) + '\t' + escape_field(r.definition) + '\n';
  }
  return out;
}

std::string format_edges(const TaxonomyGraph& g) {
  std::string out;
  for (const auto& e : g.edges()) out += escape_field(e.parent) + '\t' + escape_field(e.child) + '\n';
  return out;
}

SplitResult split_leaves(const TaxonomyGraph& g, double fraction, std::uint64_t rng_seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("split fraction must lie in (0, 1), got " + format_double(fraction));
  }
  std::vector<std::size_t> candidates = g.leaves();
  if (candidates.size() < 2) throw ValidationError("taxonomy needs at least 2 leaves to split");
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(candidates.size())));
  if (target == 0) {
    throw ValidationError("fraction " + format_double(fraction) + " of " + std::to_string(candidates.size()) +
                          " leaves rounds to zero queries");
  }

  Rng rng(rng_seed);
  shuffle_in_place(candidates, rng);

  std::set<std::size_t> selected;
  std::set<std::size_t> protected_parents;
  for (std::size_t leaf : candidates) {
    if (selected.size() == target) break;
    // A leaf with no parent has no gold anchor, and a leaf that is a gold
    // parent of a selected query must stay in the seed.
    if (g.parents(leaf).empty() || protected_parents.contains(leaf)) continue;
    const auto& parents = g.parents(leaf);
    if (std::any_of(parents.begin(), parents.end(), [&](std::size_t p) { return selected.contains(p); })) continue;
    selected.insert(leaf);
    protected_parents.insert(parents.begin(), parents.end());
  }
  if (selected.empty()) throw ValidationError("no leaf can be held out while keeping its gold parents");

  SplitResult result;
  result.fraction = fraction;
  result.split_seed = rng_seed;
  std::set<NodeId> removed;
  for (std::size_t idx : selected) {
    HeldOutQuery q{g.id_of(idx), {}};
    for (std::size_t p : g.parents(idx)) q.gold_parents.insert(g.id_of(p));
    removed.insert(q.query);
    result.queries.push_back(std::move(q));
  }
  std::sort(result.queries.begin(), result.queries.end(), [](const auto& a, const auto& b) { return a.query < b.query; });
  result.seed = g.without(removed);
  return result;
}

std::string format_split_manifest(const SplitResult& split) {
  std::string out = "#fraction=" + format_double(split.fraction) + "\tseed=" + std::to_string(split.split_seed) + '\n';
  for (const auto& q : split.queries) {
    out += escape_field(q.query) + '\t';
    bool first = true;
    for (const auto& p : q.gold_parents) {
      if (!first) out += ',';
      out += escape_field(p);
      first = false;
    }
    out += '\n';
  }
  return out;
}

SplitManifest parse_split_manifest(std::string_view text) {
  SplitManifest m;
  std::size_t line_no = 0;
  for (auto raw : split_char(text, '\n')) {
    ++line_no;
    const std::string line = strip_cr(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      for (auto field : split_tabs(std::string_view(line).substr(1))) {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) continue;
        const auto key = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        if (key == "fraction") m.fraction = parse_double(value, "fraction");
        if (key == "seed") m.split_seed = static_cast<std::uint64_t>(parse_int(value, "seed"));
      }
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ValidationError("queries:" + std::to_string(line_no) + ": expected query_id<TAB>gold_parent_ids");
    }
    HeldOutQuery q{unescape_field(fields[0]), {}};
    for (auto p : split_char(fields[1], ',')) {
      if (p.empty()) throw ValidationError("queries:" + std::to_string(line_no) + ": empty gold parent id");
      q.gold_parents.insert(unescape_field(p));
    }
    m.queries.push_back(std::move(q));
  }
  return m;
}

std::set<std::size_t> hard_negative_pool(const TaxonomyGraph& g, std::size_t child, bool exclude_ancestors) {
  std::set<std::size_t> pool;
  const auto& parents = g.parents(child);
  for (std::size_t p : parents) {
    for (std::size_t sibling : g.children(p)) pool.insert(sibling);
    for (std::size_t grand : g.parents(p)) {
      pool.insert(grand);
      for (std::size_t uncle : g.children(grand)) {
        if (uncle == p) continue;
        pool.insert(uncle);
        for (std::size_t cousin : g.children(uncle)) pool.insert(cousin);
      }
    }
  }
  pool.erase(child);
  for (std::size_t p : parents) pool.erase(p);
  if (exclude_ancestors) {
    for (std::size_t a : g.ancestors(child)) pool.erase(a);
  }
  return pool;
}

std::set<NodeId> hard_negative_pool(const TaxonomyGraph& g, const NodeId& child, bool exclude_ancestors) {
  std::set<NodeId> out;
  for (std::size_t idx : hard_negative_pool(g, g.index_of(child), exclude_ancestors)) out.insert(g.id_of(idx));
  return out;
}

double wu_palmer(const TaxonomyGraph& g, std::size_t a, std::size_t b) {
  if (a == b) return 1.0;
  auto anc_a = g.ancestors(a);
  anc_a.insert(a);
  auto anc_b = g.ancestors(b);
  anc_b.insert(b);
  int lca_depth = 0;
  for (std::size_t x : anc_a)
    if (anc_b.contains(x)) lca_depth = std::max(lca_depth, g.depth(x));
  const double value = 2.0 * lca_depth / static_cast<double>(g.depth(a) + g.depth(b));
  // Shortest-path depths in a DAG can make an ancestor deeper than a
  // descendant; the score stays within [0, 1).
  return std::min(value, std::nextafter(1.0, 0.0));
}

double wu_palmer(const TaxonomyGraph& g, const NodeId& a, const NodeId& b) {
  return wu_palmer(g, g.index_of(a), g.index_of(b));
}

}  // namespace gbox
