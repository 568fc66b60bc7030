#include "ultrarecon/newick.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <unordered_map>
#include <vector>

#include "ultrarecon/error.hpp"

namespace ultrarecon {
namespace {

void append_length(std::string& out, double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, ":%.17g", w);
  out += buf;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Tree run() {
    skip_ws();
    const NodeId root = parse_node();
    skip_ws();
    if (peek() == ':') {
      ++pos_;
      (void)parse_number();
      skip_ws();
    }
    expect(';');
    skip_ws();
    if (pos_ != s_.size()) throw ParseError("trailing characters after ';'", pos_);
    nodes_[static_cast<std::size_t>(root)].edge_weight = 0.0;
    std::unordered_map<std::string_view, std::size_t> seen;
    std::size_t li = 0;
    for (const Node& nd : nodes_) {
      if (!nd.is_leaf()) continue;
      if (!seen.emplace(nd.label, label_pos_[li]).second)
        throw ParseError("duplicate leaf label '" + nd.label + "'", label_pos_[li]);
      ++li;
    }
    try {
      return Tree(std::move(nodes_), root);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), 0);
    }
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  void expect(char ch) {
    if (peek() != ch) {
      if (pos_ >= s_.size()) throw ParseError(std::string("unexpected end of input, expected '") + ch + "'", pos_);
      throw ParseError(std::string("expected '") + ch + "' but found '" + s_[pos_] + "'", pos_);
    }
    ++pos_;
  }

  std::string parse_name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size()) {
      const char ch = s_[pos_];
      if (ch == '(' || ch == ')' || ch == ',' || ch == ':' || ch == ';' ||
          std::isspace(static_cast<unsigned char>(ch)))
        break;
      ++pos_;
    }
    return std::string(s_.substr(start, pos_ - start));
  }

  double parse_number() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size()) {
      const char ch = s_[pos_];
      if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.' || ch == 'e' || ch == 'E' || ch == '-' || ch == '+')
        ++pos_;
      else
        break;
    }
    if (start == pos_) throw ParseError("expected a branch length", start);
    const std::string token(s_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) throw ParseError("malformed branch length '" + token + "'", start);
    return v;
  }

  NodeId parse_node() {
    // Explicit stack keeps deep caterpillars off the call stack.
    struct Frame {
      NodeId id;
      std::vector<NodeId> kids;
      std::size_t open;
    };
    std::vector<Frame> stack;
    NodeId finished = kNoNode;

    while (true) {
      skip_ws();
      if (finished == kNoNode) {
        if (peek() == '(') {
          stack.push_back({new_node(), {}, pos_});
          ++pos_;
          continue;
        }
        const std::size_t at = pos_;
        std::string name = parse_name();
        if (name.empty()) {
          if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
          throw ParseError(std::string("unexpected character '") + s_[pos_] + "'", pos_);
        }
        finished = new_node();
        nodes_[static_cast<std::size_t>(finished)].label = std::move(name);
        label_pos_.push_back(at);
      }
      // A subtree just ended: read its optional branch length.
      skip_ws();
      if (peek() == ':') {
        ++pos_;
        nodes_[static_cast<std::size_t>(finished)].edge_weight = parse_number();
        skip_ws();
      }
      if (stack.empty()) return finished;
      Frame& top = stack.back();
      top.kids.push_back(finished);
      finished = kNoNode;
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == ')') {
        ++pos_;
        if (top.kids.size() != 2)
          throw ParseError("internal node has " + std::to_string(top.kids.size()) + " children, expected 2", top.open);
        Node& nd = nodes_[static_cast<std::size_t>(top.id)];
        nd.children = {top.kids[0], top.kids[1]};
        for (NodeId k : top.kids) nodes_[static_cast<std::size_t>(k)].parent = top.id;
        finished = top.id;
        stack.pop_back();
        skip_ws();
        (void)parse_name();  // internal label or support value
        continue;
      }
      if (pos_ >= s_.size()) throw ParseError("unexpected end of input, expected ',' or ')'", pos_);
      throw ParseError(std::string("expected ',' or ')' but found '") + s_[pos_] + "'", pos_);
    }
  }

  NodeId new_node() {
    nodes_.emplace_back();
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::size_t> label_pos_;
};

}  // namespace

std::string to_newick(const Tree& tree) {
  std::string out;
  out.reserve(tree.node_count() * 24);
  std::vector<std::pair<NodeId, int>> stack{{tree.root(), 0}};
  while (!stack.empty()) {
    auto [v, phase] = stack.back();
    stack.pop_back();
    if (tree.is_leaf(v)) {
      out += tree.label(v);
      if (v != tree.root()) append_length(out, tree.edge_weight(v));
      continue;
    }
    if (phase == 0) {
      out += '(';
      stack.push_back({v, 1});
      stack.push_back({tree.child(v, 0), 0});
    } else if (phase == 1) {
      out += ',';
      stack.push_back({v, 2});
      stack.push_back({tree.child(v, 1), 0});
    } else {
      out += ')';
      if (v != tree.root()) append_length(out, tree.edge_weight(v));
    }
  }
  out += ';';
  return out;
}

Tree from_newick(std::string_view text) { return Parser(text).run(); }

}  // namespace ultrarecon
