#pragma once

#include <string>
#include <string_view>

#include "ultrarecon/tree.hpp"

namespace ultrarecon {

/// "(a:0.5,b:0.5);" style text; branch lengths printed with 17 significant digits.
std::string to_newick(const Tree& tree);

/// Parses binary Newick with branch lengths. Internal node names and a root
/// branch length are accepted and ignored; a missing branch length reads as 0.
/// Throws ParseError carrying the byte offset of the problem.
Tree from_newick(std::string_view text);

}  // namespace ultrarecon
