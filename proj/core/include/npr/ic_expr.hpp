#pragma once

#include <string>

#include "npr/problems.hpp"

namespace npr {

/// Parses a closed-form initial condition from a small grammar:
///   expr   := term (('+'|'-') term)*
///   term   := factor ('*' factor)*
///   factor := number | 'pi' | 'x' | ('sin'|'cos') '(' expr ')'
/// Each term may contain at most one x or one trig factor, and trig arguments
/// must be affine in x, so every parse lands exactly in ICSample: an affine
/// part plus amplitude-scaled sin/cos terms.  Examples:
///   "1.5"                   constant
///   "5*x + 3*sin(4*pi*x)"   affine plus one mode
///   "2*cos(pi*x + pi)"      phase-shifted mode
/// Throws ConfigError with the offending position on anything else.
ICSample parse_ic_expr(const std::string& text);

}  // namespace npr
