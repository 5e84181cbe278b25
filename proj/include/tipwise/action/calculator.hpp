#pragma once

#include <string>
#include <string_view>

namespace tipwise {

/// Evaluates `+ - * /` (also `×` `÷`), parentheses, unary minus and decimal
/// literals with the usual precedence, left-associative.
/// Throws ParseError or DivisionByZero.
double eval_calculate(std::string_view expr);

/// Parse-only check used when validating `calculate(...)` actions.
void validate_expression(std::string_view expr);

/// Integral values print without a fraction ("14"); others use the
/// shortest round-trip form.
std::string format_number(double value);

}  // namespace tipwise
