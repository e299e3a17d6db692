#pragma once

#include "opf/common.hpp"

#include <string_view>

namespace opf::harness {

/// Evaluates a matrix expression from a config file. Grammar:
///
///   expr    := term (('+' | '-') term)*
///   term    := unary ('*' unary)*
///   unary   := '-' unary | primary
///   primary := number | literal | call | '(' expr ')'
///   literal := '[' row (';' row)* ']'  |  '[' '[' row ']' (',' '[' row ']')* ']'
///   call    := kron(expr, expr) | eye(n) | zeros(r[, c]) | ones(r[, c]) | diag(expr)
///
/// Rows list entries separated by commas or whitespace, row-major. Scalars are
/// 1x1 matrices and multiply element-wise. Throws ConfigError with the column
/// of the offending token.
Matrix parse_matrix_expr(std::string_view text);

/// Formats a matrix as a literal that parse_matrix_expr reads back exactly.
std::string format_matrix(const Matrix& M);

}  // namespace opf::harness
