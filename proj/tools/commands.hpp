#pragma once

#include "expsdc/operator.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace expsdc::cli {

/// Input error with a 1-based position (column 0 when the whole line is at fault).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }
  /// Message without the position prefix.
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  int line_;
  int column_;
};

/// Accepts "a", "a+bi", "a-bj", "bi", "i", "(a,b)". Throws ParseError with a column on failure.
Complex parse_complex(std::string_view text);

/// Square complex matrix from CSV, one row per line; '#' starts a comment.
Matrix read_matrix_csv(std::istream& in);

enum ExitCode : int { kOk = 0, kUsage = 1, kDiverged = 2, kCheckFailed = 3, kFailure = 4 };

/// Runs the command line; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace expsdc::cli
