#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace opdyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Row sums of stochastic matrices must match 1 to this tolerance.
inline constexpr double kRowSumTolerance = 1e-12;

/// Which group norm an agent conforms to when expressing an opinion.
enum class PublicOpinion {
  local,   ///< weighted average of neighbours' expressed opinions (rows of M)
  global,  ///< unweighted mean of every expressed opinion
};

enum class ExpressionModel {
  continuous,
  threshold,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: shapes, ranges, file contents.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The structural hypotheses behind the steady-state formulas do not hold.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

/// A solve or eigenvalue computation produced an unusable result.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what,
                          std::optional<std::size_t> row = std::nullopt)
      : Error(what), row_(row) {}

  std::optional<std::size_t> row() const { return row_; }

 private:
  std::optional<std::size_t> row_;
};

inline std::string_view to_string(PublicOpinion mode) {
  return mode == PublicOpinion::local ? "local" : "global";
}

inline PublicOpinion parse_public_opinion(std::string_view text) {
  if (text == "local") return PublicOpinion::local;
  if (text == "global") return PublicOpinion::global;
  throw InvalidInput("unknown public-opinion mode '" + std::string(text) +
                     "' (expected local|global)");
}

inline std::string_view to_string(ExpressionModel model) {
  return model == ExpressionModel::continuous ? "continuous" : "threshold";
}

}  // namespace opdyn
