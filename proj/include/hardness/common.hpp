#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hardness {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Labels = std::vector<int>;
using Indices = std::vector<int>;

enum class ErrorCode {
  invalid_argument,
  schema_mismatch,
  unparseable_cell,
  empty_dataset,
  single_class,
  missing_value,
  class_too_small,
  degenerate,
  io,
  missing_artifact,
  version_mismatch,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, const std::string& what,
                    ErrorCode code = ErrorCode::invalid_argument) {
  if (!condition) fail(code, what);
}

/// Seed for every stochastic operation. Identical seed and inputs give
/// bit-identical outputs.
struct Seed {
  std::uint64_t value = 0;

  /// Independent child seed for a labelled sub-stream.
  Seed derive(std::uint64_t stream) const;
};

}  // namespace hardness
