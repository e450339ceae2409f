#pragma once

#include <stdexcept>
#include <string>

namespace gcn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not line up.
struct ShapeError : Error {
  using Error::Error;
};

/// An argument violates a documented precondition.
struct ValidationError : Error {
  using Error::Error;
};

/// A dataset directory is missing, truncated or inconsistent.
struct LoadError : Error {
  using Error::Error;
};

/// Training produced a non-finite loss.
struct DivergenceError : Error {
  DivergenceError(std::size_t epoch, double cross_entropy, double weight_decay,
                  double graph_reg, double total, const std::string& context = {});

  std::size_t epoch;
  double cross_entropy;
  double weight_decay;
  double graph_reg;
  double total;
};

}  // namespace gcn
