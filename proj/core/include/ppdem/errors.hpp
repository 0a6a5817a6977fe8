#pragma once

#include <stdexcept>
#include <string>

namespace ppdem {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A covariance factorization failed: the matrix is not positive definite.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// A responsibility row's denominator collapsed to zero even in log domain.
class DegenerateDenominator : public Error {
 public:
  using Error::Error;
};

// A mixture component lost (essentially) all probability mass.
class EmptyComponent : public Error {
 public:
  explicit EmptyComponent(int component, double mass)
      : Error("mixture component " + std::to_string(component) +
              " lost all mass (a_j = " + std::to_string(mass) + ")"),
        component_(component) {}
  int component() const { return component_; }

 private:
  int component_;
};

// An iterative solve ran out of iterations; carries the last residual.
class MaxItersExceeded : public Error {
 public:
  explicit MaxItersExceeded(int iters, double residual)
      : Error("no convergence after " + std::to_string(iters) +
              " iterations (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// The graph has no Hamiltonian cycle; the ring-summation baseline is disabled.
class NoHamiltonianCycle : public Error {
 public:
  using Error::Error;
};

// The honest nodes do not form a connected subgraph after removing the
// corrupt ones, so the honest-sum leakage contract does not apply.
class HonestSubgraphDisconnected : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

// The federated attack cannot recover a node: all its masses are ~zero.
class UnrecoverableNode : public Error {
 public:
  explicit UnrecoverableNode(int node)
      : Error("node " + std::to_string(node) +
              " has no responsibility mass above threshold"),
        node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

class RetriesExhausted : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row, long column)
      : Error(what + " (row " + std::to_string(row) + ", column " +
              std::to_string(column) + ")"),
        row_(row),
        column_(column) {}
  long row() const { return row_; }
  long column() const { return column_; }

 private:
  long row_;
  long column_;
};

class NonNumeric : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace ppdem
