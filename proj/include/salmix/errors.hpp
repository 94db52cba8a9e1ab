#pragma once

#include <stdexcept>
#include <string>

namespace salmix {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

/// Cholesky factorization hit a non-positive pivot.
class NotPositiveDefinite : public Error {
public:
  NotPositiveDefinite(int pivot_index, double pivot_value)
      : Error("matrix not positive definite: pivot " + std::to_string(pivot_index) +
              " = " + std::to_string(pivot_value)),
        pivot(pivot_index), value(pivot_value) {}
  int pivot;
  double value;
};

/// SAL density evaluated exactly at its pole x = mu with p >= 2.
class UnboundedDensity : public Error {
public:
  UnboundedDensity() : Error("SAL density unbounded at x = mu for p >= 2") {}
};

/// Mixture likelihood hit the SAL pole at observation `row`, component `component`.
class UnboundedLikelihood : public Error {
public:
  UnboundedLikelihood(int row_, int component_)
      : Error("unbounded likelihood at observation " + std::to_string(row_) +
              ", component " + std::to_string(component_)),
        row(row_), component(component_) {}
  int row;
  int component;
};

class DegenerateComponent : public Error {
public:
  explicit DegenerateComponent(int component_, const std::string& what_)
      : Error("degenerate component " + std::to_string(component_) + ": " + what_),
        component(component_) {}
  int component;
};

class EmptyComponent : public Error {
public:
  explicit EmptyComponent(int component_)
      : Error("component " + std::to_string(component_) + " has no mass"),
        component(component_) {}
  int component;
};

class DegeneratePosterior : public Error {
public:
  explicit DegeneratePosterior(int component_, const std::string& what_)
      : Error("degenerate posterior for component " + std::to_string(component_) + ": " + what_),
        component(component_) {}
  int component;
};

/// Gibbs S2.4 guard exhausted its resampling budget.
class DegenerateDraw : public Error {
public:
  explicit DegenerateDraw(int component_, int attempts_)
      : Error("component " + std::to_string(component_) + " still degenerate after " +
              std::to_string(attempts_) + " redraws"),
        component(component_), attempts(attempts_) {}
  int component;
  int attempts;
};

class NumericError : public Error {
public:
  explicit NumericError(int row_, const std::string& what_)
      : Error("numeric failure at row " + std::to_string(row_) + ": " + what_), row(row_) {}
  int row;
};

/// CSV / results-file problems, with a location when one is known.
class ParseError : public Error {
public:
  ParseError(std::string what_, long row_ = -1, long column_ = -1)
      : Error(row_ >= 0 ? "parse error at row " + std::to_string(row_) +
                              (column_ >= 0 ? ", column " + std::to_string(column_) : "") +
                              ": " + what_
                        : "parse error: " + what_),
        row(row_), column(column_) {}
  long row;
  long column;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace salmix
