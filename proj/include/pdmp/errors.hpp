#pragma once

#include <stdexcept>
#include <string>

namespace pdmp
{

// Base class for every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// A parameter or state lies outside its admissible set.
class DomainError : public Error
{
  public:
    using Error::Error;
};

// Cumulative intensity never reached the requested level within the search horizon.
class UnboundedSearchError : public Error
{
  public:
    using Error::Error;
};

// Too many jumps inside a finite time window.
class ExplosionError : public Error
{
  public:
    using Error::Error;
};

// An integral, normalizer or supremum failed to converge.
class DivergenceError : public Error
{
  public:
    using Error::Error;
};

// Statistical procedure has too little usable data or a degenerate denominator.
class EstimationError : public Error
{
  public:
    using Error::Error;
};

}  // namespace pdmp
