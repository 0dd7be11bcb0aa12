#pragma once

#include <stdexcept>
#include <string>

namespace gridflex {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define GRIDFLEX_DEFINE_ERROR(Name)                                            \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string &what) : Error(#Name ": " + what) {}       \
  }

GRIDFLEX_DEFINE_ERROR(InvalidArgument);
GRIDFLEX_DEFINE_ERROR(DegenerateTemperature);
GRIDFLEX_DEFINE_ERROR(SeriesTooShort);
GRIDFLEX_DEFINE_ERROR(StepTooLarge);
GRIDFLEX_DEFINE_ERROR(ZeroBand);
GRIDFLEX_DEFINE_ERROR(RankDeficient);
GRIDFLEX_DEFINE_ERROR(DimensionMismatch);
GRIDFLEX_DEFINE_ERROR(Infeasible);
GRIDFLEX_DEFINE_ERROR(Unbounded);
GRIDFLEX_DEFINE_ERROR(WindowTooShort);
GRIDFLEX_DEFINE_ERROR(ConfigError);
GRIDFLEX_DEFINE_ERROR(SchemaError);

#undef GRIDFLEX_DEFINE_ERROR

} // namespace gridflex
