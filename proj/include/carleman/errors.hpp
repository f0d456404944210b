#pragma once

#include <stdexcept>
#include <string>

namespace carleman {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};
struct GeometryError : Error {
  using Error::Error;
};
struct SingularityError : Error {
  using Error::Error;
};
struct BranchPointError : Error {
  using Error::Error;
};
struct DegenerateMediumError : Error {
  using Error::Error;
};
struct QuadratureError : Error {
  using Error::Error;
};
struct OverflowError : Error {
  using Error::Error;
};
struct AuditError : Error {
  using Error::Error;
};

/// Rethrows the active exception with `where` prepended, keeping its type.
[[noreturn]] inline void rethrow_with_context(const std::string& where) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const GeometryError& e) {
    throw GeometryError(where + ": " + e.what());
  } catch (const SingularityError& e) {
    throw SingularityError(where + ": " + e.what());
  } catch (const BranchPointError& e) {
    throw BranchPointError(where + ": " + e.what());
  } catch (const DegenerateMediumError& e) {
    throw DegenerateMediumError(where + ": " + e.what());
  } catch (const QuadratureError& e) {
    throw QuadratureError(where + ": " + e.what());
  } catch (const OverflowError& e) {
    throw OverflowError(where + ": " + e.what());
  } catch (const AuditError& e) {
    throw AuditError(where + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(where + ": " + e.what());
  }
}

}  // namespace carleman
