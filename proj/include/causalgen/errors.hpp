#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace causalgen {

// Error taxonomy shared across the library. code() is the stable
// machine-readable name; the CLI prints it on its last output line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define CAUSALGEN_ERROR_TYPE(Name)                     \
  class Name : public Error {                          \
   public:                                             \
    explicit Name(const std::string& msg)              \
        : Error(#Name, msg) {}                         \
  };

CAUSALGEN_ERROR_TYPE(ParseError)
CAUSALGEN_ERROR_TYPE(CyclicGraph)
CAUSALGEN_ERROR_TYPE(DuplicateNode)
CAUSALGEN_ERROR_TYPE(DuplicateEdge)
CAUSALGEN_ERROR_TYPE(UnknownNode)
CAUSALGEN_ERROR_TYPE(UnsupportedMechanism)
CAUSALGEN_ERROR_TYPE(ImpossibleEvidence)
CAUSALGEN_ERROR_TYPE(ShapeError)
CAUSALGEN_ERROR_TYPE(DomainError)
CAUSALGEN_ERROR_TYPE(NestingUnsupported)
CAUSALGEN_ERROR_TYPE(SchemaError)
CAUSALGEN_ERROR_TYPE(UsageError)

#undef CAUSALGEN_ERROR_TYPE

}  // namespace causalgen
