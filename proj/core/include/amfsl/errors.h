#ifndef AMFSL_ERRORS_H_
#define AMFSL_ERRORS_H_

#include <stdexcept>

namespace amfsl {

// Inconsistent run configuration: bad keys or values, or components built
// for a different episode shape.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace amfsl

#endif  // AMFSL_ERRORS_H_
