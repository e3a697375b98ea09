#ifndef LSVG_COMMON_ERROR_H_
#define LSVG_COMMON_ERROR_H_

#include <stdexcept>
#include <string>

namespace lsvg {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad files, schema violations, shape mismatches coming
// from user data. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

#define LSVG_CHECK(cond, msg)                                   \
  do {                                                          \
    if (!(cond)) throw ::lsvg::Error(std::string(msg));         \
  } while (0)

#define LSVG_VALIDATE(cond, msg)                                \
  do {                                                          \
    if (!(cond)) throw ::lsvg::ValidationError(std::string(msg)); \
  } while (0)

}  // namespace lsvg

#endif  // LSVG_COMMON_ERROR_H_
