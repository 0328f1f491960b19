#ifndef PGAM_ERROR_HPP_
#define PGAM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace pgam {

// Exit code categories used by the CLI.
enum class ErrorCode : int {
  input = 2,      // bad files, schemas, formulas, parameters
  request = 3,    // valid model, invalid request (unknown term, bad grid)
  numeric = 4,    // convergence / rank / evaluation failures
};

class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string kind, const std::string& message,
        ErrorCode code = ErrorCode::input)
      : std::runtime_error("ERROR:" + module + ":" + kind + ": " + message),
        module_(std::move(module)),
        kind_(std::move(kind)),
        code_(code) {}

  const std::string& module() const { return module_; }
  const std::string& kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(code_); }

 private:
  std::string module_;
  std::string kind_;
  ErrorCode code_;
};

}  // namespace pgam

#endif  // PGAM_ERROR_HPP_
