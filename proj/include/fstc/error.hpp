#pragma once

#include <stdexcept>
#include <string>

namespace fstc {

// Every failure raised by the library carries the name of the module that
// detected it so the CLI and the service can surface it verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

}  // namespace fstc
