#pragma once

#include <stdexcept>
#include <string>

namespace chartfolio {

// Error classes map 1:1 onto CLI exit codes.
enum class ErrorKind {
    config = 2,
    missing_artifact = 3,
    data = 4,
    numeric = 5,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

  private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::config, msg); }
inline Error missing_artifact_error(const std::string& msg) {
    return Error(ErrorKind::missing_artifact, msg);
}
inline Error data_error(const std::string& msg) { return Error(ErrorKind::data, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::numeric, msg); }

} // namespace chartfolio
