#pragma once

#include <stdexcept>
#include <string>

namespace seeground {

enum class Errc {
  invalid_argument,
  parse,
  io,
  not_found,
  contract,
  transport,
  timeout,
  unparseable_reply,
  rejected_answer,  // the agent named an id the caller refused
};

const char* errc_name(Errc code);

/// Single exception type used across the engine. The code lets callers
/// (pipeline stage bookkeeping, CLI exit codes) branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace seeground
