#include "spdcal/errors.hpp"

namespace spdcal {

ParseError::ParseError(std::string file, std::size_t line, const std::string& expectation)
    : Error(file + ":" + std::to_string(line) + ": expected " + expectation),
      file_(std::move(file)),
      line_(line) {}

}  // namespace spdcal
