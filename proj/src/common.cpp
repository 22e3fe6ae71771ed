#include "condcov/common.hpp"

#include <iostream>
#include <utility>

namespace condcov {

namespace {
WarningHandler& handler_slot() {
  static WarningHandler handler;
  return handler;
}
}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  auto previous = handler_slot();
  handler_slot() = std::move(handler);
  return previous;
}

void warn(const std::string& message) {
  if (handler_slot())
    handler_slot()(message);
  else
    std::cerr << "[condcov] warning: " << message << "\n";
}

}  // namespace condcov
