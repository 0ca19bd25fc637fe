#pragma once

#include <string>

#include "doctest.h"

#include "bdnn/error.hpp"

// Runs expr and checks it throws bdnn::Error with the given code.
#define CHECK_ERROR_CODE(expr, expected)                      \
  do {                                                        \
    bool thrown_ = false;                                     \
    try {                                                     \
      (void)(expr);                                           \
    } catch (const bdnn::Error& e_) {                         \
      thrown_ = true;                                         \
      CHECK_MESSAGE(e_.code() == (expected), e_.what());      \
    }                                                         \
    CHECK_MESSAGE(thrown_, "expected bdnn::Error from " #expr); \
  } while (0)

inline std::string error_message(auto&& fn) {
  try {
    fn();
  } catch (const bdnn::Error& e) {
    return e.what();
  }
  return {};
}
