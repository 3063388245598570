#pragma once

#include <cstdint>
#include <utility>
#include <variant>

namespace rewind {

enum class Errc : int {
  KeyExhausted = 1,
  KeyInUse,
  UnknownKey,
  AlignmentError,
  OsRejected,
  ConfigError,
  IllegalState,
  BusyDomain,
  NestingLimit,
  ArenaExhausted,
  OversizedArgument,
  EncodingError,
  DecodeError,
  StaleSnapshot,
  HandlerConflict,
  MonitorNotInstalled,
  NoActiveDomain,
  DuplicateFunctionId,
  UnknownFunctionId,
  PolicyError,
  SpawnFailed,
  IoError,
};

const char* errc_name(Errc c);

struct Error {
  Errc code;
  const char* detail = nullptr;  // static strings only; safe to copy anywhere
};

/// Minimal expected-style result. The fault path never constructs these;
/// ordinary operations return them instead of throwing.
template <typename T, typename E = Error>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::in_place_index<0>, std::move(value)) {}
  Result(E error) : v_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() & { return std::get<0>(v_); }
  const T& value() const& { return std::get<0>(v_); }
  T&& value() && { return std::get<0>(std::move(v_)); }
  const E& error() const { return std::get<1>(v_); }

  T value_or(T fallback) const& { return ok() ? std::get<0>(v_) : fallback; }

 private:
  std::variant<T, E> v_;
};

template <typename E>
class [[nodiscard]] Result<void, E> {
 public:
  Result() = default;
  Result(E error) : err_(std::move(error)), ok_(false) {}

  bool ok() const { return ok_; }
  explicit operator bool() const { return ok_; }
  const E& error() const { return err_; }

 private:
  E err_{};
  bool ok_ = true;
};

inline bool is_error(const Result<void>& r, Errc c) {
  return !r.ok() && r.error().code == c;
}
template <typename T>
bool is_error(const Result<T>& r, Errc c) {
  return !r.ok() && r.error().code == c;
}

}  // namespace rewind
