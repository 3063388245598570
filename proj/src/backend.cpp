#include "rewind/backend.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace rewind {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::KeyExhausted: return "KeyExhausted";
    case Errc::KeyInUse: return "KeyInUse";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::AlignmentError: return "AlignmentError";
    case Errc::OsRejected: return "OsRejected";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IllegalState: return "IllegalState";
    case Errc::BusyDomain: return "BusyDomain";
    case Errc::NestingLimit: return "NestingLimit";
    case Errc::ArenaExhausted: return "ArenaExhausted";
    case Errc::OversizedArgument: return "OversizedArgument";
    case Errc::EncodingError: return "EncodingError";
    case Errc::DecodeError: return "DecodeError";
    case Errc::StaleSnapshot: return "StaleSnapshot";
    case Errc::HandlerConflict: return "HandlerConflict";
    case Errc::MonitorNotInstalled: return "MonitorNotInstalled";
    case Errc::NoActiveDomain: return "NoActiveDomain";
    case Errc::DuplicateFunctionId: return "DuplicateFunctionId";
    case Errc::UnknownFunctionId: return "UnknownFunctionId";
    case Errc::PolicyError: return "PolicyError";
    case Errc::SpawnFailed: return "SpawnFailed";
    case Errc::IoError: return "IoError";
  }
  return "unknown";
}

const char* to_string(AccessRights r) {
  switch (r) {
    case AccessRights::NoAccess: return "no-access";
    case AccessRights::ReadOnly: return "read-only";
    case AccessRights::ReadWrite: return "read-write";
  }
  return "?";
}

const char* to_string(BackendKind k) {
  switch (k) {
    case BackendKind::Hardware: return "hardware";
    case BackendKind::Portable: return "portable";
    case BackendKind::Recording: return "record";
  }
  return "?";
}

size_t page_size() {
  static const size_t ps = static_cast<size_t>(sysconf(_SC_PAGESIZE));
  return ps;
}

namespace {

std::atomic<Backend*> g_override{nullptr};

Backend* build_default_backend() {
  const char* env = std::getenv("REWIND_BACKEND");
  std::string_view want = env ? env : "hardware";

  if (want == "portable") {
    return make_portable_backend().release();
  }
  if (want == "record") {
    // Header not included here to keep the dependency one-way; the factory
    // lives in backend_recording.cpp.
    extern std::unique_ptr<Backend> make_recording_backend_default();
    return make_recording_backend_default().release();
  }
  if (want != "hardware" && env) {
    std::fprintf(stderr,
                 "rewind: unknown REWIND_BACKEND '%s', trying hardware\n", env);
  }
  auto hw = make_hardware_backend();
  if (hw.ok()) {
    return hw.value().release();
  }
  std::fprintf(stderr,
               "rewind: hardware protection keys unavailable (%s), "
               "falling back to portable backend\n",
               hw.error().detail ? hw.error().detail : "no detail");
  return make_portable_backend().release();
}

}  // namespace

Backend& active_backend() {
  if (Backend* o = g_override.load(std::memory_order_acquire)) {
    return *o;
  }
  static Backend* selected = build_default_backend();
  return *selected;
}

void set_backend_for_testing(Backend* backend) {
  g_override.store(backend, std::memory_order_release);
}

}  // namespace rewind
