#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>

#include "rewind/error.hpp"

namespace rewind {

enum class AccessRights : uint8_t { NoAccess = 0, ReadOnly = 1, ReadWrite = 2 };
enum class SwitchCostClass : uint8_t { RegisterWrite, Syscall };
enum class BackendKind : uint8_t { Hardware, Portable, Recording };

const char* to_string(AccessRights r);
const char* to_string(BackendKind k);

struct Capabilities {
  int max_keys;
  SwitchCostClass switch_cost_class;
};

/// Key 0 is the default key covering untagged memory and is never handed
/// out by acquire_key.
struct ProtectionKeyHandle {
  int key_id = -1;
  bool valid() const { return key_id > 0; }
  friend bool operator==(const ProtectionKeyHandle&,
                         const ProtectionKeyHandle&) = default;
};

struct MemoryRegion {
  std::byte* base = nullptr;
  size_t length = 0;

  uintptr_t begin() const { return reinterpret_cast<uintptr_t>(base); }
  uintptr_t end() const { return begin() + length; }
  bool contains(uintptr_t addr) const { return addr >= begin() && addr < end(); }
};

size_t page_size();

/// Opaque per-backend encoding of "the calling thread's access rights state
/// relevant to one domain key". Hardware: the raw PKRU word. Portable: the
/// key id plus its current process-global rights.
using RightsToken = uint64_t;

class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendKind kind() const = 0;
  virtual Capabilities capabilities() const = 0;

  virtual Result<ProtectionKeyHandle> acquire_key() = 0;
  virtual Result<void> release_key(ProtectionKeyHandle key) = 0;
  virtual Result<void> tag_region(MemoryRegion region,
                                  ProtectionKeyHandle key) = 0;
  virtual Result<void> untag_region(MemoryRegion region,
                                    ProtectionKeyHandle key) = 0;

  /// Restricts the calling thread's access to memory tagged with key.
  /// Lock-free: sits on the domain-switch hot path.
  virtual Result<void> set_thread_access(ProtectionKeyHandle key,
                                         AccessRights rights) = 0;
  virtual Result<AccessRights> thread_access(ProtectionKeyHandle key) const = 0;

  // Token interface used by the domain-switch and rewind paths. All three
  // calls are lock-free and allocation-free.
  virtual RightsToken rights_token(ProtectionKeyHandle domain_key) const = 0;
  virtual void apply_rights_token(RightsToken token) = 0;
  /// Rights in force while domain code runs: domain key ReadWrite, every
  /// other domain key NoAccess, untagged memory ReadOnly (integrity) or
  /// NoAccess (confidentiality). The portable backend can only express the
  /// domain-key part; the rest holds through the steady-state protections
  /// of inactive domains.
  virtual RightsToken execution_token(RightsToken base, ProtectionKeyHandle key,
                                      bool confidentiality) const = 0;
  /// Rights for the runtime around the call: base plus domain key and
  /// untagged memory ReadWrite, so bookkeeping and marshalling can run.
  virtual RightsToken runtime_token(RightsToken base,
                                    ProtectionKeyHandle key) const = 0;
};

std::unique_ptr<Backend> make_portable_backend(int max_keys = 64);

/// Fails with OsRejected when the kernel or CPU lacks protection keys.
Result<std::unique_ptr<Backend>> make_hardware_backend();

/// Selected by REWIND_BACKEND (hardware|portable|record); default is
/// hardware with automatic fallback to portable when key acquisition fails
/// at startup.
Backend& active_backend();

/// Overrides active_backend() until called with nullptr. Test hook.
void set_backend_for_testing(Backend* backend);

}  // namespace rewind
