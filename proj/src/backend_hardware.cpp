#include <sys/mman.h>
#include <sys/syscall.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <mutex>
#include <vector>

#include "rewind/backend.hpp"

namespace rewind {
namespace {

// PKRU holds two bits per key: bit 2k disables access, bit 2k+1 disables
// writes. 0x55555555 is access-disable for all 16 keys.
constexpr uint32_t kAllAccessDisabled = 0x55555555u;
constexpr int kHardwareKeyCap = 16;

long sys_pkey_alloc() { return syscall(SYS_pkey_alloc, 0u, 0u); }
long sys_pkey_free(int key) { return syscall(SYS_pkey_free, key); }
long sys_pkey_mprotect(void* addr, size_t len, int prot, int key) {
  return syscall(SYS_pkey_mprotect, addr, len, prot, key);
}

uint32_t rdpkru() {
  uint32_t eax;
  asm volatile(".byte 0x0f,0x01,0xee" : "=a"(eax) : "c"(0), "d"(0));
  return eax;
}

void wrpkru(uint32_t pkru) {
  asm volatile(".byte 0x0f,0x01,0xef" : : "a"(pkru), "c"(0), "d"(0));
}

uint32_t key_bits(AccessRights r) {
  switch (r) {
    case AccessRights::NoAccess: return 0b01;  // access-disable
    case AccessRights::ReadOnly: return 0b10;  // write-disable
    case AccessRights::ReadWrite: return 0b00;
  }
  return 0b01;
}

AccessRights rights_from_bits(uint32_t bits) {
  if (bits & 0b01) return AccessRights::NoAccess;
  if (bits & 0b10) return AccessRights::ReadOnly;
  return AccessRights::ReadWrite;
}

uint32_t with_key_bits(uint32_t pkru, int key, uint32_t bits) {
  const int shift = key * 2;
  return (pkru & ~(0b11u << shift)) | (bits << shift);
}

class HardwareBackend final : public Backend {
 public:
  explicit HardwareBackend(int max_keys)
      : max_keys_(max_keys), regions_(static_cast<size_t>(kHardwareKeyCap)) {}

  BackendKind kind() const override { return BackendKind::Hardware; }

  Capabilities capabilities() const override {
    return {max_keys_, SwitchCostClass::RegisterWrite};
  }

  Result<ProtectionKeyHandle> acquire_key() override {
    std::lock_guard lock(mu_);
    long key = sys_pkey_alloc();
    if (key < 0) {
      return errno == ENOSPC
                 ? Error{Errc::KeyExhausted, "pkey_alloc: no keys left"}
                 : Error{Errc::OsRejected, "pkey_alloc failed"};
    }
    live_.fetch_or(1u << key, std::memory_order_release);
    // pkey_alloc leaves the new key enabled for this thread, which is the
    // contract (initially ReadWrite for the acquiring thread).
    wrpkru(with_key_bits(rdpkru(), static_cast<int>(key),
                         key_bits(AccessRights::ReadWrite)));
    return ProtectionKeyHandle{static_cast<int>(key)};
  }

  Result<void> release_key(ProtectionKeyHandle key) override {
    std::lock_guard lock(mu_);
    if (!is_live(key)) return Error{Errc::UnknownKey, "key not live"};
    if (!regions_[static_cast<size_t>(key.key_id)].empty()) {
      return Error{Errc::KeyInUse, "regions still tagged"};
    }
    if (sys_pkey_free(key.key_id) != 0) {
      return Error{Errc::OsRejected, "pkey_free failed"};
    }
    live_.fetch_and(~(1u << key.key_id), std::memory_order_release);
    return {};
  }

  Result<void> tag_region(MemoryRegion region,
                          ProtectionKeyHandle key) override {
    const size_t ps = page_size();
    if (region.base == nullptr || region.length == 0 ||
        region.begin() % ps != 0 || region.length % ps != 0) {
      return Error{Errc::AlignmentError, "region must be page-aligned"};
    }
    std::lock_guard lock(mu_);
    if (!is_live(key)) return Error{Errc::UnknownKey, "key not live"};
    if (sys_pkey_mprotect(region.base, region.length, PROT_READ | PROT_WRITE,
                          key.key_id) != 0) {
      return Error{Errc::OsRejected, "pkey_mprotect failed"};
    }
    regions_[static_cast<size_t>(key.key_id)].push_back(region);
    return {};
  }

  Result<void> untag_region(MemoryRegion region,
                            ProtectionKeyHandle key) override {
    std::lock_guard lock(mu_);
    if (!is_live(key)) return Error{Errc::UnknownKey, "key not live"};
    auto& list = regions_[static_cast<size_t>(key.key_id)];
    for (size_t i = 0; i < list.size(); ++i) {
      if (list[i].base == region.base && list[i].length == region.length) {
        list[i] = list.back();
        list.pop_back();
        sys_pkey_mprotect(region.base, region.length, PROT_READ | PROT_WRITE,
                          0);
        return {};
      }
    }
    return Error{Errc::UnknownKey, "region not tagged with key"};
  }

  Result<void> set_thread_access(ProtectionKeyHandle key,
                                 AccessRights rights) override {
    if (!is_live(key)) return Error{Errc::UnknownKey, "key not live"};
    wrpkru(with_key_bits(rdpkru(), key.key_id, key_bits(rights)));
    return {};
  }

  Result<AccessRights> thread_access(ProtectionKeyHandle key) const override {
    if (!is_live(key)) return Error{Errc::UnknownKey, "key not live"};
    return rights_from_bits((rdpkru() >> (key.key_id * 2)) & 0b11);
  }

  RightsToken rights_token(ProtectionKeyHandle) const override {
    return rdpkru();
  }

  void apply_rights_token(RightsToken token) override {
    wrpkru(static_cast<uint32_t>(token));
  }

  RightsToken execution_token(RightsToken, ProtectionKeyHandle key,
                              bool confidentiality) const override {
    uint32_t pkru = kAllAccessDisabled;
    pkru = with_key_bits(pkru, 0,
                         confidentiality ? 0b01u : 0b10u);  // untagged NA / RO
    pkru = with_key_bits(pkru, key.key_id, 0b00);           // domain key RW
    return pkru;
  }

  RightsToken runtime_token(RightsToken base,
                            ProtectionKeyHandle key) const override {
    uint32_t pkru = static_cast<uint32_t>(base);
    pkru = with_key_bits(pkru, 0, 0b00);
    pkru = with_key_bits(pkru, key.key_id, 0b00);
    return pkru;
  }

 private:
  bool is_live(ProtectionKeyHandle key) const {
    return key.key_id >= 1 && key.key_id < kHardwareKeyCap &&
           (live_.load(std::memory_order_acquire) >> key.key_id) & 1u;
  }

  const int max_keys_;
  std::mutex mu_;
  std::atomic<uint32_t> live_{0};
  std::vector<std::vector<MemoryRegion>> regions_;
};

}  // namespace

Result<std::unique_ptr<Backend>> make_hardware_backend() {
  long probe = sys_pkey_alloc();
  if (probe < 0) {
    return Error{Errc::OsRejected, errno == ENOSYS
                                       ? "pkey syscalls not implemented"
                                       : "pkey_alloc refused"};
  }
  // Kernels differ in how many keys they expose; discover by exhaustion.
  std::vector<int> got{static_cast<int>(probe)};
  for (;;) {
    long k = sys_pkey_alloc();
    if (k < 0) break;
    got.push_back(static_cast<int>(k));
    if (got.size() > kHardwareKeyCap) break;  // paranoia
  }
  for (int k : got) sys_pkey_free(k);
  return std::unique_ptr<Backend>(
      new HardwareBackend(static_cast<int>(got.size())));
}

}  // namespace rewind
