#include <sys/mman.h>

#include <algorithm>
#include <atomic>
#include <mutex>

#include "rewind/backend.hpp"

namespace rewind {
namespace {

constexpr int kMaxRegionsPerKey = 8;

int prot_for(AccessRights r) {
  switch (r) {
    case AccessRights::NoAccess: return PROT_NONE;
    case AccessRights::ReadOnly: return PROT_READ;
    case AccessRights::ReadWrite: return PROT_READ | PROT_WRITE;
  }
  return PROT_NONE;
}

Result<void> check_region(const MemoryRegion& r) {
  const size_t ps = page_size();
  if (r.base == nullptr || r.length == 0 || r.begin() % ps != 0 ||
      r.length % ps != 0) {
    return Error{Errc::AlignmentError, "region must be page-aligned"};
  }
  return {};
}

/// Page-protection emulation of per-key access rights. set_thread_access
/// changes page permissions of every region tagged with the key, which is
/// process-global rather than per-thread; this is the backend's documented
/// fidelity limitation. Toggles for one key are serialized by the caller
/// (a domain is single-entrant); toggles for distinct keys may race freely.
class PortableBackend final : public Backend {
 public:
  explicit PortableBackend(int max_keys)
      : max_keys_(max_keys), slots_(static_cast<size_t>(max_keys) + 1) {}

  BackendKind kind() const override { return BackendKind::Portable; }

  Capabilities capabilities() const override {
    return {max_keys_, SwitchCostClass::Syscall};
  }

  Result<ProtectionKeyHandle> acquire_key() override {
    std::lock_guard lock(mu_);
    for (int id = 1; id <= max_keys_; ++id) {
      Slot& s = slots_[static_cast<size_t>(id)];
      if (!s.live.load(std::memory_order_relaxed)) {
        s.rights.store(static_cast<uint8_t>(AccessRights::ReadWrite),
                       std::memory_order_relaxed);
        s.region_count.store(0, std::memory_order_relaxed);
        s.live.store(true, std::memory_order_release);
        return ProtectionKeyHandle{id};
      }
    }
    return Error{Errc::KeyExhausted, "all portable keys live"};
  }

  Result<void> release_key(ProtectionKeyHandle key) override {
    std::lock_guard lock(mu_);
    Slot* s = slot_of(key);
    if (!s) return Error{Errc::UnknownKey, "key not live"};
    if (s->region_count.load(std::memory_order_relaxed) > 0) {
      return Error{Errc::KeyInUse, "regions still tagged"};
    }
    s->live.store(false, std::memory_order_release);
    return {};
  }

  Result<void> tag_region(MemoryRegion region,
                          ProtectionKeyHandle key) override {
    if (auto r = check_region(region); !r.ok()) return r.error();
    std::lock_guard lock(mu_);
    Slot* s = slot_of(key);
    if (!s) return Error{Errc::UnknownKey, "key not live"};
    int n = s->region_count.load(std::memory_order_relaxed);
    if (n >= kMaxRegionsPerKey) {
      return Error{Errc::OsRejected, "too many regions for one key"};
    }
    const auto rights =
        static_cast<AccessRights>(s->rights.load(std::memory_order_relaxed));
    if (mprotect(region.base, region.length, prot_for(rights)) != 0) {
      return Error{Errc::OsRejected, "mprotect failed"};
    }
    s->regions[n] = region;
    s->region_count.store(n + 1, std::memory_order_release);
    return {};
  }

  Result<void> untag_region(MemoryRegion region,
                            ProtectionKeyHandle key) override {
    std::lock_guard lock(mu_);
    Slot* s = slot_of(key);
    if (!s) return Error{Errc::UnknownKey, "key not live"};
    int n = s->region_count.load(std::memory_order_relaxed);
    for (int i = 0; i < n; ++i) {
      if (s->regions[i].base == region.base &&
          s->regions[i].length == region.length) {
        s->regions[i] = s->regions[n - 1];
        s->region_count.store(n - 1, std::memory_order_release);
        mprotect(region.base, region.length, PROT_READ | PROT_WRITE);
        return {};
      }
    }
    return Error{Errc::UnknownKey, "region not tagged with key"};
  }

  Result<void> set_thread_access(ProtectionKeyHandle key,
                                 AccessRights rights) override {
    Slot* s = slot_of(key);
    if (!s) return Error{Errc::UnknownKey, "key not live"};
    if (static_cast<AccessRights>(s->rights.load(std::memory_order_acquire)) ==
        rights) {
      return {};
    }
    if (!apply_to_regions(*s, rights)) {
      return Error{Errc::OsRejected, "mprotect failed"};
    }
    s->rights.store(static_cast<uint8_t>(rights), std::memory_order_release);
    return {};
  }

  Result<AccessRights> thread_access(ProtectionKeyHandle key) const override {
    const Slot* s = slot_of(key);
    if (!s) return Error{Errc::UnknownKey, "key not live"};
    return static_cast<AccessRights>(s->rights.load(std::memory_order_acquire));
  }

  RightsToken rights_token(ProtectionKeyHandle key) const override {
    const Slot* s = slot_of(key);
    uint64_t r = s ? s->rights.load(std::memory_order_acquire)
                   : static_cast<uint64_t>(AccessRights::ReadWrite);
    return pack(key.key_id, r);
  }

  void apply_rights_token(RightsToken token) override {
    ProtectionKeyHandle key{static_cast<int>(token >> 8)};
    (void)set_thread_access(key, static_cast<AccessRights>(token & 0xff));
  }

  RightsToken execution_token(RightsToken, ProtectionKeyHandle key,
                              bool) const override {
    return pack(key.key_id, static_cast<uint64_t>(AccessRights::ReadWrite));
  }

  RightsToken runtime_token(RightsToken, ProtectionKeyHandle key) const override {
    return pack(key.key_id, static_cast<uint64_t>(AccessRights::ReadWrite));
  }

 private:
  struct Slot {
    std::atomic<bool> live{false};
    std::atomic<uint8_t> rights{
        static_cast<uint8_t>(AccessRights::ReadWrite)};
    std::atomic<int> region_count{0};
    MemoryRegion regions[kMaxRegionsPerKey];
  };

  static RightsToken pack(int key_id, uint64_t rights) {
    return (static_cast<uint64_t>(key_id) << 8) | rights;
  }

  Slot* slot_of(ProtectionKeyHandle key) {
    return const_cast<Slot*>(std::as_const(*this).slot_of(key));
  }
  const Slot* slot_of(ProtectionKeyHandle key) const {
    if (key.key_id < 1 || key.key_id > max_keys_) return nullptr;
    const Slot& s = slots_[static_cast<size_t>(key.key_id)];
    return s.live.load(std::memory_order_acquire) ? &s : nullptr;
  }

  // Adjacent regions (domain stack + arena share one mapping) collapse into
  // a single mprotect call.
  bool apply_to_regions(Slot& s, AccessRights rights) {
    MemoryRegion runs[kMaxRegionsPerKey];
    int n = s.region_count.load(std::memory_order_acquire);
    for (int i = 0; i < n; ++i) runs[i] = s.regions[i];
    std::sort(runs, runs + n,
              [](const MemoryRegion& a, const MemoryRegion& b) {
                return a.begin() < b.begin();
              });
    const int prot = prot_for(rights);
    int i = 0;
    while (i < n) {
      uintptr_t begin = runs[i].begin();
      uintptr_t end = runs[i].end();
      while (i + 1 < n && runs[i + 1].begin() == end) {
        end = runs[++i].end();
      }
      ++i;
      if (mprotect(reinterpret_cast<void*>(begin), end - begin, prot) != 0) {
        return false;
      }
    }
    return true;
  }

  const int max_keys_;
  std::mutex mu_;
  std::vector<Slot> slots_;
};

}  // namespace

std::unique_ptr<Backend> make_portable_backend(int max_keys) {
  return std::make_unique<PortableBackend>(max_keys);
}

}  // namespace rewind
