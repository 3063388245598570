#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "rewind/backend.hpp"

namespace rewind {

/// Test double: applies no real protection, records every call so unit
/// tests of higher modules can assert exact call sequences.
class RecordingBackend final : public Backend {
 public:
  struct Event {
    std::string op;    // "acquire_key", "tag_region", ...
    int key_id = 0;
    uintptr_t base = 0;
    size_t length = 0;
    AccessRights rights = AccessRights::ReadWrite;
  };

  explicit RecordingBackend(int max_keys = 64);

  BackendKind kind() const override { return BackendKind::Recording; }
  Capabilities capabilities() const override;
  Result<ProtectionKeyHandle> acquire_key() override;
  Result<void> release_key(ProtectionKeyHandle key) override;
  Result<void> tag_region(MemoryRegion region, ProtectionKeyHandle key) override;
  Result<void> untag_region(MemoryRegion region,
                            ProtectionKeyHandle key) override;
  Result<void> set_thread_access(ProtectionKeyHandle key,
                                 AccessRights rights) override;
  Result<AccessRights> thread_access(ProtectionKeyHandle key) const override;

  RightsToken rights_token(ProtectionKeyHandle key) const override;
  void apply_rights_token(RightsToken token) override;
  RightsToken execution_token(RightsToken base, ProtectionKeyHandle key,
                              bool confidentiality) const override;
  RightsToken runtime_token(RightsToken base,
                            ProtectionKeyHandle key) const override;

  std::vector<Event> trace() const;
  size_t count(const std::string& op) const;
  void clear_trace();

 private:
  void record(Event e) const;

  int max_keys_;
  mutable std::mutex mu_;
  std::vector<bool> live_;
  std::vector<AccessRights> rights_;
  std::vector<int> regions_tagged_;
  mutable std::vector<Event> trace_;
};

}  // namespace rewind
