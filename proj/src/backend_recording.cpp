#include "rewind/recording_backend.hpp"

namespace rewind {

RecordingBackend::RecordingBackend(int max_keys)
    : max_keys_(max_keys),
      live_(static_cast<size_t>(max_keys) + 1, false),
      rights_(static_cast<size_t>(max_keys) + 1, AccessRights::ReadWrite),
      regions_tagged_(static_cast<size_t>(max_keys) + 1, 0) {}

Capabilities RecordingBackend::capabilities() const {
  record({"capabilities"});
  return {max_keys_, SwitchCostClass::RegisterWrite};
}

Result<ProtectionKeyHandle> RecordingBackend::acquire_key() {
  std::lock_guard lock(mu_);
  for (int id = 1; id <= max_keys_; ++id) {
    if (!live_[static_cast<size_t>(id)]) {
      live_[static_cast<size_t>(id)] = true;
      rights_[static_cast<size_t>(id)] = AccessRights::ReadWrite;
      trace_.push_back({"acquire_key", id});
      return ProtectionKeyHandle{id};
    }
  }
  trace_.push_back({"acquire_key", -1});
  return Error{Errc::KeyExhausted, "recording backend out of keys"};
}

Result<void> RecordingBackend::release_key(ProtectionKeyHandle key) {
  std::lock_guard lock(mu_);
  trace_.push_back({"release_key", key.key_id});
  if (key.key_id < 1 || key.key_id > max_keys_ ||
      !live_[static_cast<size_t>(key.key_id)]) {
    return Error{Errc::UnknownKey, "key not live"};
  }
  if (regions_tagged_[static_cast<size_t>(key.key_id)] > 0) {
    return Error{Errc::KeyInUse, "regions still tagged"};
  }
  live_[static_cast<size_t>(key.key_id)] = false;
  return {};
}

Result<void> RecordingBackend::tag_region(MemoryRegion region,
                                          ProtectionKeyHandle key) {
  std::lock_guard lock(mu_);
  trace_.push_back({"tag_region", key.key_id, region.begin(), region.length});
  const size_t ps = page_size();
  if (region.base == nullptr || region.length == 0 ||
      region.begin() % ps != 0 || region.length % ps != 0) {
    return Error{Errc::AlignmentError, "region must be page-aligned"};
  }
  if (key.key_id < 1 || key.key_id > max_keys_ ||
      !live_[static_cast<size_t>(key.key_id)]) {
    return Error{Errc::UnknownKey, "key not live"};
  }
  regions_tagged_[static_cast<size_t>(key.key_id)]++;
  return {};
}

Result<void> RecordingBackend::untag_region(MemoryRegion region,
                                            ProtectionKeyHandle key) {
  std::lock_guard lock(mu_);
  trace_.push_back({"untag_region", key.key_id, region.begin(), region.length});
  if (key.key_id < 1 || key.key_id > max_keys_ ||
      !live_[static_cast<size_t>(key.key_id)]) {
    return Error{Errc::UnknownKey, "key not live"};
  }
  if (regions_tagged_[static_cast<size_t>(key.key_id)] == 0) {
    return Error{Errc::UnknownKey, "region not tagged with key"};
  }
  regions_tagged_[static_cast<size_t>(key.key_id)]--;
  return {};
}

Result<void> RecordingBackend::set_thread_access(ProtectionKeyHandle key,
                                                 AccessRights rights) {
  std::lock_guard lock(mu_);
  trace_.push_back({"set_thread_access", key.key_id, 0, 0, rights});
  if (key.key_id < 1 || key.key_id > max_keys_ ||
      !live_[static_cast<size_t>(key.key_id)]) {
    return Error{Errc::UnknownKey, "key not live"};
  }
  rights_[static_cast<size_t>(key.key_id)] = rights;
  return {};
}

Result<AccessRights> RecordingBackend::thread_access(
    ProtectionKeyHandle key) const {
  std::lock_guard lock(mu_);
  if (key.key_id < 1 || key.key_id > max_keys_ ||
      !live_[static_cast<size_t>(key.key_id)]) {
    return Error{Errc::UnknownKey, "key not live"};
  }
  return rights_[static_cast<size_t>(key.key_id)];
}

RightsToken RecordingBackend::rights_token(ProtectionKeyHandle key) const {
  std::lock_guard lock(mu_);
  if (key.key_id >= 1 && key.key_id <= max_keys_ &&
      live_[static_cast<size_t>(key.key_id)]) {
    return (static_cast<uint64_t>(key.key_id) << 8) |
           static_cast<uint64_t>(rights_[static_cast<size_t>(key.key_id)]);
  }
  return 0;
}

void RecordingBackend::apply_rights_token(RightsToken token) {
  if (token == 0) return;
  (void)set_thread_access(ProtectionKeyHandle{static_cast<int>(token >> 8)},
                          static_cast<AccessRights>(token & 0xff));
}

RightsToken RecordingBackend::execution_token(RightsToken,
                                              ProtectionKeyHandle key,
                                              bool) const {
  return (static_cast<uint64_t>(key.key_id) << 8) |
         static_cast<uint64_t>(AccessRights::ReadWrite);
}

RightsToken RecordingBackend::runtime_token(RightsToken,
                                            ProtectionKeyHandle key) const {
  return (static_cast<uint64_t>(key.key_id) << 8) |
         static_cast<uint64_t>(AccessRights::ReadWrite);
}

std::vector<RecordingBackend::Event> RecordingBackend::trace() const {
  std::lock_guard lock(mu_);
  return trace_;
}

size_t RecordingBackend::count(const std::string& op) const {
  std::lock_guard lock(mu_);
  size_t n = 0;
  for (const auto& e : trace_) n += (e.op == op);
  return n;
}

void RecordingBackend::clear_trace() {
  std::lock_guard lock(mu_);
  trace_.clear();
}

void RecordingBackend::record(Event e) const {
  std::lock_guard lock(mu_);
  trace_.push_back(std::move(e));
}

std::unique_ptr<Backend> make_recording_backend_default() {
  return std::make_unique<RecordingBackend>(64);
}

}  // namespace rewind
