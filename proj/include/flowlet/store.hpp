#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace flowlet {

// Immutable-key object store. Every successful put fires the notifier
// exactly once; a second put of the same key is KeyExists and fires nothing.
class ObjectStore {
 public:
  using Notifier = std::function<void(const std::string& key, int64_t now_ms)>;

  virtual ~ObjectStore() = default;

  void put(const std::string& key, std::string bytes, int64_t now_ms);
  // First-writer-wins variant: false (and no notification) if the key exists.
  bool try_put(const std::string& key, std::string bytes, int64_t now_ms);
  std::string get(const std::string& key) const;  // NotFound
  bool exists(const std::string& key) const;
  int64_t size_of(const std::string& key) const;  // NotFound
  std::vector<std::string> list(const std::string& prefix) const;  // sorted
  size_t count() const;

  void set_notifier(Notifier notifier) { notifier_ = std::move(notifier); }

 protected:
  virtual void persist(const std::string& key, const std::string& bytes) = 0;

  std::map<std::string, std::string> objects_;
  mutable std::mutex mutex_;
  Notifier notifier_;
};

class MemoryStore : public ObjectStore {
 protected:
  void persist(const std::string& key, const std::string& bytes) override;
};

// Objects live under <root>/objects/ with percent-encoded keys as file
// names. Reopening a root rehydrates the in-memory index, which is how a
// restarted controller sees what a crashed run already wrote.
class DiskStore : public ObjectStore {
 public:
  explicit DiskStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  static std::string encode_key(const std::string& key);
  static std::string decode_key(const std::string& name);

 protected:
  void persist(const std::string& key, const std::string& bytes) override;

 private:
  std::filesystem::path root_;
};

}  // namespace flowlet
