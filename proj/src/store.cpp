#include "flowlet/store.hpp"

#include <fstream>

#include "flowlet/error.hpp"

namespace fs = std::filesystem;

namespace flowlet {

void ObjectStore::put(const std::string& key, std::string bytes, int64_t now_ms) {
  {
    std::lock_guard lock(mutex_);
    if (objects_.count(key)) raise(Errc::key_exists, key);
    persist(key, bytes);
    objects_.emplace(key, std::move(bytes));
  }
  if (notifier_) notifier_(key, now_ms);
}

bool ObjectStore::try_put(const std::string& key, std::string bytes, int64_t now_ms) {
  {
    std::lock_guard lock(mutex_);
    if (objects_.count(key)) return false;
    persist(key, bytes);
    objects_.emplace(key, std::move(bytes));
  }
  if (notifier_) notifier_(key, now_ms);
  return true;
}

std::string ObjectStore::get(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = objects_.find(key);
  if (it == objects_.end()) raise(Errc::not_found, key);
  return it->second;
}

bool ObjectStore::exists(const std::string& key) const {
  std::lock_guard lock(mutex_);
  return objects_.count(key) != 0;
}

int64_t ObjectStore::size_of(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = objects_.find(key);
  if (it == objects_.end()) raise(Errc::not_found, key);
  return static_cast<int64_t>(it->second.size());
}

std::vector<std::string> ObjectStore::list(const std::string& prefix) const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (auto it = objects_.lower_bound(prefix); it != objects_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

size_t ObjectStore::count() const {
  std::lock_guard lock(mutex_);
  return objects_.size();
}

void MemoryStore::persist(const std::string&, const std::string&) {}

std::string DiskStore::encode_key(const std::string& key) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : key) {
    bool plain = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                 (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    if (plain) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

std::string DiskStore::decode_key(const std::string& name) {
  std::string out;
  for (size_t i = 0; i < name.size(); i++) {
    if (name[i] == '%' && i + 2 < name.size()) {
      out.push_back(static_cast<char>(std::stoi(name.substr(i + 1, 2), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(name[i]);
    }
  }
  return out;
}

DiskStore::DiskStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "objects");
  for (const auto& entry : fs::directory_iterator(root_ / "objects")) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    objects_.emplace(decode_key(entry.path().filename().string()), std::move(bytes));
  }
}

void DiskStore::persist(const std::string& key, const std::string& bytes) {
  std::ofstream out(root_ / "objects" / encode_key(key), std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace flowlet
