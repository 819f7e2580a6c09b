#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ppkit/errors.hpp"
#include "ppkit/tensor.hpp"

namespace ppkit {

// Named tensors in insertion order. Serialization and optimizer traversal both
// follow this order, so it is part of the on-disk contract. Non-trainable
// entries carry state like batch-norm running statistics.
template <typename T>
class ParameterSet {
public:
  void add(const std::string& name, Tensor4<T> value, bool trainable = true) {
    if (index_.count(name)) throw ValidationError("parameter set: duplicate name " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{name, std::move(value), trainable});
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor4<T>& at(const std::string& name) { return entries_[find(name)].value; }
  const Tensor4<T>& at(const std::string& name) const { return entries_[find(name)].value; }

  bool trainable(const std::string& name) const { return entries_[find(name)].trainable; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.push_back(e.name);
    return out;
  }

  std::size_t size() const { return entries_.size(); }

  std::int64_t value_count() const {
    std::int64_t n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

  std::int64_t trainable_value_count() const {
    std::int64_t n = 0;
    for (const Entry& e : entries_)
      if (e.trainable) n += e.value.size();
    return n;
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const Entry& e : entries_) out.add(e.name, e.value.template cast<U>(), e.trainable);
    return out;
  }

private:
  struct Entry {
    std::string name;
    Tensor4<T> value;
    bool trainable;
  };

  std::size_t find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("parameter set: unknown name " + name);
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ParameterSetF = ParameterSet<float>;

}  // namespace ppkit
