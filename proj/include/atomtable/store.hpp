/*
 * Copyright 2026 the atomtable authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <mutex>
#include <string_view>

#include "atomtable/handle.hpp"

namespace atomtable {

/// Immutable heap-allocated byte-string payload of an atom. The bytes live
/// directly behind the header; a NameBuf is never mutated after make().
class NameBuf {
 public:
  static const NameBuf* make(std::string_view bytes);
  static void destroy(const NameBuf* buf);

  [[nodiscard]] std::string_view view() const {
    return {reinterpret_cast<const char*>(this + 1), size_};
  }
  [[nodiscard]] std::size_t size() const { return size_; }

 private:
  explicit NameBuf(std::size_t n) : size_(n) {}
  std::size_t size_;
};

/// One interned symbol slot. Records have stable identity: once a block is
/// published its records are never moved or freed until the store dies.
///
/// `references` is the only field mutated while the record is visible to
/// other threads, always via single-word CAS or store. `name` and `next`
/// are written while the record is reserved-but-unpublished, by the resizer
/// while it owns the generation being migrated, or after the collector has
/// proven the record unreachable.
struct AtomRecord {
  std::atomic<word_t> references{0};
  std::atomic<const NameBuf*> name{nullptr};
  std::atomic<word_t> next{0};          // bucket chain link (handle raw or 0)
  std::atomic<word_t> next_invalid{0};  // pending-invalid list link
};

/// Append-only chunked dynamic array of atom records with MSB indexing.
/// Block k holds 2^k slots covering indices [2^k, 2^(k+1)); directory
/// entries are stored pre-offset so blocks[k][i] addresses index i directly.
/// Blocks 0..2 are preallocated as one 8-slot chunk (index 0 stays unused).
class AtomStore {
 public:
  static constexpr std::size_t kPreallocatedSlots = 8;
  static constexpr unsigned kPreallocatedTopBlock = 2;

  AtomStore();
  ~AtomStore();

  AtomStore(const AtomStore&) = delete;
  AtomStore& operator=(const AtomStore&) = delete;

  /// Record for a published index; throws LookupError outside
  /// [1, highest_index()].
  AtomRecord& atom_at(std::size_t index) const;

  /// Record for any allocated index, including slots never reserved yet.
  /// Used by reservation scans and the collector's store walks.
  AtomRecord& record_at(std::size_t index) const;

  /// Claim a FREE slot via CAS (FREE -> reserved, count 0) and return its
  /// handle. Appends a new block under the growth lock when every allocated
  /// slot is taken. Throws CapacityError when the index space is exhausted.
  AtomHandle reserve_atom();

  /// Return a record to the FREE state and drop its name payload. The
  /// record must be reserved and must not have the valid bit set: only
  /// invalidated atoms proven unreachable and reserved-but-never-published
  /// slots may be released.
  void release_record(AtomHandle h);

  /// High-water mark of ever-reserved indices (monotone).
  [[nodiscard]] std::size_t highest_index() const {
    return highest_.load(std::memory_order_acquire);
  }

  /// Total allocated slots, including the unusable index 0.
  [[nodiscard]] std::size_t capacity() const {
    return limit_.load(std::memory_order_acquire);
  }

 private:
  static constexpr unsigned kDirectorySize = kWordBits - kHandleTagBits;

  bool try_reserve_range(std::size_t lo, std::size_t hi, std::size_t* out);
  void grow(std::size_t seen_limit);

  std::array<std::atomic<AtomRecord*>, kDirectorySize> blocks_{};
  std::atomic<std::size_t> limit_{kPreallocatedSlots};  // exclusive bound
  std::atomic<std::size_t> highest_{0};
  std::atomic<std::size_t> scan_hint_{1};
  std::mutex growth_lock_;
  unsigned top_block_ = kPreallocatedTopBlock;
};

}  // namespace atomtable
