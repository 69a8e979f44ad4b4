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

#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <vector>

#include "atomtable/handle.hpp"

namespace atomtable {

class AtomTable;
struct BucketTable;

/// A client-registered array of machine words that the collector scans
/// conservatively for atom-like bit patterns. Each element is written and
/// read as one atomic word, so the marker can race the owner's writes and
/// still only ever observe whole values.
///
/// Owned by exactly one thread; the marker synchronises with storage
/// relocation (growth, compaction) through relocation_lock.
class ScanArena {
 public:
  /// Append a word; returns its slot index. While a collection cycle is
  /// running, a word that classifies as an atom handle marks the atom
  /// before it becomes scannable.
  std::size_t push(word_t w);

  /// Replace the word at an occupied slot (same marking rule as push).
  void overwrite(std::size_t slot, word_t w);

  /// Drop the most recently pushed word. Throws ContractViolation on an
  /// empty arena.
  void pop();

  /// Repack the backing storage under relocation_lock. Logical content is
  /// preserved; only the storage moves.
  void compact();

  [[nodiscard]] std::size_t size() const {
    return length_.load(std::memory_order_acquire);
  }
  [[nodiscard]] word_t word_at(std::size_t i) const;

  ScanArena(const ScanArena&) = delete;
  ScanArena& operator=(const ScanArena&) = delete;

 private:
  friend class AtomTable;
  friend class ThreadContext;
  explicit ScanArena(AtomTable& owner) : owner_(owner) {}

  void ensure_capacity(std::size_t needed);

  AtomTable& owner_;
  std::mutex relocation_lock_;  // shared with the marking thread
  std::unique_ptr<std::atomic<word_t>[]> words_;
  std::size_t capacity_ = 0;
  std::atomic<std::size_t> length_{0};
};

/// Per-registered-thread state. One ThreadContext is owned by one thread;
/// the collector reads table_snapshot, bucket_guard and unregistering as
/// atomic words while the owner runs.
///
/// table_snapshot and bucket_guard are the lookup guards: while non-null
/// they pin the table generation and bucket slot the owner is traversing,
/// deferring reclamation of anything reachable through them. unregistering
/// is the hand-off slot for the race between dropping a last reference and
/// a starting collection cycle: the collector marks whatever it finds here.
class ThreadContext {
 public:
  /// Create a new scan arena owned by this thread.
  ScanArena& create_arena();

  [[nodiscard]] const BucketTable* table_snapshot() const {
    return static_cast<const BucketTable*>(
        table_snapshot_.load(std::memory_order_seq_cst));
  }
  [[nodiscard]] const void* bucket_guard() const {
    return bucket_guard_.load(std::memory_order_seq_cst);
  }
  [[nodiscard]] word_t unregistering() const {
    return unregistering_.load(std::memory_order_seq_cst);
  }

  ThreadContext(const ThreadContext&) = delete;
  ThreadContext& operator=(const ThreadContext&) = delete;

 private:
  friend class AtomTable;
  explicit ThreadContext(AtomTable& owner) : owner_(owner) {}

  AtomTable& owner_;
  std::atomic<const void*> table_snapshot_{nullptr};
  std::atomic<const void*> bucket_guard_{nullptr};
  std::atomic<word_t> unregistering_{0};
  std::mutex arena_list_lock_;
  std::vector<std::unique_ptr<ScanArena>> arenas_;
};

}  // namespace atomtable
