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
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include "atomtable/handle.hpp"
#include "atomtable/roots.hpp"
#include "atomtable/store.hpp"

namespace atomtable {

// Bucket slots hold a chain-head handle (or 0) plus one flag bit. The
// resizer freezes each old bucket before migrating its chain; a frozen slot
// rejects every insert CAS, so no atom can slip into a bucket after its
// chain has been copied to the next generation. Handle tags keep bit 1
// clear, so the flag never collides with a head value.
inline constexpr word_t kSlotFrozenBit = 0b010;

inline constexpr word_t slot_head(word_t v) { return v & ~kSlotFrozenBit; }
inline constexpr bool slot_frozen(word_t v) {
  return (v & kSlotFrozenBit) != 0;
}

/// One generation of the open hash table. Generations are atomically
/// replaced on resize; retired ones stay linked through prev until the
/// collector proves no thread can still be traversing them.
struct BucketTable {
  explicit BucketTable(std::size_t bucket_count)
      : buckets(bucket_count),
        slots(std::make_unique<std::atomic<word_t>[]>(bucket_count)) {}

  const std::size_t buckets;  // power of two
  std::unique_ptr<std::atomic<word_t>[]> slots;
  BucketTable* prev = nullptr;

  [[nodiscard]] std::atomic<word_t>& slot_for(word_t hash) const {
    return slots[hash & (buckets - 1)];
  }
};

struct Config {
  /// Resize when valid atoms / buckets exceeds this after a failed walk.
  double resize_load_factor = 2.0;
  /// Initial bucket count (power of two).
  std::size_t initial_buckets = 8;
  /// When enabled, intern triggers a collection cycle once this many atoms
  /// have been created since the previous cycle.
  bool auto_gc = false;
  std::size_t auto_gc_threshold = 10000;
};

/// Collector statistics. `bytes_reclaimed` counts, per destroyed atom, the
/// name payload length plus sizeof(AtomRecord) of fixed per-record overhead.
struct AgcStats {
  std::uint64_t invocations = 0;
  std::uint64_t atoms_reclaimed = 0;
  std::uint64_t bytes_reclaimed = 0;
  double mark_seconds = 0.0;
  double collect_seconds = 0.0;

  AgcStats& operator+=(const AgcStats& o) {
    invocations += o.invocations;
    atoms_reclaimed += o.atoms_reclaimed;
    bytes_reclaimed += o.bytes_reclaimed;
    mark_seconds += o.mark_seconds;
    collect_seconds += o.collect_seconds;
    return *this;
  }
};

/// Test instrumentation seams. All hooks default to null and must be
/// installed before any concurrent activity starts.
struct TestHooks {
  /// Runs inside the mark phase, after the running flag is set and the
  /// registry is latched, before any arena is scanned.
  std::function<void()> during_mark;
  /// Runs in the collect phase right before the destroy pass.
  std::function<void()> before_destroy;
  /// Runs on every chain hop of a lookup walk.
  std::function<void()> on_chain_step;
};

/// Concurrent string-interning table with a conservative, concurrent atom
/// garbage collector.
///
/// Lookup and insert are lock-free: the fast path takes no lock and never
/// waits for a collection cycle. The single agc mutex serialises table
/// resizing and the collector's collect phase against each other; neither
/// ever stops reader threads.
class AtomTable {
 public:
  explicit AtomTable(Config cfg = {});
  ~AtomTable();

  AtomTable(const AtomTable&) = delete;
  AtomTable& operator=(const AtomTable&) = delete;

  // -- thread registry -------------------------------------------------

  /// Register the calling thread. Blocks while a mark phase is running.
  ThreadContext& register_thread();

  /// Remove a context from the registry. The context must own no in-flight
  /// lookup. Blocks while a mark phase is running. Throws ContractViolation
  /// for a context that is not registered.
  void deregister_thread(ThreadContext& ctx);

  // -- interning -------------------------------------------------------

  /// Return the unique handle for `name`, inserting it if needed. The
  /// caller owns one explicit reference on the returned handle.
  AtomHandle intern(std::string_view name, ThreadContext& ctx);

  /// Lookup without insert. On a hit the caller owns one explicit
  /// reference, exactly as with intern.
  std::optional<AtomHandle> find_existing(std::string_view name,
                                          ThreadContext& ctx);

  /// Name payload of a live atom. The view is stable while the caller
  /// holds a reference. Throws ContractViolation if the atom is not valid.
  std::string_view name_of(AtomHandle h) const;

  /// Add one explicit reference. Throws StaleHandleError if the atom has
  /// been invalidated.
  void register_atom(AtomHandle h);

  /// Drop one explicit reference, with the hand-off protocol that keeps a
  /// count reaching zero visible to an in-progress collection cycle.
  /// Throws ContractViolation when the count is already zero.
  void unregister_atom(AtomHandle h, ThreadContext& ctx);

  // -- collection ------------------------------------------------------

  /// Run one collection cycle in the calling thread and return the stats
  /// delta. Returns a zero delta immediately when a cycle is already in
  /// progress. Safe to call from any thread.
  AgcStats run_agc();

  /// Single-threaded reference collector: scans the one registered
  /// thread's arenas, reclaims every unmarked zero-count atom, and returns
  /// the reclaimed handles. Kept deliberately simple and independent of
  /// the concurrent cycle; used to cross-check run_agc.
  /// Throws ContractViolation unless exactly one thread is registered.
  std::vector<AtomHandle> run_reference_agc();

  [[nodiscard]] AgcStats stats() const;
  void set_trace_hook(std::function<void(const AgcStats&)> hook);
  void set_test_hooks(TestHooks hooks);

  // -- inspection ------------------------------------------------------

  [[nodiscard]] const AtomStore& store() const { return store_; }
  [[nodiscard]] std::size_t bucket_count() const;
  [[nodiscard]] std::size_t generation_count() const;
  [[nodiscard]] std::size_t valid_atom_count() const {
    return valid_count_.load(std::memory_order_acquire);
  }
  [[nodiscard]] std::size_t registered_thread_count() const;
  [[nodiscard]] std::size_t pending_invalid_count() const;
  [[nodiscard]] bool agc_running() const {
    return agc_running_.load(std::memory_order_seq_cst) != 0;
  }

  /// Walk the current generation's chains and invoke fn for every valid
  /// atom. Intended for quiescent audits; concurrent mutation gives a
  /// best-effort snapshot.
  void for_each_valid_atom(
      const std::function<void(AtomHandle, std::string_view)>& fn) const;

 private:
  friend class ScanArena;
  friend struct AtomTableTestAccess;

  struct GuardSet {
    std::vector<const void*> bucket_slots;
    std::vector<const BucketTable*> tables;
    [[nodiscard]] bool holds_slot(const void* slot) const;
    [[nodiscard]] bool holds_table(const BucketTable* t) const;
    [[nodiscard]] bool holds_slot_in(const BucketTable& t) const;
  };

  struct GuardScope;
  static void clear_guards(ThreadContext& ctx);

  std::optional<AtomHandle> lookup(std::string_view name, ThreadContext& ctx,
                                   bool insert);
  static bool bump_ref(AtomRecord& rec, word_t observed);
  void mark_atom(AtomRecord& rec);
  void conditional_mark_for_arena(word_t w);
  bool overfull(const BucketTable& table) const;
  void resize_atom_table();
  void maybe_auto_gc();
  AtomRecord& checked_record(AtomHandle h) const;

  // collector internals (collector.cpp); agc lock held unless noted
  void mark_volatile(ThreadContext& ctx);
  bool invalidate_atom(AtomRecord& rec, word_t observed, std::size_t index);
  void unlink_from_generations(AtomRecord& rec, word_t raw);
  GuardSet snapshot_guards();
  std::uint64_t destroy_atoms(std::uint64_t* bytes_out);
  bool destroy_atom(AtomRecord& rec, const GuardSet& guards);
  std::size_t reclaim_tables(const GuardSet& guards);

  Config cfg_;
  AtomStore store_;
  std::atomic<BucketTable*> current_;
  mutable std::mutex agc_lock_;  // excludes resize vs collect phase
  std::atomic<word_t> agc_running_{0};
  mutable std::mutex registry_lock_;  // latched for the whole mark phase
  std::vector<std::unique_ptr<ThreadContext>> threads_;
  std::atomic<word_t> invalid_head_{0};  // handle raw; agc lock held
  std::atomic<std::size_t> valid_count_{0};
  std::atomic<std::size_t> created_since_gc_{0};
  mutable std::mutex stats_lock_;
  AgcStats totals_;
  std::function<void(const AgcStats&)> trace_hook_;
  TestHooks hooks_;
};

}  // namespace atomtable
