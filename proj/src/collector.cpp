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

#include <algorithm>
#include <chrono>
#include <unordered_set>

#include "atomtable/table.hpp"

namespace atomtable {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

bool AtomTable::GuardSet::holds_slot(const void* slot) const {
  return std::find(bucket_slots.begin(), bucket_slots.end(), slot) !=
         bucket_slots.end();
}

bool AtomTable::GuardSet::holds_table(const BucketTable* t) const {
  return std::find(tables.begin(), tables.end(), t) != tables.end();
}

bool AtomTable::GuardSet::holds_slot_in(const BucketTable& t) const {
  const auto lo = reinterpret_cast<std::uintptr_t>(t.slots.get());
  const auto hi = lo + t.buckets * sizeof(std::atomic<word_t>);
  for (const void* s : bucket_slots) {
    const auto p = reinterpret_cast<std::uintptr_t>(s);
    if (p >= lo && p < hi) return true;
  }
  return false;
}

void AtomTable::mark_atom(AtomRecord& rec) {
  word_t refs = rec.references.load(std::memory_order_seq_cst);
  for (;;) {
    const RefWord rw{refs};
    if (!rw.reserved() || rw.marked()) return;
    if (rec.references.compare_exchange_weak(refs, refs | RefWord::kMarkedBit,
                                             std::memory_order_seq_cst)) {
      return;
    }
  }
}

void AtomTable::conditional_mark_for_arena(word_t w) {
  if (agc_running_.load(std::memory_order_seq_cst) == 0) return;
  if (auto index = classify_word(w, store_.highest_index())) {
    mark_atom(store_.record_at(*index));
  }
}

void AtomTable::mark_volatile(ThreadContext& ctx) {
  const std::size_t max_index = store_.highest_index();
  {
    std::lock_guard<std::mutex> arenas(ctx.arena_list_lock_);
    for (auto& arena : ctx.arenas_) {
      std::lock_guard<std::mutex> relocation(arena->relocation_lock_);
      const std::size_t n = arena->length_.load(std::memory_order_acquire);
      for (std::size_t i = 0; i < n; ++i) {
        const word_t w = arena->words_[i].load(std::memory_order_acquire);
        if (auto index = classify_word(w, max_index)) {
          mark_atom(store_.record_at(*index));
        }
      }
    }
  }
  const word_t pending = ctx.unregistering_.load(std::memory_order_seq_cst);
  if (auto index = classify_word(pending, max_index)) {
    mark_atom(store_.record_at(*index));
  }
}

bool AtomTable::invalidate_atom(AtomRecord& rec, word_t observed,
                                std::size_t index) {
  // observed has valid set, marked clear, count 0; agc lock held.
  word_t expected = observed;
  if (!rec.references.compare_exchange_strong(expected,
                                              observed & ~RefWord::kValidBit,
                                              std::memory_order_seq_cst)) {
    return false;  // a concurrent lookup bumped the count and wins
  }
  valid_count_.fetch_sub(1, std::memory_order_acq_rel);
  const word_t raw = encode_handle(index).raw;
  // Remove the atom from every chain now, before the destroy pass snapshots
  // bucket guards: afterwards no new walk can encounter it, so the snapshot
  // covers every thread that possibly holds a pointer into it.
  unlink_from_generations(rec, raw);
  rec.next_invalid.store(invalid_head_.load(std::memory_order_relaxed),
                         std::memory_order_relaxed);
  invalid_head_.store(raw, std::memory_order_relaxed);
  return true;
}

void AtomTable::unlink_from_generations(AtomRecord& rec, word_t raw) {
  const NameBuf* nb = rec.name.load(std::memory_order_acquire);
  const word_t hash = hash_name(nb->view());
  for (BucketTable* t = current_.load(std::memory_order_seq_cst); t;
       t = t->prev) {
    std::atomic<word_t>& slot = t->slot_for(hash);
    for (;;) {
      word_t v = slot.load(std::memory_order_seq_cst);
      if (slot_head(v) == raw) {
        const word_t repl =
            rec.next.load(std::memory_order_acquire) | (v & kSlotFrozenBit);
        if (!slot.compare_exchange_strong(v, repl,
                                          std::memory_order_seq_cst)) {
          continue;  // insert raced the head; reload
        }
        break;
      }
      // Interior search. Only the newest chain through the record is
      // coherent, but stale walks are harmless: they either find the link
      // and cut it or run off the end.
      word_t ar = slot_head(v);
      bool rescan = false;
      while (ar != 0) {
        AtomRecord& r = store_.record_at(ar >> kHandleTagBits);
        const word_t nxt = r.next.load(std::memory_order_acquire);
        if (nxt == raw) {
          word_t expected = raw;
          if (!r.next.compare_exchange_strong(
                  expected, rec.next.load(std::memory_order_acquire),
                  std::memory_order_seq_cst)) {
            rescan = true;
          }
          break;
        }
        if (ar == raw) break;  // reached the record itself; not a pred link
        ar = nxt;
      }
      if (rescan) continue;
      break;
    }
  }
}

AtomTable::GuardSet AtomTable::snapshot_guards() {
  GuardSet guards;
  std::lock_guard<std::mutex> lock(registry_lock_);
  for (const auto& ctx : threads_) {
    if (const void* slot = ctx->bucket_guard_.load(std::memory_order_seq_cst)) {
      guards.bucket_slots.push_back(slot);
    }
    if (const void* table =
            ctx->table_snapshot_.load(std::memory_order_seq_cst)) {
      guards.tables.push_back(static_cast<const BucketTable*>(table));
    }
  }
  return guards;
}

bool AtomTable::destroy_atom(AtomRecord& rec, const GuardSet& guards) {
  const NameBuf* nb = rec.name.load(std::memory_order_acquire);
  const word_t hash = hash_name(nb->view());
  for (BucketTable* t = current_.load(std::memory_order_seq_cst); t;
       t = t->prev) {
    if (guards.holds_slot(&t->slot_for(hash))) {
      return false;  // a thread may still be walking this bucket
    }
  }
  return true;
}

std::uint64_t AtomTable::destroy_atoms(std::uint64_t* bytes_out) {
  const GuardSet guards = snapshot_guards();
  std::uint64_t destroyed = 0;
  std::uint64_t bytes = 0;

  word_t prev = 0;
  word_t ar = invalid_head_.load(std::memory_order_relaxed);
  while (ar != 0) {
    AtomRecord& rec = store_.record_at(ar >> kHandleTagBits);
    const word_t next = rec.next_invalid.load(std::memory_order_relaxed);
    if (destroy_atom(rec, guards)) {
      const NameBuf* nb = rec.name.load(std::memory_order_acquire);
      bytes += (nb ? nb->size() : 0) + sizeof(AtomRecord);
      store_.release_record(AtomHandle{ar});
      if (prev == 0) {
        invalid_head_.store(next, std::memory_order_relaxed);
      } else {
        store_.record_at(prev >> kHandleTagBits)
            .next_invalid.store(next, std::memory_order_relaxed);
      }
      ++destroyed;
    } else {
      prev = ar;  // guarded; stays listed for the next cycle
    }
    ar = next;
  }
  if (bytes_out) *bytes_out = bytes;

  reclaim_tables(guards);
  return destroyed;
}

std::size_t AtomTable::reclaim_tables(const GuardSet& guards) {
  std::size_t freed = 0;
  BucketTable* cur = current_.load(std::memory_order_seq_cst);
  BucketTable* succ = cur;
  while (BucketTable* g = succ->prev) {
    const bool g_guarded = guards.holds_table(g) || guards.holds_slot_in(*g);
    const bool succ_guarded =
        succ != cur &&
        (guards.holds_table(succ) || guards.holds_slot_in(*succ));
    if (g_guarded || succ_guarded) {
      succ = g;
      continue;
    }
    succ->prev = g->prev;
    delete g;
    ++freed;
  }
  return freed;
}

AgcStats AtomTable::run_agc() {
  if (agc_running_.load(std::memory_order_seq_cst) != 0) {
    return {};  // a cycle is already in progress
  }
  std::lock_guard<std::mutex> lock(agc_lock_);
  if (agc_running_.load(std::memory_order_seq_cst) != 0) {
    return {};
  }
  agc_running_.store(1, std::memory_order_seq_cst);

  AgcStats delta;
  const auto mark_begin = std::chrono::steady_clock::now();
  {
    // Latched for the whole mark phase: thread creation and destruction
    // wait until every registered thread has been scanned.
    std::lock_guard<std::mutex> registry(registry_lock_);
    if (hooks_.during_mark) hooks_.during_mark();
    for (auto& ctx : threads_) {
      mark_volatile(*ctx);
    }
  }
  delta.mark_seconds = seconds_since(mark_begin);

  const auto collect_begin = std::chrono::steady_clock::now();
  const std::size_t high = store_.highest_index();
  for (std::size_t i = 1; i <= high; ++i) {
    AtomRecord& rec = store_.record_at(i);
    word_t refs = rec.references.load(std::memory_order_seq_cst);
    for (;;) {
      const RefWord rw{refs};
      if (rw.marked()) {
        // Survivor: clear the mark, preserving concurrent count changes.
        if (rec.references.compare_exchange_weak(
                refs, refs & ~RefWord::kMarkedBit,
                std::memory_order_seq_cst)) {
          break;
        }
        continue;
      }
      if (rw.valid() && rw.count() == 0) {
        invalidate_atom(rec, refs, i);
      }
      break;
    }
  }

  if (hooks_.before_destroy) hooks_.before_destroy();
  std::uint64_t bytes = 0;
  delta.atoms_reclaimed = destroy_atoms(&bytes);
  delta.bytes_reclaimed = bytes;
  created_since_gc_.store(0, std::memory_order_relaxed);
  agc_running_.store(0, std::memory_order_seq_cst);
  delta.collect_seconds = seconds_since(collect_begin);
  delta.invocations = 1;

  {
    std::lock_guard<std::mutex> stats(stats_lock_);
    totals_ += delta;
  }
  if (trace_hook_) trace_hook_(delta);
  return delta;
}

std::vector<AtomHandle> AtomTable::run_reference_agc() {
  std::scoped_lock lock(agc_lock_, registry_lock_);
  if (threads_.size() != 1) {
    throw ContractViolation(
        "reference collector requires exactly one registered thread");
  }
  ThreadContext& ctx = *threads_.front();
  const std::size_t high = store_.highest_index();

  // Conservative scan of the thread's arenas into a local mark set.
  std::unordered_set<std::size_t> marked;
  {
    std::lock_guard<std::mutex> arenas(ctx.arena_list_lock_);
    for (auto& arena : ctx.arenas_) {
      std::lock_guard<std::mutex> relocation(arena->relocation_lock_);
      const std::size_t n = arena->length_.load(std::memory_order_acquire);
      for (std::size_t i = 0; i < n; ++i) {
        if (auto index = classify_word(
                arena->words_[i].load(std::memory_order_acquire), high)) {
          marked.insert(*index);
        }
      }
    }
  }

  std::vector<AtomHandle> reclaimed;
  for (std::size_t i = 1; i <= high; ++i) {
    AtomRecord& rec = store_.record_at(i);
    const RefWord rw{rec.references.load(std::memory_order_seq_cst)};
    if (rw.marked()) {
      rec.references.store(rw.raw & ~RefWord::kMarkedBit,
                           std::memory_order_seq_cst);
      continue;
    }
    if (rw.valid() && rw.count() == 0 && !marked.contains(i)) {
      rec.references.store(rw.raw & ~RefWord::kValidBit,
                           std::memory_order_seq_cst);
      valid_count_.fetch_sub(1, std::memory_order_acq_rel);
      const AtomHandle h = encode_handle(i);
      unlink_from_generations(rec, h.raw);
      store_.release_record(h);
      reclaimed.push_back(h);
    }
  }
  return reclaimed;
}

}  // namespace atomtable
