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

#include "atomtable/table.hpp"

#include <bit>
#include <thread>

namespace atomtable {

namespace {

void backoff(int& spins) {
  if (++spins > 16) {
    std::this_thread::yield();
  }
}

}  // namespace

// Clears the lookup guards on every exit path, success or error.
struct AtomTable::GuardScope {
  explicit GuardScope(ThreadContext& c) : ctx(c) {}
  ~GuardScope() { AtomTable::clear_guards(ctx); }
  ThreadContext& ctx;
};

void AtomTable::clear_guards(ThreadContext& ctx) {
  ctx.bucket_guard_.store(nullptr, std::memory_order_seq_cst);
  ctx.table_snapshot_.store(nullptr, std::memory_order_seq_cst);
}

AtomTable::AtomTable(Config cfg) : cfg_(cfg) {
  if (cfg_.initial_buckets == 0 || !std::has_single_bit(cfg_.initial_buckets)) {
    throw ConfigError("initial bucket count must be a power of two");
  }
  if (cfg_.resize_load_factor <= 0.0) {
    throw ConfigError("resize load factor must be positive");
  }
  current_.store(new BucketTable(cfg_.initial_buckets),
                 std::memory_order_release);
}

AtomTable::~AtomTable() {
  BucketTable* t = current_.load(std::memory_order_acquire);
  while (t) {
    BucketTable* p = t->prev;
    delete t;
    t = p;
  }
}

ThreadContext& AtomTable::register_thread() {
  std::lock_guard<std::mutex> lock(registry_lock_);
  threads_.emplace_back(new ThreadContext(*this));
  return *threads_.back();
}

void AtomTable::deregister_thread(ThreadContext& ctx) {
  std::lock_guard<std::mutex> lock(registry_lock_);
  for (auto it = threads_.begin(); it != threads_.end(); ++it) {
    if (it->get() == &ctx) {
      threads_.erase(it);
      return;
    }
  }
  throw ContractViolation("deregister of an unknown thread context");
}

std::size_t AtomTable::registered_thread_count() const {
  std::lock_guard<std::mutex> lock(registry_lock_);
  return threads_.size();
}

AtomRecord& AtomTable::checked_record(AtomHandle h) const {
  if (h.is_null() || (h.raw & kHandleTagMask) != kHandleTag) {
    throw ContractViolation("malformed atom handle");
  }
  if (h.index() > store_.highest_index()) {
    throw LookupError("atom handle outside published range");
  }
  return store_.record_at(h.index());
}

bool AtomTable::bump_ref(AtomRecord& rec, word_t observed) {
  for (;;) {
    if (RefWord{observed}.count() == RefWord::kCountMask) {
      throw CapacityError("reference count overflow");
    }
    if (rec.references.compare_exchange_strong(observed, observed + 1,
                                               std::memory_order_seq_cst)) {
      return true;
    }
    // observed now holds the fresh value
    if (!RefWord{observed}.valid()) {
      return false;
    }
  }
}

bool AtomTable::overfull(const BucketTable& table) const {
  const double load =
      static_cast<double>(valid_count_.load(std::memory_order_acquire)) /
      static_cast<double>(table.buckets);
  return load > cfg_.resize_load_factor;
}

AtomHandle AtomTable::intern(std::string_view name, ThreadContext& ctx) {
  return *lookup(name, ctx, /*insert=*/true);
}

std::optional<AtomHandle> AtomTable::find_existing(std::string_view name,
                                                   ThreadContext& ctx) {
  return lookup(name, ctx, /*insert=*/false);
}

std::optional<AtomHandle> AtomTable::lookup(std::string_view name,
                                            ThreadContext& ctx, bool insert) {
  const word_t hash = hash_name(name);
  GuardScope guards(ctx);
  int spins = 0;

  for (;;) {
    BucketTable* table = current_.load(std::memory_order_seq_cst);
    ctx.table_snapshot_.store(table, std::memory_order_seq_cst);
    // Validate after publishing: a generation observed equal to current
    // after the guard store cannot have been reclaimed under us.
    if (current_.load(std::memory_order_seq_cst) != table) continue;

    std::atomic<word_t>& slot = table->slot_for(hash);
    ctx.bucket_guard_.store(&slot, std::memory_order_seq_cst);
    const word_t seen = slot.load(std::memory_order_seq_cst);
    if (slot_frozen(seen)) {
      // This generation is being migrated; wait for the new one.
      backoff(spins);
      continue;
    }
    const word_t head = seen;

    bool restart = false;
    for (word_t ar = head; ar != 0;) {
      if (hooks_.on_chain_step) hooks_.on_chain_step();
      AtomRecord& rec = store_.record_at(ar >> kHandleTagBits);
      const word_t refs = rec.references.load(std::memory_order_seq_cst);
      const RefWord rw{refs};
      if (rw.reserved()) {
        const NameBuf* nb = rec.name.load(std::memory_order_acquire);
        if (nb && nb->view() == name) {
          if (rw.valid()) {
            if (bump_ref(rec, refs)) {
              return AtomHandle{ar};
            }
            // Invalidated between the load and the bump; rescan.
            restart = true;
            break;
          }
          // A winning inserter has published this record but not yet made
          // it valid. Matching only valid atoms here would let us insert a
          // duplicate, so wait for the commit.
          restart = true;
          break;
        }
      }
      ar = rec.next.load(std::memory_order_acquire);
    }
    if (restart) {
      backoff(spins);
      continue;
    }

    // Not found on a walk that started from `head`.
    if (!insert) {
      if (current_.load(std::memory_order_seq_cst) != table) continue;
      if (slot.load(std::memory_order_seq_cst) != head) continue;
      return std::nullopt;
    }

    if (overfull(*table)) {
      resize_atom_table();
      continue;
    }
    if (current_.load(std::memory_order_seq_cst) != table) continue;
    if (slot.load(std::memory_order_seq_cst) != head) continue;

    AtomHandle fresh = store_.reserve_atom();
    AtomRecord& rec = store_.record_at(fresh.index());
    rec.name.store(NameBuf::make(name), std::memory_order_release);
    rec.next.store(head, std::memory_order_release);
    word_t expected = head;
    if (slot.compare_exchange_strong(expected, fresh.raw,
                                     std::memory_order_seq_cst)) {
      // The insert is committed by the bucket CAS alone: a concurrent
      // resize freezes a bucket before migrating it, so a record that made
      // it into a chain is carried into every later generation.
      rec.references.store(pack_refword(true, true, false, 1).raw,
                           std::memory_order_seq_cst);
      valid_count_.fetch_add(1, std::memory_order_acq_rel);
      created_since_gc_.fetch_add(1, std::memory_order_relaxed);
      clear_guards(ctx);
      maybe_auto_gc();
      return fresh;
    }
    // Lost the bucket race; the record was never published anywhere.
    store_.release_record(fresh);
    backoff(spins);
  }
}

void AtomTable::resize_atom_table() {
  std::lock_guard<std::mutex> lock(agc_lock_);
  BucketTable* old = current_.load(std::memory_order_seq_cst);
  if (!overfull(*old)) {
    return;  // another thread resized first
  }
  auto fresh = std::make_unique<BucketTable>(old->buckets * 2);
  fresh->prev = old;

  for (std::size_t b = 0; b < old->buckets; ++b) {
    std::atomic<word_t>& slot = old->slots[b];
    word_t v = slot.load(std::memory_order_seq_cst);
    while (!slot.compare_exchange_weak(v, v | kSlotFrozenBit,
                                       std::memory_order_seq_cst)) {
    }
    // From here no insert can land in this bucket; the chain is ours.
    // Every chained record is either valid or a committing insert, and
    // both must survive into the new generation.
    for (word_t ar = slot_head(v); ar != 0;) {
      AtomRecord& rec = store_.record_at(ar >> kHandleTagBits);
      const word_t nxt = rec.next.load(std::memory_order_acquire);
      const NameBuf* nb = rec.name.load(std::memory_order_acquire);
      std::atomic<word_t>& target = fresh->slot_for(hash_name(nb->view()));
      rec.next.store(target.load(std::memory_order_relaxed),
                     std::memory_order_release);
      target.store(ar, std::memory_order_relaxed);
      ar = nxt;
    }
  }
  current_.store(fresh.release(), std::memory_order_seq_cst);
}

std::string_view AtomTable::name_of(AtomHandle h) const {
  AtomRecord& rec = checked_record(h);
  const RefWord rw{rec.references.load(std::memory_order_seq_cst)};
  if (!rw.valid()) {
    throw ContractViolation("name_of on an atom that is not valid");
  }
  return rec.name.load(std::memory_order_acquire)->view();
}

void AtomTable::register_atom(AtomHandle h) {
  AtomRecord& rec = checked_record(h);
  word_t refs = rec.references.load(std::memory_order_seq_cst);
  for (;;) {
    const RefWord rw{refs};
    if (!rw.valid()) {
      throw StaleHandleError("register_atom on an invalidated atom");
    }
    if (rw.count() == RefWord::kCountMask) {
      throw CapacityError("reference count overflow");
    }
    if (rec.references.compare_exchange_weak(refs, refs + 1,
                                             std::memory_order_seq_cst)) {
      return;
    }
  }
}

void AtomTable::unregister_atom(AtomHandle h, ThreadContext& ctx) {
  AtomRecord& rec = checked_record(h);
  for (;;) {
    word_t refs = rec.references.load(std::memory_order_seq_cst);
    const RefWord rw{refs};
    if (rw.count() == 0) {
      throw ContractViolation("unregister_atom below zero");
    }
    if (rw.count() == 1) {
      // Last reference: hand the atom to a possibly-starting cycle first.
      // The store must be globally visible before the flag is read; both
      // sides use sequentially consistent accesses (see the collector's
      // flag store and unregistering scan).
      ctx.unregistering_.store(h.raw, std::memory_order_seq_cst);
      if (agc_running_.load(std::memory_order_seq_cst) != 0) {
        mark_atom(rec);
      }
      const bool done = rec.references.compare_exchange_strong(
          refs, refs - 1, std::memory_order_seq_cst);
      ctx.unregistering_.store(0, std::memory_order_seq_cst);
      if (done) return;
    } else {
      if (rec.references.compare_exchange_strong(refs, refs - 1,
                                                 std::memory_order_seq_cst)) {
        return;
      }
    }
  }
}

void AtomTable::maybe_auto_gc() {
  if (!cfg_.auto_gc) return;
  if (created_since_gc_.load(std::memory_order_relaxed) <
      cfg_.auto_gc_threshold) {
    return;
  }
  if (agc_running_.load(std::memory_order_seq_cst) != 0) return;
  run_agc();
}

std::size_t AtomTable::bucket_count() const {
  return current_.load(std::memory_order_seq_cst)->buckets;
}

std::size_t AtomTable::generation_count() const {
  std::lock_guard<std::mutex> lock(agc_lock_);
  std::size_t n = 0;
  for (const BucketTable* t = current_.load(std::memory_order_seq_cst); t;
       t = t->prev) {
    ++n;
  }
  return n;
}

std::size_t AtomTable::pending_invalid_count() const {
  std::lock_guard<std::mutex> lock(agc_lock_);
  std::size_t n = 0;
  for (word_t ar = invalid_head_.load(std::memory_order_relaxed); ar != 0;) {
    ++n;
    ar = store_.record_at(ar >> kHandleTagBits)
             .next_invalid.load(std::memory_order_relaxed);
  }
  return n;
}

void AtomTable::for_each_valid_atom(
    const std::function<void(AtomHandle, std::string_view)>& fn) const {
  const BucketTable* t = current_.load(std::memory_order_seq_cst);
  for (std::size_t b = 0; b < t->buckets; ++b) {
    word_t ar = slot_head(t->slots[b].load(std::memory_order_seq_cst));
    while (ar != 0) {
      AtomRecord& rec = store_.record_at(ar >> kHandleTagBits);
      const RefWord rw{rec.references.load(std::memory_order_seq_cst)};
      if (rw.valid()) {
        fn(AtomHandle{ar}, rec.name.load(std::memory_order_acquire)->view());
      }
      ar = rec.next.load(std::memory_order_acquire);
    }
  }
}

AgcStats AtomTable::stats() const {
  std::lock_guard<std::mutex> lock(stats_lock_);
  return totals_;
}

void AtomTable::set_trace_hook(std::function<void(const AgcStats&)> hook) {
  trace_hook_ = std::move(hook);
}

void AtomTable::set_test_hooks(TestHooks hooks) { hooks_ = std::move(hooks); }

}  // namespace atomtable
