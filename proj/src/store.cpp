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

#include "atomtable/store.hpp"

#include <bit>
#include <cstring>
#include <new>

namespace atomtable {

namespace {

// Directory entries are pre-offset: the stored pointer minus the block's
// first index, so record_at can use the raw index without a subtraction.
AtomRecord* pre_offset(AtomRecord* base, std::size_t first_index) {
  return reinterpret_cast<AtomRecord*>(reinterpret_cast<std::uintptr_t>(base) -
                                       first_index * sizeof(AtomRecord));
}

AtomRecord* block_base(AtomRecord* stored, std::size_t first_index) {
  return reinterpret_cast<AtomRecord*>(reinterpret_cast<std::uintptr_t>(stored) +
                                       first_index * sizeof(AtomRecord));
}

unsigned msb(std::size_t index) {
  return static_cast<unsigned>(std::bit_width(index) - 1);
}

}  // namespace

const NameBuf* NameBuf::make(std::string_view bytes) {
  void* mem = ::operator new(sizeof(NameBuf) + bytes.size());
  auto* buf = new (mem) NameBuf(bytes.size());
  if (!bytes.empty()) {
    std::memcpy(const_cast<NameBuf*>(buf) + 1, bytes.data(), bytes.size());
  }
  return buf;
}

void NameBuf::destroy(const NameBuf* buf) {
  if (buf) ::operator delete(const_cast<void*>(static_cast<const void*>(buf)));
}

AtomStore::AtomStore() {
  auto* base = new AtomRecord[kPreallocatedSlots]();
  // Blocks 0..2 all resolve into the one preallocated chunk at offset 0.
  for (unsigned k = 0; k <= kPreallocatedTopBlock; ++k) {
    blocks_[k].store(base, std::memory_order_release);
  }
}

AtomStore::~AtomStore() {
  const std::size_t limit = limit_.load(std::memory_order_acquire);
  for (std::size_t i = 1; i < limit; ++i) {
    NameBuf::destroy(record_at(i).name.load(std::memory_order_acquire));
  }
  delete[] blocks_[0].load(std::memory_order_acquire);
  for (unsigned k = kPreallocatedTopBlock + 1; k < kDirectorySize; ++k) {
    AtomRecord* stored = blocks_[k].load(std::memory_order_acquire);
    if (!stored) break;
    delete[] block_base(stored, std::size_t{1} << k);
  }
}

AtomRecord& AtomStore::record_at(std::size_t index) const {
  if (index < 1 || index >= limit_.load(std::memory_order_acquire)) {
    throw LookupError("atom index outside allocated range");
  }
  AtomRecord* stored = blocks_[msb(index)].load(std::memory_order_acquire);
  return stored[index];
}

AtomRecord& AtomStore::atom_at(std::size_t index) const {
  if (index < 1 || index > highest_index()) {
    throw LookupError("atom index outside published range");
  }
  return record_at(index);
}

bool AtomStore::try_reserve_range(std::size_t lo, std::size_t hi,
                                  std::size_t* out) {
  for (std::size_t i = lo; i < hi; ++i) {
    AtomRecord& rec = record_at(i);
    word_t refs = rec.references.load(std::memory_order_relaxed);
    if (refs != 0) continue;
    if (rec.references.compare_exchange_strong(refs, RefWord::kReservedBit,
                                               std::memory_order_acq_rel)) {
      *out = i;
      return true;
    }
  }
  return false;
}

AtomHandle AtomStore::reserve_atom() {
  for (;;) {
    const std::size_t limit = limit_.load(std::memory_order_acquire);
    std::size_t start = scan_hint_.load(std::memory_order_relaxed);
    if (start < 1 || start >= limit) start = 1;

    std::size_t found = 0;
    if (try_reserve_range(start, limit, &found) ||
        try_reserve_range(1, start, &found)) {
      scan_hint_.store(found + 1, std::memory_order_relaxed);
      std::size_t hi = highest_.load(std::memory_order_relaxed);
      while (hi < found && !highest_.compare_exchange_weak(
                               hi, found, std::memory_order_acq_rel)) {
      }
      return encode_handle(found);
    }
    grow(limit);
  }
}

void AtomStore::grow(std::size_t seen_limit) {
  std::lock_guard<std::mutex> lock(growth_lock_);
  if (limit_.load(std::memory_order_acquire) != seen_limit) {
    return;  // someone else already grew; rescan
  }
  const unsigned k = top_block_ + 1;
  if (k >= kDirectorySize) {
    throw CapacityError("atom index space exhausted");
  }
  const std::size_t first = std::size_t{1} << k;
  auto* base = new AtomRecord[first]();  // covers [2^k, 2^(k+1))
  blocks_[k].store(pre_offset(base, first), std::memory_order_release);
  top_block_ = k;
  limit_.store(first << 1, std::memory_order_release);
  scan_hint_.store(first, std::memory_order_relaxed);
}

void AtomStore::release_record(AtomHandle h) {
  if (h.is_null()) {
    throw ContractViolation("release of the null handle");
  }
  AtomRecord& rec = record_at(h.index());
  const RefWord refs{rec.references.load(std::memory_order_acquire)};
  if (refs.valid()) {
    throw ContractViolation("release of a valid atom");
  }
  if (!refs.reserved()) {
    throw ContractViolation("release of a record that is not reserved");
  }
  NameBuf::destroy(rec.name.exchange(nullptr, std::memory_order_acq_rel));
  rec.next_invalid.store(0, std::memory_order_relaxed);
  rec.references.store(0, std::memory_order_release);
}

}  // namespace atomtable
