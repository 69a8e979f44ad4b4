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

#include "atomtable/roots.hpp"

#include <algorithm>

#include "atomtable/errors.hpp"
#include "atomtable/table.hpp"

namespace atomtable {

void ScanArena::ensure_capacity(std::size_t needed) {
  if (needed <= capacity_) return;
  std::lock_guard<std::mutex> lock(relocation_lock_);
  const std::size_t new_cap = std::max<std::size_t>(16, capacity_ * 2);
  auto fresh = std::make_unique<std::atomic<word_t>[]>(new_cap);
  const std::size_t len = length_.load(std::memory_order_relaxed);
  for (std::size_t i = 0; i < len; ++i) {
    fresh[i].store(words_[i].load(std::memory_order_relaxed),
                   std::memory_order_relaxed);
  }
  words_ = std::move(fresh);
  capacity_ = new_cap;
}

std::size_t ScanArena::push(word_t w) {
  const std::size_t len = length_.load(std::memory_order_relaxed);
  ensure_capacity(len + 1);
  // Mark before the word becomes scannable so a cycle that already scanned
  // this arena cannot miss it.
  owner_.conditional_mark_for_arena(w);
  words_[len].store(w, std::memory_order_release);
  length_.store(len + 1, std::memory_order_release);
  return len;
}

void ScanArena::overwrite(std::size_t slot, word_t w) {
  if (slot >= length_.load(std::memory_order_relaxed)) {
    throw ContractViolation("arena overwrite outside live range");
  }
  owner_.conditional_mark_for_arena(w);
  words_[slot].store(w, std::memory_order_release);
}

void ScanArena::pop() {
  const std::size_t len = length_.load(std::memory_order_relaxed);
  if (len == 0) {
    throw ContractViolation("pop of an empty arena");
  }
  length_.store(len - 1, std::memory_order_release);
}

void ScanArena::compact() {
  std::lock_guard<std::mutex> lock(relocation_lock_);
  const std::size_t len = length_.load(std::memory_order_relaxed);
  if (len == capacity_) return;
  if (len == 0) {
    words_.reset();
    capacity_ = 0;
    return;
  }
  auto fresh = std::make_unique<std::atomic<word_t>[]>(len);
  for (std::size_t i = 0; i < len; ++i) {
    fresh[i].store(words_[i].load(std::memory_order_relaxed),
                   std::memory_order_relaxed);
  }
  words_ = std::move(fresh);
  capacity_ = len;
}

word_t ScanArena::word_at(std::size_t i) const {
  if (i >= length_.load(std::memory_order_acquire)) {
    throw ContractViolation("arena index outside live range");
  }
  return words_[i].load(std::memory_order_acquire);
}

ScanArena& ThreadContext::create_arena() {
  std::lock_guard<std::mutex> lock(arena_list_lock_);
  arenas_.emplace_back(new ScanArena(owner_));
  return *arenas_.back();
}

}  // namespace atomtable
