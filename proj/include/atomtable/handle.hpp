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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "atomtable/errors.hpp"

namespace atomtable {

/// Machine word used for handles, reference words and arena slots.
/// Everything the collector scans or CASes is exactly one of these.
using word_t = std::uintptr_t;

inline constexpr unsigned kWordBits = sizeof(word_t) * 8;

// Atom handles are word-sized tagged indices, never addresses:
//   raw = (index << 3) | 0b101
// The 0b101 tag guarantees a handle can never equal a word-aligned
// pointer, which keeps conservative scans bounded to a cheap check.
inline constexpr unsigned kHandleTagBits = 3;
inline constexpr word_t kHandleTagMask = 0b111;
inline constexpr word_t kHandleTag = 0b101;

/// Largest encodable atom index: 2^(W-3) - 1.
inline constexpr word_t kMaxAtomIndex =
    (word_t{1} << (kWordBits - kHandleTagBits)) - 1;

/// Word-sized tagged identifier of an interned atom. Index 0 is reserved
/// as the null handle, so a default-constructed AtomHandle is "no atom".
struct AtomHandle {
  word_t raw = 0;

  constexpr AtomHandle() = default;
  constexpr explicit AtomHandle(word_t r) : raw(r) {}

  [[nodiscard]] constexpr bool is_null() const { return raw == 0; }
  [[nodiscard]] constexpr std::size_t index() const {
    return static_cast<std::size_t>(raw >> kHandleTagBits);
  }

  friend constexpr bool operator==(AtomHandle, AtomHandle) = default;
};

/// Encode an atom index as a tagged handle.
/// Throws EncodingError for index 0 (the null index) or out-of-range indices.
constexpr AtomHandle encode_handle(std::size_t index) {
  if (index < 1 || index > kMaxAtomIndex) {
    throw EncodingError("atom index out of encodable range");
  }
  return AtomHandle{(static_cast<word_t>(index) << kHandleTagBits) |
                    kHandleTag};
}

/// Conservative classification of an arbitrary bit pattern: returns the
/// atom index if `w` is shaped like a handle whose index is within
/// [1, max_index], and nothing otherwise. Total over all inputs.
constexpr std::optional<std::size_t> classify_word(word_t w,
                                                   std::size_t max_index) {
  if ((w & kHandleTagMask) != kHandleTag) return std::nullopt;
  const std::size_t index = static_cast<std::size_t>(w >> kHandleTagBits);
  if (index < 1 || index > max_index) return std::nullopt;
  return index;
}

/// Packed atom reference word. Top three bits are lifecycle flags, the rest
/// is the explicit reference count:
///
///   bit W-1  reserved  slot is claimed (not available to reserve_atom)
///   bit W-2  valid     atom is fully alive and visible to lookups
///   bit W-3  marked    referenced from a scanned arena this GC cycle
///   bits 0..W-4        reference count
///
/// The all-zero word is the FREE state. A valid atom is always reserved.
struct RefWord {
  static constexpr word_t kReservedBit = word_t{1} << (kWordBits - 1);
  static constexpr word_t kValidBit = word_t{1} << (kWordBits - 2);
  static constexpr word_t kMarkedBit = word_t{1} << (kWordBits - 3);
  static constexpr word_t kCountMask = kMarkedBit - 1;
  static constexpr word_t kFlagsMask = ~kCountMask;

  word_t raw = 0;

  constexpr RefWord() = default;
  constexpr explicit RefWord(word_t r) : raw(r) {}

  [[nodiscard]] constexpr bool is_free() const { return raw == 0; }
  [[nodiscard]] constexpr bool reserved() const {
    return (raw & kReservedBit) != 0;
  }
  [[nodiscard]] constexpr bool valid() const { return (raw & kValidBit) != 0; }
  [[nodiscard]] constexpr bool marked() const {
    return (raw & kMarkedBit) != 0;
  }
  [[nodiscard]] constexpr word_t count() const { return raw & kCountMask; }

  friend constexpr bool operator==(RefWord, RefWord) = default;
};

/// Pack flags and count into a reference word. Throws CapacityError if the
/// count does not fit in the W-3 count bits.
constexpr RefWord pack_refword(bool reserved, bool valid, bool marked,
                               word_t count) {
  if (count > RefWord::kCountMask) {
    throw CapacityError("reference count overflow");
  }
  word_t raw = count;
  if (reserved) raw |= RefWord::kReservedBit;
  if (valid) raw |= RefWord::kValidBit;
  if (marked) raw |= RefWord::kMarkedBit;
  return RefWord{raw};
}

constexpr bool is_reserved(RefWord w) { return w.reserved(); }
constexpr bool is_valid(RefWord w) { return w.valid(); }
constexpr bool is_marked(RefWord w) { return w.marked(); }
constexpr word_t count_of(RefWord w) { return w.count(); }

/// Deterministic, seed-free FNV-1a fold over the name bytes. Frozen so that
/// bucket placement is reproducible across runs and platforms of one width.
constexpr word_t hash_name(std::string_view bytes) {
  constexpr word_t kOffset =
      kWordBits == 64 ? word_t{14695981039346656037ull} : word_t{2166136261u};
  constexpr word_t kPrime =
      kWordBits == 64 ? word_t{1099511628211ull} : word_t{16777619u};
  word_t h = kOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kPrime;
  }
  return h;
}

}  // namespace atomtable
