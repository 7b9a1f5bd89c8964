#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "dreamer/utf8.hpp"

namespace dreamer {

using Embedding = std::vector<double>;

// Maps element text to a fixed-dimension vector. Implementations must be
// deterministic and safe to call concurrently.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual Embedding embed(std::string_view text) const = 0;
};

// Hashed character-trigram counts over code points, L2-normalized.
// Text is framed with start/end sentinels so one- and two-character
// strings still produce trigrams. The empty string maps to the zero vector.
class HashedTrigramEmbedder final : public TextEmbedder {
 public:
  static constexpr std::size_t kDimension = 256;

  Embedding embed(std::string_view text) const override {
    Embedding v(kDimension, 0.0);
    if (text.empty()) return v;
    std::vector<char32_t> cps;
    cps.push_back(kStart);
    const auto decoded = utf8::decode(text);
    cps.insert(cps.end(), decoded.begin(), decoded.end());
    cps.push_back(kEnd);
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) v[bucket(cps[i], cps[i + 1], cps[i + 2])] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }

  // FNV-1a over the three code points, little-endian 32-bit each.
  static std::size_t bucket(char32_t a, char32_t b, char32_t c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char32_t cp : {a, b, c}) {
      for (int shift = 0; shift < 32; shift += 8) {
        h ^= (static_cast<std::uint64_t>(cp) >> shift) & 0xFF;
        h *= 0x100000001b3ULL;
      }
    }
    return static_cast<std::size_t>(h % kDimension);
  }

 private:
  static constexpr char32_t kStart = 0x02;
  static constexpr char32_t kEnd = 0x03;
};

// Cosine similarity; 0 when either vector is zero.
inline double cosine(const Embedding& a, const Embedding& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  const auto n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline const TextEmbedder& default_embedder() {
  static const HashedTrigramEmbedder instance;
  return instance;
}

inline Embedding embed_text(std::string_view text) { return default_embedder().embed(text); }

}  // namespace dreamer
