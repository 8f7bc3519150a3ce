#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace contpat {

using TokenId = std::uint32_t;

// All stochastic components draw from explicitly seeded 64-bit Mersenne
// Twister streams, one stream per purpose.
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Derives an independent stream seed from a base seed and a purpose tag
// (splitmix64 finalizer over the combination).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t purpose) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (purpose + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace contpat
