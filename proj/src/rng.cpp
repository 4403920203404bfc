#include "colinf/rng.hpp"

#include "colinf/error.hpp"

namespace colinf {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "shape_error";
    case ErrorKind::domain: return "domain_error";
    case ErrorKind::state: return "state_error";
    case ErrorKind::training: return "training_error";
    case ErrorKind::config: return "config_error";
    case ErrorKind::io: return "io_error";
    case ErrorKind::parse: return "parse_error";
  }
  return "error";
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, StreamKind kind, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ static_cast<std::uint64_t>(kind));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return h;
}

}  // namespace colinf
