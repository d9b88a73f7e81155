#pragma once

#include <istream>
#include <ostream>
#include <stdexcept>

// Native-endian scalar I/O for the simulator's binary files.
namespace mmsync::binio {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("binary input truncated");
  return v;
}

}  // namespace mmsync::binio
