#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <functional>

namespace occ {

// 3-component vector over an arbitrary scalar. Instantiated with double for
// plain geometry and with ad::Var inside the differentiable loss path.
template <class T>
struct Vec3T {
  T x{};
  T y{};
  T z{};
};

using Vec3 = Vec3T<double>;

template <class T>
Vec3T<T> operator+(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}

template <class T>
Vec3T<T> operator-(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

template <class T>
Vec3T<T> operator*(const Vec3T<T>& a, double s) {
  return {a.x * s, a.y * s, a.z * s};
}

inline bool operator==(const Vec3& a, const Vec3& b) {
  return a.x == b.x && a.y == b.y && a.z == b.z;
}

template <class T>
T squared_norm(const Vec3T<T>& v) {
  return v.x * v.x + v.y * v.y + v.z * v.z;
}

template <class T>
T norm(const Vec3T<T>& v) {
  using std::sqrt;
  return sqrt(squared_norm(v));
}

// Promotes a plain vector into the scalar type of a differentiable
// computation; the components become constants there.
template <class T>
Vec3T<T> to_vec3(const Vec3& v) {
  return Vec3T<T>{T(v.x), T(v.y), T(v.z)};
}

struct VoxelIndex {
  int x = 0;
  int y = 0;
  int z = 0;
  friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

}  // namespace occ

template <>
struct std::hash<occ::VoxelIndex> {
  std::size_t operator()(const occ::VoxelIndex& v) const noexcept {
    std::size_t h = static_cast<std::size_t>(static_cast<unsigned>(v.x));
    h = h * 0x9e3779b97f4a7c15ull + static_cast<unsigned>(v.y);
    h = h * 0x9e3779b97f4a7c15ull + static_cast<unsigned>(v.z);
    return h;
  }
};
