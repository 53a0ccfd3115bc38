#ifndef IRSFS_GRID_HPP
#define IRSFS_GRID_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace irsfs {

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}
inline bool is_finite(double v) { return std::isfinite(v); }

/// Dense row-major image with a per-pixel validity mask.
///
/// Pixel (row, col) lives at index row * width + col. Masked-out pixels keep
/// whatever value is stored but every algorithm ignores them.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{}, bool valid = true)
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error("grid dimensions must be non-negative");
    data_.assign(size(), fill);
    mask_.assign(size(), valid ? 1 : 0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }
  bool empty() const { return size() == 0; }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }
  bool in_bounds(int row, int col) const { return row >= 0 && col >= 0 && row < height_ && col < width_; }

  T& operator()(int row, int col) { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const { return data_[index(row, col)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool valid(int row, int col) const { return mask_[index(row, col)] != 0; }
  bool valid(std::size_t i) const { return mask_[i] != 0; }
  /// True when (row, col) is inside the image and masked in.
  bool valid_at(int row, int col) const { return in_bounds(row, col) && valid(row, col); }
  void set_valid(int row, int col, bool v) { mask_[index(row, col)] = v ? 1 : 0; }
  void set_valid(std::size_t i, bool v) { mask_[i] = v ? 1 : 0; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }
  std::vector<std::uint8_t>& mask() { return mask_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }

  std::size_t count_valid() const {
    std::size_t n = 0;
    for (auto m : mask_) n += (m != 0);
    return n;
  }

  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  /// Masked-in values are finite and buffer sizes agree with the dimensions.
  bool check_invariants() const {
    if (data_.size() != size() || mask_.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (mask_[i] && !is_finite(data_[i])) return false;
    return true;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
  std::vector<std::uint8_t> mask_;
};

using Grid2D = Grid<double>;
using Vec3Grid = Grid<Vec3>;

/// Throws unless every grid has the shape of `ref`.
template <typename T, typename... Rest>
void require_same_shape(const char* what, const Grid<T>& ref, const Rest&... rest) {
  const bool ok = (ref.same_shape(rest) && ...);
  if (!ok) throw Error(std::string(what) + ": grid dimensions do not match");
}

/// Copy of `g` with the mask replaced by the intersection of both masks.
template <typename T, typename U>
Grid<T> intersect_mask(Grid<T> g, const Grid<U>& other) {
  require_same_shape("intersect_mask", g, other);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!other.valid(i)) g.set_valid(i, false);
  return g;
}

}  // namespace irsfs

#endif  // IRSFS_GRID_HPP
