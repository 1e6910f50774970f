#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace load::core {

#ifdef LOAD_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<int>;

// Every buffer starts on a 64-byte boundary so vectorised reductions take the same
// path on every allocation; otherwise sums can differ in the last bit between runs.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Storage = std::vector<Real, AlignedAllocator<Real>>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor. Rank 0 is a scalar, rank 1 a vector, rank 2 a matrix.
// Ops treat rank <= 1 tensors as a single row when a matrix view is needed.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = Real(0));
    Tensor(Shape shape, std::vector<Real> data);

    static Tensor scalar(Real v);
    static Tensor vector(std::initializer_list<Real> values);
    static Tensor vector(std::vector<Real> values);
    static Tensor matrix(int rows, int cols, std::initializer_list<Real> values);
    static Tensor zeros_like(const Tensor& other);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // Matrix view: rank 2 -> (d0, d1); rank 1 -> (1, d0); rank 0 -> (1, 1).
    int rows() const;
    int cols() const;

    std::span<Real> data() { return data_; }
    std::span<const Real> data() const { return data_; }
    Real* ptr() { return data_.data(); }
    const Real* ptr() const { return data_.data(); }

    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }
    Real& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
    Real at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }

    Real item() const;
    void fill(Real v);
    Tensor reshaped(Shape shape) const;
    bool all_finite() const;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Tensor(Shape shape, const Storage& data) : shape_(std::move(shape)), data_(data) {}

    Shape shape_;
    Storage data_;
};

// Bit-level equality (distinguishes -0/+0 and compares NaN payloads).
bool bit_equal(const Tensor& a, const Tensor& b);

}  // namespace load::core
