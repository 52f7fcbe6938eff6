#pragma once

#include <cassert>
#include <cstddef>
#include <utility>
#include <vector>

namespace ssmgrad {

/// Storage for quantities indexed by an unordered parameter pair (j,k).
///
/// Only the p(p+1)/2 entries with j <= k are stored; (k,j) reads the same slot,
/// so anything kept here is symmetric in the pair by construction.
template <class T>
class PairStack {
public:
    PairStack() = default;
    PairStack(std::size_t params, const T& init)
        : params_(params), data_(params * (params + 1) / 2, init) {}

    std::size_t params() const { return params_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(std::size_t j, std::size_t k) { return data_[index(j, k)]; }
    const T& operator()(std::size_t j, std::size_t k) const { return data_[index(j, k)]; }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    std::size_t index(std::size_t j, std::size_t k) const {
        if (j > k) std::swap(j, k);
        assert(k < params_);
        return j * params_ - (j * (j + 1)) / 2 + k;
    }

private:
    std::size_t params_ = 0;
    std::vector<T> data_;
};

} // namespace ssmgrad
