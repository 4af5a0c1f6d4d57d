#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sonoseg::fft {

using cplx = std::complex<double>;

// Thin wrapper over FFTW. Plans are created once per (length, direction)
// under a lock and then executed concurrently on caller-owned buffers.
std::vector<cplx> forward(std::span<const cplx> in);
std::vector<cplx> inverse(std::span<const cplx> in);  // unnormalized

std::vector<cplx> forward_real(std::span<const double> in, std::size_t n);  // zero-pads to n

std::size_t next_pow2(std::size_t n);

}  // namespace sonoseg::fft
