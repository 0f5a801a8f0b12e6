// Radix-2 FFT for power-of-two frame lengths.
#pragma once

#include <complex>
#include <vector>

namespace mfse {

using cd = std::complex<double>;

bool is_power_of_two(std::size_t n);

// In-place iterative radix-2 transform. inverse=true applies the 1/n factor.
void fft_inplace(std::vector<cd>& a, bool inverse);

// Real-input FFT, returns n/2+1 bins.
std::vector<cd> rfft(const double* x, std::size_t n);

// Inverse of rfft assuming conjugate symmetry; imaginary parts of bins 0 and
// n/2 do not contribute to the (real) output.
std::vector<double> irfft(const std::vector<cd>& half, std::size_t n);

}  // namespace mfse
