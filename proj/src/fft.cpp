#include "sonoseg/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace sonoseg::fft {
namespace {

std::mutex plan_mutex;

fftw_plan plan_for(std::size_t n, int sign) {
    static std::map<std::pair<std::size_t, int>, fftw_plan> plans;
    std::lock_guard lock(plan_mutex);
    auto key = std::make_pair(n, sign);
    if (auto it = plans.find(key); it != plans.end()) return it->second;
    // Scratch buffers only for planning; execution uses the new-array API.
    auto* a = fftw_alloc_complex(n);
    auto* b = fftw_alloc_complex(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), a, b, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(a);
    fftw_free(b);
    plans.emplace(key, p);
    return p;
}

std::vector<cplx> run(std::span<const cplx> in, int sign) {
    std::vector<cplx> src(in.begin(), in.end());
    std::vector<cplx> out(in.size());
    if (in.empty()) return out;
    fftw_execute_dft(plan_for(in.size(), sign), reinterpret_cast<fftw_complex*>(src.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

}  // namespace

std::vector<cplx> forward(std::span<const cplx> in) { return run(in, FFTW_FORWARD); }
std::vector<cplx> inverse(std::span<const cplx> in) { return run(in, FFTW_BACKWARD); }

std::vector<cplx> forward_real(std::span<const double> in, std::size_t n) {
    std::vector<cplx> buf(n);
    for (std::size_t i = 0; i < in.size() && i < n; ++i) buf[i] = in[i];
    return forward(buf);
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace sonoseg::fft
