#pragma once

#include "spinid/signal_trace.hpp"

namespace spinid {

enum class PsdBackground { none, linear_subtract };

/// One-sided power spectral density of a time trace, normalized so the peak
/// (excluding the DC bin) is 1. Non-uniform grids are linearly resampled onto
/// a uniform one first. Requires at least 8 samples.
SignalTrace fft_psd(const SignalTrace& trace, PsdBackground background = PsdBackground::none);

} // namespace spinid
