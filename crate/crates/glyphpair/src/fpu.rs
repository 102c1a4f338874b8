//! Flush-to-zero floating point mode for the duration of a training run.

/// Sets flush-to-zero and denormals-are-zero on the current thread until
/// dropped. Subnormal intermediates otherwise slow every matrix product
/// that touches them by an order of magnitude. Results stay deterministic.
pub struct FlushDenormals {
    #[cfg(all(target_arch = "x86_64", target_feature = "sse"))]
    saved: u32,
}

/// MXCSR bits: FTZ (15) and DAZ (6).
#[cfg(all(target_arch = "x86_64", target_feature = "sse"))]
const FTZ_DAZ: u32 = 0x8040;

impl FlushDenormals {
    #[cfg(all(target_arch = "x86_64", target_feature = "sse"))]
    #[allow(deprecated)]
    pub fn new() -> Self {
        use std::arch::x86_64::{_mm_getcsr, _mm_setcsr};
        // SAFETY: only the FTZ/DAZ bits change; both are valid on every SSE CPU.
        let saved = unsafe { _mm_getcsr() };
        unsafe { _mm_setcsr(saved | FTZ_DAZ) };
        FlushDenormals { saved }
    }

    #[cfg(not(all(target_arch = "x86_64", target_feature = "sse")))]
    pub fn new() -> Self {
        FlushDenormals {}
    }
}

impl Default for FlushDenormals {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for FlushDenormals {
    #[cfg(all(target_arch = "x86_64", target_feature = "sse"))]
    #[allow(deprecated)]
    fn drop(&mut self) {
        // SAFETY: restores the value read in `new`.
        unsafe { std::arch::x86_64::_mm_setcsr(self.saved) };
    }

    #[cfg(not(all(target_arch = "x86_64", target_feature = "sse")))]
    fn drop(&mut self) {}
}
