//! Hash keys for matrices, exact or modulo a global phase.

#[allow(unused_imports)]
use num_traits::Float;
use crate::encoding::{c, ComplexMatrix, C64};

/// Quantization step for hashed entries.
const QUANTUM: f64 = 1e-6;

/// How two unitaries are compared when deduplicating or detecting relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EqualityMode {
    Exact,
    UpToPhase,
}

#[inline]
fn mix(h: u64, x: u64) -> u64 {
    let mut z = h ^ x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn quantize(x: f64) -> u64 {
    // `+ 0.0` folds -0.0 onto 0.0 so both signs of zero hash alike
    ((x / QUANTUM).round() + 0.0) as i64 as u64
}

/// Phase that rotates the first entry of non-negligible modulus onto the positive real axis.
pub(crate) fn canonical_phase(m: &ComplexMatrix) -> C64 {
    m.as_slice()
        .iter()
        .find(|z| z.norm() > 1e-3)
        .map(|z| z.conj() / z.norm())
        .unwrap_or(c(1.0, 0.0))
}

pub fn fingerprint(m: &ComplexMatrix, mode: EqualityMode) -> u64 {
    let phase = match mode {
        EqualityMode::Exact => c(1.0, 0.0),
        EqualityMode::UpToPhase => canonical_phase(m),
    };
    let mut h = m.dim() as u64;
    for &z in m.as_slice() {
        let z = z * phase;
        h = mix(h, quantize(z.re));
        h = mix(h, quantize(z.im));
    }
    h
}

/// Tolerance-based comparison matching the fingerprint's notion of equality.
pub fn matrices_equal(a: &ComplexMatrix, b: &ComplexMatrix, mode: EqualityMode, tol: f64) -> bool {
    match mode {
        EqualityMode::Exact => a.approx_eq(b, tol),
        EqualityMode::UpToPhase => a.approx_eq_up_to_phase(b, tol),
    }
}
