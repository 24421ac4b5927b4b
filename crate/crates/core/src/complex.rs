//! Complex helpers for the half-plane slit maps.

pub use num_complex::Complex64;

/// Square root of `z` on the branch with non-negative imaginary part.
///
/// The principal root is computed without polar conversion and negated when
/// it lands in the lower half-plane, so the cut sits on the positive real axis.
#[inline]
pub fn sqrt_upper(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    if a == 0.0 && b == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let r = a.hypot(b);
    let root = if a >= 0.0 {
        let s = ((r + a) * 0.5).sqrt();
        Complex64::new(s, b / (2.0 * s))
    } else {
        let s = ((r - a) * 0.5).sqrt();
        Complex64::new(b.abs() / (2.0 * s), s.copysign(b))
    };
    if root.im < 0.0 || (root.im == 0.0 && root.re < 0.0) {
        -root
    } else {
        root
    }
}
