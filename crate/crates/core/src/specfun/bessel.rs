use crate::error::{Error, Result};

/// Rescaling bound for the downward recurrence.
const RESCALE_ABOVE: f64 = 1e250;

/// Spherical Bessel function of the first kind `j_l(x)` for `x >= 0`.
///
/// `j_l(x) = sqrt(pi / (2x)) J_{l+1/2}(x)`, with `j_0(0) = 1` and `j_l(0) = 0`
/// for `l >= 1`.
pub fn spherical_bessel_j(l: usize, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "spherical Bessel argument must be finite and non-negative, got {x}"
        )));
    }
    Ok(spherical_bessel_j_upto(l, x)[l])
}

/// `[j_0(x), ..., j_lmax(x)]` for finite `x >= 0`.
///
/// Upward recurrence from the closed forms of `j_0`, `j_1` when `x > lmax`;
/// Miller's downward recurrence, normalized by whichever of `j_0`, `j_1` is
/// larger, otherwise.
pub fn spherical_bessel_j_upto(lmax: usize, x: f64) -> Vec<f64> {
    debug_assert!(x >= 0.0 && x.is_finite());
    let mut out = vec![0.0; lmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if x > lmax as f64 {
        out[0] = j0;
        if lmax >= 1 {
            out[1] = (s / x - c) / x;
        }
        for l in 1..lmax {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
        return out;
    }

    let start = lmax + 30 + (10.0 * x.cbrt()).ceil() as usize;
    let mut upper = 0.0; // f_{l+1}
    let mut current = 1e-30; // f_l
    for l in (1..=start).rev() {
        let lower = (2 * l + 1) as f64 / x * current - upper;
        upper = current;
        current = lower;
        // `current` now holds f_{l-1}.
        if l - 1 <= lmax {
            out[l - 1] = current;
        }
        if l <= lmax {
            out[l] = upper;
        }
        if current.abs() > RESCALE_ABOVE {
            let scale = 1.0 / RESCALE_ABOVE;
            current *= scale;
            upper *= scale;
            for v in out.iter_mut().skip(l.saturating_sub(1)) {
                *v *= scale;
            }
        }
    }
    let j1 = (s / x - c) / x;
    let scale = if j0.abs() >= j1.abs() || lmax == 0 {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    for v in &mut out {
        *v *= scale;
    }
    out
}
