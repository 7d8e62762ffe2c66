use rand::Rng;

use crate::error::{Error, Result};

/// One slice-sampling update on a bounded scalar (log spatial range):
/// stepping-out bracket placement followed by shrinkage, with the bracket
/// clipped to `[lo, hi]`. The step-out budget is split randomly between the
/// two sides.
pub fn slice_sample_log_range<R: Rng + ?Sized>(
    x0: f64,
    target: &mut dyn FnMut(f64) -> f64,
    bounds: (f64, f64),
    w0: f64,
    max_stepout: usize,
    rng: &mut R,
) -> Result<f64> {
    let (lo, hi) = bounds;
    if !(lo < hi) || !(w0 > 0.0) {
        return Err(Error::invalid_input("slice sampler needs lo < hi and w0 > 0"));
    }
    let x0 = x0.clamp(lo, hi);
    let f0 = target(x0);
    if !f0.is_finite() {
        return Err(Error::InvalidState(format!(
            "slice target non-finite at current point {x0}"
        )));
    }
    let log_height = f0 + rng.random::<f64>().ln();

    // Place the initial bracket uniformly around x0, then step out.
    let mut l = (x0 - w0 * rng.random::<f64>()).max(lo);
    let mut r = (l + w0).min(hi);
    let j = (max_stepout as f64 * rng.random::<f64>()) as usize;
    let k = max_stepout.saturating_sub(1).saturating_sub(j);
    let mut budget_l = j;
    while budget_l > 0 && l > lo && target(l) > log_height {
        l = (l - w0).max(lo);
        budget_l -= 1;
    }
    let mut budget_r = k;
    while budget_r > 0 && r < hi && target(r) > log_height {
        r = (r + w0).min(hi);
        budget_r -= 1;
    }

    // Shrinkage: propose uniformly, shrink toward x0 on rejection.
    loop {
        let x = l + (r - l) * rng.random::<f64>();
        if target(x) > log_height {
            return Ok(x);
        }
        if x < x0 {
            l = x;
        } else {
            r = x;
        }
        if (r - l) < 1e-14 {
            return Ok(x0);
        }
    }
}
