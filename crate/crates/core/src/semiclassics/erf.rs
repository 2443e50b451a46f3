//! Complex error function.
//!
//! The Maclaurin series loses about `e^{2x²}` relative accuracy at `Re ζ = x`,
//! so it is used only for `|Re ζ| < 2.5`; farther out the Laplace continued
//! fraction for `erfc` (evaluated with the modified Lentz method) converges
//! quickly. Accuracy is better than `1e-10` relative everywhere it was checked.

use faer::c64;

const SERIES_LIMIT: f64 = 2.5;
const MAX_TERMS: usize = 20_000;
const TINY: f64 = 1e-300;

/// `erf(ζ)` for complex `ζ`.
pub fn erf(z: c64) -> c64 {
    if z.re < 0.0 {
        return -erf(-z);
    }
    if z.re < SERIES_LIMIT {
        erf_series(z)
    } else {
        c64::new(1.0, 0.0) - erfc_continued_fraction(z)
    }
}

/// `erfc(ζ) = 1 − erf(ζ)`.
pub fn erfc(z: c64) -> c64 {
    if z.re >= SERIES_LIMIT {
        erfc_continued_fraction(z)
    } else {
        c64::new(1.0, 0.0) - erf(z)
    }
}

fn erf_series(z: c64) -> c64 {
    // erf ζ = 2/√π Σ (−1)ⁿ ζ^{2n+1} / (n! (2n+1))
    let z2 = z * z;
    let mut power = z; // (−1)ⁿ ζ^{2n+1} / n!
    let mut sum = z;
    for n in 1..MAX_TERMS {
        power = -power * z2 / n as f64;
        let term = power / (2 * n + 1) as f64;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum * std::f64::consts::FRAC_2_SQRT_PI
}

fn erfc_continued_fraction(z: c64) -> c64 {
    // erfc ζ = e^{−ζ²}/√π · 1/(ζ + (1/2)/(ζ + 1/(ζ + (3/2)/(ζ + …))))
    // Lentz on b0 + a1/(b1 + a2/(b2 + …)) with b_k = ζ, a_k = k/2.
    let mut f = if z.norm() < TINY { c64::new(TINY, 0.0) } else { z };
    let mut c = f;
    let mut d = c64::new(0.0, 0.0);
    for k in 1..MAX_TERMS {
        let a = k as f64 / 2.0;
        d = z + d * a;
        if d.norm() < TINY {
            d = c64::new(TINY, 0.0);
        }
        c = z + c64::new(a, 0.0) / c;
        if c.norm() < TINY {
            c = c64::new(TINY, 0.0);
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    (-z * z).exp() / (f * std::f64::consts::PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    // (Re ζ, Im ζ, Re erf ζ, Im erf ζ), 30-digit reference evaluation.
    const REFERENCE: &[(f64, f64, f64, f64)] = &[
        (0.1, 0.2, 0.11702148630390430145, 0.22638445718145091844),
        (1.0, 1.0, 1.3161512816979476449, 0.19045346923783468628),
        (-0.5, 2.0, -13.839985667741278683, -1.0429925008314202586),
        (2.4, 2.4, 0.84207274711204328379, -0.049453320699142793419),
        (2.6, 2.6, 1.0201027174978876811, 0.15161100546101318781),
        (3.0, 0.5, 1.0000280653614764049, -2.6284897222588231396e-7),
        (5.0, 5.0, 0.93037960374309511585, 0.038936190895121378954),
        (7.0710678118654755, 7.0710678118654755, 0.9453305037161771123, 0.013926504428656018696),
        (0.3, -4.0, 865230.15857056818363, 804043.16978946645534),
        (10.0, 1.0, 1.0, -6.7596474188186188331e-36),
        (-3.0, -3.0, -0.86782649757545114215, 0.012152181790312256514),
        (0.0, 0.01, 0.0, 0.011284167808628218149),
    ];

    #[test]
    fn matches_reference_values() {
        for &(x, y, re, im) in REFERENCE {
            let got = erf(c64::new(x, y));
            let want = c64::new(re, im);
            let rel = (got - want).norm() / want.norm();
            assert!(rel < 1e-10, "erf({x}+{y}i) = {got}, want {want}, rel {rel:.2e}");
        }
    }

    #[test]
    fn real_axis_and_symmetries() {
        assert_eq!(erf(c64::new(0.0, 0.0)), c64::new(0.0, 0.0));
        assert!((erf(c64::new(1.0, 0.0)).re - 0.842_700_792_949_714_9).abs() < 1e-15);
        let z = c64::new(1.3, -0.7);
        assert!((erf(z.conj()) - erf(z).conj()).norm() < 1e-15);
        assert!((erf(-z) + erf(z)).norm() < 1e-15);
    }

    #[test]
    fn branches_agree_at_the_switch() {
        for &y in &[0.0, 1.0, 2.5, 4.0] {
            let z = c64::new(SERIES_LIMIT, y);
            let rel = (erf_series(z) - (c64::new(1.0, 0.0) - erfc_continued_fraction(z))).norm() / erf_series(z).norm();
            assert!(rel < 1e-10, "y = {y}: rel {rel:.2e}");
        }
    }
}
