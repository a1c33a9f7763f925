//! Modified Bessel functions of complex argument in the right half-plane.
//!
//! The 2D complex-frequency fundamental solution is K0(s|x-y|)/(2pi); the
//! boundary quadrature additionally needs I0 (the coefficient of the log
//! singularity) and the analytic remainder after the log split.
//!
//! Evaluation regimes for K0/K1:
//!   - |z| small, or z near the imaginary axis with moderate |z|: power series
//!     (the cancellation is governed by exp(2 Re z), so the series stays
//!     accurate near the imaginary axis far beyond the usual small-|z| range);
//!   - Re z > 2 and |z| < 14: Steed continued fraction, exponentially scaled;
//!   - |z| >= 14: asymptotic expansion, exponentially scaled.
//! I0 uses the power series, Miller's downward recurrence, or the asymptotic
//! expansion. Order-n sequences (used by the disk reference series) come from
//! the same K0/K1 seeds via upward recurrence, and Miller for I_n.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.5772156649015328606;

const SERIES_RADIUS: f64 = 2.0;
const ASYM_RADIUS: f64 = 14.0;
const I0_SERIES_RADIUS: f64 = 4.0;
const I0_MILLER_RADIUS: f64 = 30.0;

fn check_half_plane(z: Complex64) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() || z.re <= 0.0 {
        return Err(Error::HalfPlane(z));
    }
    Ok(())
}

/// K0(z) for Re z > 0, relative accuracy ~1e-13 over |z| in [1e-8, 1e3].
pub fn bessel_k0(z: Complex64) -> Result<Complex64> {
    check_half_plane(z)?;
    Ok(k0(z))
}

/// Analytic remainder of the log split: K0(z) + ln(z/2) I0(z).
///
/// Extends analytically through z = 0 with limit -gamma; the boundary
/// quadrature reassembles K0 from this and the explicit log factor.
pub fn bessel_k0_regular(z: Complex64) -> Result<Complex64> {
    check_half_plane(z)?;
    Ok(g0(z))
}

/// I0(z) for Re z >= 0.
pub fn bessel_i0(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::HalfPlane(z));
    }
    Ok(i0(z))
}

pub(crate) fn k0(z: Complex64) -> Complex64 {
    if z.re > 705.0 {
        return Complex64::new(0.0, 0.0);
    }
    let (k0s, _) = k0k1_scaled(z);
    k0s * (-z).exp()
}

pub(crate) fn k1(z: Complex64) -> Complex64 {
    if z.re > 705.0 {
        return Complex64::new(0.0, 0.0);
    }
    let (_, k1s) = k0k1_scaled(z);
    k1s * (-z).exp()
}

/// (e^z K0(z), e^z K1(z)); scaled so the pair stays representable at large Re z.
pub(crate) fn k0k1_scaled(z: Complex64) -> (Complex64, Complex64) {
    let r = z.norm();
    if r <= SERIES_RADIUS {
        let ez = z.exp();
        (k0_series(z) * ez, k1_series(z) * ez)
    } else if r < ASYM_RADIUS {
        // the continued fraction converges throughout the right half-plane,
        // including close to the imaginary axis (at more iterations)
        k0k1_cf2_scaled(z)
    } else {
        k0k1_asym_scaled(z)
    }
}

pub(crate) fn i0(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r <= I0_SERIES_RADIUS {
        i0_series(z)
    } else if r <= I0_MILLER_RADIUS {
        i_seq_miller(z, 0)[0]
    } else {
        i0_asym(z)
    }
}

/// G(z) = K0(z) + ln(z/2) I0(z); entire, G(0) = -gamma.
pub(crate) fn g0(z: Complex64) -> Complex64 {
    if z.norm() <= I0_SERIES_RADIUS {
        g0_series(z)
    } else {
        k0(z) + (0.5 * z).ln() * i0(z)
    }
}

/// (I0(z), G(z)) sharing work; the boundary-kernel assembly hot path.
pub(crate) fn i0_and_regular(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() <= I0_SERIES_RADIUS {
        // one series pass accumulates both sums
        let q = 0.25 * z * z;
        let mut term = Complex64::new(1.0, 0.0);
        let mut i0sum = term;
        let mut gsum = Complex64::new(0.0, 0.0);
        let mut h = 0.0;
        for k in 1..60 {
            term *= q / ((k * k) as f64);
            h += 1.0 / k as f64;
            i0sum += term;
            gsum += h * term;
            if term.norm() * (1.0 + h) < 1e-18 * (1.0 + gsum.norm()) {
                break;
            }
        }
        (i0sum, gsum - EULER_GAMMA * i0sum)
    } else {
        let i = i0(z);
        (i, k0(z) + (0.5 * z).ln() * i)
    }
}

/// I_n(z) for n = 0..=nmax by Miller's downward recurrence.
pub(crate) fn bessel_i_seq(z: Complex64, nmax: usize) -> Vec<Complex64> {
    if z.norm() < 1e-14 {
        let mut out = vec![Complex64::new(0.0, 0.0); nmax + 1];
        out[0] = Complex64::new(1.0, 0.0);
        return out;
    }
    let mut seq = i_seq_miller(z, nmax);
    seq.truncate(nmax + 1);
    seq
}

/// e^z K_n(z) for n = 0..=nmax; upward recurrence from the scaled seeds.
pub(crate) fn bessel_kn_scaled_seq(z: Complex64, nmax: usize) -> Vec<Complex64> {
    let (k0s, k1s) = k0k1_scaled(z);
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(k0s);
    if nmax >= 1 {
        out.push(k1s);
    }
    for n in 1..nmax {
        let next = out[n - 1] + 2.0 * n as f64 / z * out[n];
        out.push(next);
    }
    out
}

// --- power series ------------------------------------------------------

fn i0_series(z: Complex64) -> Complex64 {
    let q = 0.25 * z * z;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..60 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

fn g0_series(z: Complex64) -> Complex64 {
    // -gamma I0(z) + sum_{k>=1} h_k (z^2/4)^k / (k!)^2
    let q = 0.25 * z * z;
    let mut term = Complex64::new(1.0, 0.0);
    let mut i0sum = term;
    let mut gsum = Complex64::new(0.0, 0.0);
    let mut h = 0.0;
    for k in 1..60 {
        term *= q / ((k * k) as f64);
        h += 1.0 / k as f64;
        i0sum += term;
        gsum += h * term;
        if term.norm() * (1.0 + h) < 1e-18 * (1.0 + gsum.norm()) {
            break;
        }
    }
    gsum - EULER_GAMMA * i0sum
}

fn k0_series(z: Complex64) -> Complex64 {
    g0_series(z) - (0.5 * z).ln() * i0_series(z)
}

fn i1_series(z: Complex64) -> Complex64 {
    let q = 0.25 * z * z;
    let mut term = 0.5 * z;
    let mut sum = term;
    for k in 1..60 {
        term *= q / ((k * (k + 1)) as f64);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

fn k1_series(z: Complex64) -> Complex64 {
    // ln(z/2) I1(z) + 1/z - (z/4) sum_k (h_k + h_{k+1} - 2 gamma) q^k / (k!(k+1)!)
    let q = 0.25 * z * z;
    let mut term = Complex64::new(1.0, 0.0); // q^k / (k!(k+1)!)
    let mut hk = 0.0;
    let mut hk1 = 1.0;
    let mut sum = (hk + hk1 - 2.0 * EULER_GAMMA) * term;
    for k in 1..60 {
        term *= q / ((k * (k + 1)) as f64);
        hk += 1.0 / k as f64;
        hk1 += 1.0 / (k + 1) as f64;
        let add = (hk + hk1 - 2.0 * EULER_GAMMA) * term;
        sum += add;
        if add.norm() < 1e-18 * (1.0 + sum.norm()) {
            break;
        }
    }
    (0.5 * z).ln() * i1_series(z) + 1.0 / z - 0.25 * z * sum
}

// --- continued fraction (Steed/Lentz), exponentially scaled -------------

fn k0k1_cf2_scaled(z: Complex64) -> (Complex64, Complex64) {
    const MAX_ITER: usize = 600;
    let one = Complex64::new(1.0, 0.0);
    let a1 = 0.25;
    let mut b = 2.0 * (one + z);
    let mut d = one / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = Complex64::new(0.0, 0.0);
    let mut q2 = one;
    let mut a = -a1;
    let mut c = Complex64::new(a1, 0.0);
    let mut q = c;
    let mut s = one + q * delh;
    for i in 2..=MAX_ITER {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = one / (b + a * d);
        delh = (b * d - one) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-16 * s.norm() {
            break;
        }
    }
    h = a1 * h;
    let k0s = (std::f64::consts::PI / (2.0 * z)).sqrt() / s;
    let k1s = k0s * (z + 0.5 - h) / z;
    (k0s, k1s)
}

// --- asymptotic expansions ----------------------------------------------

fn k0k1_asym_scaled(z: Complex64) -> (Complex64, Complex64) {
    let pref = (std::f64::consts::PI / (2.0 * z)).sqrt();
    let mut t0 = Complex64::new(1.0, 0.0);
    let mut t1 = Complex64::new(1.0, 0.0);
    let mut s0 = t0;
    let mut s1 = t1;
    let mut best0 = f64::INFINITY;
    for k in 1..=36 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        t0 *= -odd * odd / (8.0 * kf) / z;
        t1 *= (4.0 - odd * odd) / (8.0 * kf) / z;
        let n0 = t0.norm();
        if n0 > best0 {
            break; // divergent tail reached
        }
        best0 = n0;
        s0 += t0;
        s1 += t1;
        if n0 < 1e-17 * s0.norm() {
            break;
        }
    }
    (pref * s0, pref * s1)
}

fn i0_asym(z: Complex64) -> Complex64 {
    let pref = 1.0 / (2.0 * std::f64::consts::PI * z).sqrt();
    let mut t = Complex64::new(1.0, 0.0);
    let mut grow = t;
    let mut decay = t;
    for k in 1..=36 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        t *= odd * odd / (8.0 * kf) / z;
        grow += t;
        decay += if k % 2 == 0 { t } else { -t };
        if t.norm() < 1e-17 * grow.norm() {
            break;
        }
    }
    let sign = if z.im >= 0.0 { 1.0 } else { -1.0 };
    let reflected = Complex64::new(0.0, sign) * (-z).exp() * decay;
    pref * (z.exp() * grow + reflected)
}

// --- Miller downward recurrence for I_n ---------------------------------

fn i_seq_miller(z: Complex64, nmax: usize) -> Vec<Complex64> {
    let start = nmax + (2.0 * z.norm()) as usize + 44;
    let mut p_up = Complex64::new(0.0, 0.0);
    // seed scale 1.0: keeps |norm| far from the underflow threshold of the
    // final complex division
    let mut p = Complex64::new(1.0, 0.0);
    let mut seq = vec![Complex64::new(0.0, 0.0); nmax + 1];
    // normalization e^z = I0 + 2 sum_{k>=1} I_k
    let mut norm = Complex64::new(0.0, 0.0);
    for k in (0..=start).rev() {
        let p_down = p_up + 2.0 * (k + 1) as f64 / z * p;
        p_up = p;
        p = p_down;
        if k <= nmax {
            seq[k] = p;
        }
        norm += if k == 0 { p } else { 2.0 * p };
        let pn = p.norm();
        if pn > 1e250 {
            let scale = 1e-250;
            p *= scale;
            p_up *= scale;
            norm *= scale;
            for v in seq.iter_mut() {
                *v *= scale;
            }
        }
    }
    let factor = z.exp() / norm;
    for v in seq.iter_mut() {
        *v *= factor;
    }
    seq
}
