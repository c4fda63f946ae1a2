//! Asymptotic secret-key-rate lower bound under collective attacks.
//!
//! After the attack the joint state is `Σ √λ_i |Φ_i>|v_i>` over the four Bell
//! states. Matching an error rate `Q` in both measurement modes forces
//! `λ = (1 + λ4 - 2Q, Q - λ4, Q - λ4, λ4)` with `λ4 ∈ [0, Q]`, and the rate is
//! the infimum over `λ4` of
//!
//! ```text
//! S(E|U) - S(E) - h(Q) + 1,   S(E|U) = ½S(σ⁰) + ½S(σ¹),   S(E) = S(½σ⁰ + ½σ¹)
//! ```
//!
//! where `σ^a` is the probe state conditioned on Alice's bit `a`.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::quantum_sim::{binary_entropy, von_neumann_entropy, DensityMatrix};

pub const DEFAULT_COARSE_STEPS: usize = 201;
pub const DEFAULT_REFINE_TOL: f64 = 1e-7;
/// Upper end of the bracket searched for the zero crossing.
pub const THRESHOLD_BRACKET_MAX: f64 = 0.25;
pub const CSV_HEADER: &str = "qber,rate,lambda4_star";

const LAMBDA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaVector {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl LambdaVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.lambda1, self.lambda2, self.lambda3, self.lambda4]
    }

    /// Exchanges the weights of the two error-carrying Bell components that
    /// distinguish the measurement modes.
    pub fn swap_modes(&self) -> LambdaVector {
        LambdaVector {
            lambda2: self.lambda3,
            lambda3: self.lambda2,
            ..*self
        }
    }
}

pub fn lambda_from(q: f64, lambda4: f64) -> Result<LambdaVector> {
    if !(0.0..=0.5).contains(&q) {
        return Err(contract(format!("QBER {q} outside [0, 0.5]")));
    }
    if !(0.0..=q).contains(&lambda4) {
        return Err(contract(format!("lambda4 = {lambda4} outside [0, {q}]")));
    }
    let raw = [1.0 + lambda4 - 2.0 * q, q - lambda4, q - lambda4, lambda4];
    if raw.iter().any(|&l| l < -LAMBDA_TOL) {
        return Err(contract(format!("negative weight in {raw:?}")));
    }
    let [lambda1, lambda2, lambda3, lambda4] = raw.map(|l| l.max(0.0));
    Ok(LambdaVector {
        lambda1,
        lambda2,
        lambda3,
        lambda4,
    })
}

/// Probe state conditioned on Alice's bit: two 2×2 blocks with off-diagonal
/// `±√(λ1λ2)` and `±√(λ3λ4)`, plus for `a = 0` and minus for `a = 1`.
pub fn sigma_tp(a: u8, lam: &LambdaVector) -> Result<DensityMatrix> {
    if a > 1 {
        return Err(contract(format!("bit value {a}")));
    }
    let sign = if a == 0 { 1.0 } else { -1.0 };
    let [l1, l2, l3, l4] = lam.as_array();
    let r = |x: f64| Complex64::new(x, 0.0);
    let z = Complex64::default();
    let o12 = r(sign * (l1 * l2).sqrt());
    let o34 = r(sign * (l3 * l4).sqrt());
    #[rustfmt::skip]
    let entries = vec![
        r(l1), o12,   z,     z,
        o12,   r(l2), z,     z,
        z,     z,     r(l3), o34,
        z,     z,     o34,   r(l4),
    ];
    DensityMatrix::new(4, entries)
}

/// Rate expression for an explicit weight vector at error rate `q`.
pub fn rate_from_lambda(q: f64, lam: &LambdaVector) -> Result<f64> {
    let h_q = binary_entropy(q)?;
    if q == 0.0 {
        return Ok(1.0);
    }
    if lam.lambda2 == 0.0 && lam.lambda3 == 0.0 {
        // Both conditional states equal diag(λ1, 0, 0, λ4): no leakage term.
        return Ok(1.0 - h_q);
    }
    let s0 = sigma_tp(0, lam)?;
    let s1 = sigma_tp(1, lam)?;
    let conditional = 0.5 * von_neumann_entropy(&s0) + 0.5 * von_neumann_entropy(&s1);
    let average = DensityMatrix::mixture(&[(0.5, &s0), (0.5, &s1)])?;
    Ok((conditional - von_neumann_entropy(&average)) - (h_q - 1.0))
}

pub fn rate_given_lambda(q: f64, lambda4: f64) -> Result<f64> {
    rate_from_lambda(q, &lambda_from(q, lambda4)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRatePoint {
    pub q: f64,
    /// Bits per sifted bit; negative when no key can be distilled.
    pub rate: f64,
    pub lambda4_star: f64,
}

/// Infimum of the rate over `λ4 ∈ [0, q]`: a uniform scan with `coarse_steps`
/// points followed by golden-section refinement around the best point.
pub fn minimize_rate(q: f64, coarse_steps: usize, refine_tol: f64) -> Result<KeyRatePoint> {
    if !(0.0..=0.5).contains(&q) {
        return Err(contract(format!("QBER {q} outside [0, 0.5]")));
    }
    if q == 0.0 {
        return Ok(KeyRatePoint {
            q,
            rate: rate_given_lambda(0.0, 0.0)?,
            lambda4_star: 0.0,
        });
    }
    let steps = coarse_steps.max(3);
    let spacing = q / (steps - 1) as f64;
    let objective = |l4: f64| rate_given_lambda(q, l4.clamp(0.0, q));

    let mut best = (0usize, f64::INFINITY);
    for k in 0..steps {
        let r = objective(k as f64 * spacing)?;
        if r < best.1 {
            best = (k, r);
        }
    }
    let lo = best.0.saturating_sub(1) as f64 * spacing;
    let hi = ((best.0 + 1).min(steps - 1) as f64 * spacing).min(q);
    let (l4, r) = golden_section(lo, hi, refine_tol, objective)?;

    let (lambda4_star, rate) = if r <= best.1 {
        (l4, r)
    } else {
        (best.0 as f64 * spacing, best.1)
    };
    Ok(KeyRatePoint {
        q,
        rate,
        lambda4_star: lambda4_star.clamp(0.0, q),
    })
}

fn golden_section<F>(mut a: f64, mut b: f64, tol: f64, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

fn default_min_rate(q: f64) -> Result<f64> {
    Ok(minimize_rate(q, DEFAULT_COARSE_STEPS, DEFAULT_REFINE_TOL)?.rate)
}

/// Largest QBER with a positive rate, by bisection on `[0, 0.25]` until the
/// bracket is narrower than `tol`.
pub fn find_threshold(tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(contract(format!("tolerance {tol} must be positive")));
    }
    let (mut lo, mut hi) = (0.0, THRESHOLD_BRACKET_MAX);
    let (f_lo, f_hi) = (default_min_rate(lo)?, default_min_rate(hi)?);
    if f_lo.signum() == f_hi.signum() {
        return Err(contract(format!(
            "no sign change of the key rate on [{lo}, {hi}] ({f_lo}, {f_hi})"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if default_min_rate(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Key-rate points on `q_min, q_min + step, …` up to `q_max`. Rates are
/// clamped at -1 for display.
pub fn export_curve(q_min: f64, q_max: f64, step: f64) -> Result<Vec<KeyRatePoint>> {
    if !(0.0 <= q_min && q_min < q_max && q_max <= 0.5) {
        return Err(contract(format!("invalid QBER range [{q_min}, {q_max}]")));
    }
    if !(step > 0.0) {
        return Err(contract(format!("step {step} must be positive")));
    }
    let count = ((q_max - q_min) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let q = (q_min + k as f64 * step).min(q_max);
            let mut p = minimize_rate(q, DEFAULT_COARSE_STEPS, DEFAULT_REFINE_TOL)?;
            p.rate = p.rate.max(-1.0);
            Ok(p)
        })
        .collect()
}

/// Formats `x` with nine significant digits in fixed notation.
pub fn format_significant(x: f64) -> String {
    const DIGITS: i32 = 9;
    let decimals = if x == 0.0 {
        DIGITS - 1
    } else {
        (DIGITS - 1 - x.abs().log10().floor() as i32).max(0)
    };
    format!("{:.*}", decimals as usize, x)
}

pub fn write_curve_csv<W: Write>(points: &[KeyRatePoint], mut out: W) -> io::Result<()> {
    out.write_all(CSV_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for p in points {
        writeln!(
            out,
            "{},{},{}",
            format_significant(p.q),
            format_significant(p.rate),
            format_significant(p.lambda4_star)
        )?;
    }
    Ok(())
}
