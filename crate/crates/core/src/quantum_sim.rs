//! Dense state-vector and density-matrix kernel for tiny registers.
//!
//! Registers hold at most two qubits plus one 4-level ancilla (16 amplitudes).
//! Subsystem 0 is the most significant digit of the amplitude index, so for
//! two qubits the basis order is `|00>, |01>, |10>, |11>`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{contract, Result};

pub type ComplexScalar = Complex64;

/// Tolerance on the squared norm of a state after any operation.
pub const NORM_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const EIGEN_FLOOR: f64 = -1e-10;
const JACOBI_OFF_TOL: f64 = 1e-24;
const JACOBI_MAX_SWEEPS: usize = 64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A normalized pure state over an ordered list of subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amps: Vec<Complex64>,
}

impl PureState {
    /// Builds a state, checking dimensions and finiteness. Amplitudes are
    /// accepted if their squared norm is within 1e-9 of one and are then
    /// renormalized exactly.
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d != 2 && d != 4) {
            return Err(contract(format!("subsystem dimensions must be 2 or 4, got {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if amps.len() != len {
            return Err(contract(format!(
                "expected {len} amplitudes for dims {dims:?}, got {}",
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(contract("non-finite amplitude"));
        }
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > 1e-9 {
            return Err(contract(format!("state norm^2 is {norm_sqr}, expected 1")));
        }
        let scale = norm_sqr.sqrt().recip();
        Ok(Self {
            dims,
            amps: amps.into_iter().map(|a| a * scale).collect(),
        })
    }

    /// Computational basis state `|index>`.
    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let len: usize = dims.iter().product();
        if index >= len {
            return Err(contract(format!("basis index {index} out of range {len}")));
        }
        let mut amps = vec![Complex64::default(); len];
        amps[index] = c(1.0, 0.0);
        Self::new(dims, amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let amps = self
            .amps
            .iter()
            .flat_map(|x| other.amps.iter().map(move |y| x * y))
            .collect();
        PureState { dims, amps }
    }

    /// Squared moduli of all amplitudes, in basis order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Entrywise comparison of amplitudes (no global-phase freedom).
    pub fn approx_eq(&self, other: &PureState, tol: f64) -> bool {
        self.dims == other.dims
            && self
                .amps
                .iter()
                .zip(&other.amps)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    fn check_index(&self, subsystem: usize) -> Result<()> {
        if subsystem >= self.dims.len() {
            return Err(contract(format!(
                "subsystem {subsystem} does not exist in a {}-part register",
                self.dims.len()
            )));
        }
        Ok(())
    }

    /// Number of basis states per step of the given subsystem's digit.
    fn stride(&self, subsystem: usize) -> usize {
        self.dims[subsystem + 1..].iter().product()
    }

    /// Digit of `subsystem` in the basis index `index`.
    fn digit(&self, index: usize, subsystem: usize) -> usize {
        (index / self.stride(subsystem)) % self.dims[subsystem]
    }

    /// Applies `I ⊗ … ⊗ gate ⊗ … ⊗ I` with the gate acting on `subsystem`.
    pub fn apply(&self, gate: &UnitaryGate, subsystem: usize) -> Result<PureState> {
        self.check_index(subsystem)?;
        let d = self.dims[subsystem];
        if gate.dim != d {
            return Err(contract(format!(
                "gate of dimension {} applied to subsystem of dimension {d}",
                gate.dim
            )));
        }
        let stride = self.stride(subsystem);
        let block = stride * d;
        let mut out = vec![Complex64::default(); self.amps.len()];
        for base in (0..self.amps.len()).step_by(block) {
            for inner in 0..stride {
                for row in 0..d {
                    let mut acc = Complex64::default();
                    for col in 0..d {
                        acc += gate.entries[row * d + col] * self.amps[base + col * stride + inner];
                    }
                    out[base + row * stride + inner] = acc;
                }
            }
        }
        Ok(PureState {
            dims: self.dims.clone(),
            amps: out,
        })
    }

    /// Outcome probabilities of a computational-basis measurement of one
    /// subsystem.
    pub fn subsystem_probabilities(&self, subsystem: usize) -> Result<Vec<f64>> {
        self.check_index(subsystem)?;
        let mut probs = vec![0.0; self.dims[subsystem]];
        for (i, a) in self.amps.iter().enumerate() {
            probs[self.digit(i, subsystem)] += a.norm_sqr();
        }
        Ok(probs)
    }

    /// Projects `subsystem` onto `outcome`. Returns the outcome probability and
    /// the renormalized post-measurement state, or `None` when the outcome has
    /// probability below [`NORM_TOL`].
    pub fn project(&self, subsystem: usize, outcome: usize) -> Result<(f64, Option<PureState>)> {
        self.check_index(subsystem)?;
        if outcome >= self.dims[subsystem] {
            return Err(contract(format!("outcome {outcome} out of range")));
        }
        let mut amps = self.amps.clone();
        for (i, a) in amps.iter_mut().enumerate() {
            if self.digit(i, subsystem) != outcome {
                *a = Complex64::default();
            }
        }
        let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if p < NORM_TOL {
            return Ok((p, None));
        }
        let scale = p.sqrt().recip();
        amps.iter_mut().for_each(|a| *a *= scale);
        Ok((
            p,
            Some(PureState {
                dims: self.dims.clone(),
                amps,
            }),
        ))
    }

    /// Unnormalized reduced operator of one subsystem, tracing out the rest.
    /// For a normalized state this is the reduced density matrix.
    pub fn reduced_entries(&self, keep: usize) -> Result<Vec<Complex64>> {
        self.check_index(keep)?;
        let d = self.dims[keep];
        let stride = self.stride(keep);
        let block = stride * d;
        let mut rho = vec![Complex64::default(); d * d];
        for base in (0..self.amps.len()).step_by(block) {
            for inner in 0..stride {
                for r in 0..d {
                    let ar = self.amps[base + r * stride + inner];
                    for col in 0..d {
                        let ac = self.amps[base + col * stride + inner];
                        rho[r * d + col] += ar * ac.conj();
                    }
                }
            }
        }
        Ok(rho)
    }

    pub fn reduced_density_matrix(&self, keep: usize) -> Result<DensityMatrix> {
        let d = self.dims.get(keep).copied().unwrap_or(0);
        DensityMatrix::new(d, self.reduced_entries(keep)?)
    }
}

/// `|Φ+> = (|00> + |11>)/√2`.
pub fn bell_phi_plus() -> PureState {
    let h = c(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::default();
    PureState {
        dims: vec![2, 2],
        amps: vec![h, z, z, h],
    }
}

pub fn apply_to_subsystem(state: &PureState, gate: &UnitaryGate, subsystem: usize) -> Result<PureState> {
    state.apply(gate, subsystem)
}

/// Measures one subsystem in the computational basis and collapses the state.
pub fn measure_z<R: Rng + ?Sized>(
    state: &PureState,
    subsystem: usize,
    rng: &mut R,
) -> Result<(usize, PureState)> {
    let probs = state.subsystem_probabilities(subsystem)?;
    let total: f64 = probs.iter().sum();
    if total < NORM_TOL {
        return Err(contract("measurement of a degenerate (zero-norm) state"));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut outcome = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc && *p > 0.0 {
            outcome = k;
            break;
        }
    }
    // Guard against landing on a zero-probability tail through rounding.
    if probs[outcome] < NORM_TOL {
        outcome = probs
            .iter()
            .enumerate()
            .rev()
            .find(|(_, p)| **p >= NORM_TOL)
            .map(|(k, _)| k)
            .unwrap_or(outcome);
    }
    let (_, post) = state.project(subsystem, outcome)?;
    let post = post.ok_or_else(|| contract("collapse onto a zero-probability outcome"))?;
    Ok((outcome, post))
}

/// Square unitary matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate {
    dim: usize,
    entries: Vec<Complex64>,
}

impl UnitaryGate {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(contract(format!("gate needs {} entries", dim * dim)));
        }
        let gate = Self { dim, entries };
        let dev = gate.unitarity_defect();
        if dev > UNITARY_TOL {
            return Err(contract(format!("gate is not unitary (max |UU†-I| = {dev:e})")));
        }
        Ok(gate)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// Largest entrywise deviation of `U U†` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex64::default();
                for k in 0..d {
                    acc += self.entries[i * d + k] * self.entries[j * d + k].conj();
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - c(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn matmul(&self, other: &UnitaryGate) -> Result<UnitaryGate> {
        if self.dim != other.dim {
            return Err(contract("gate dimension mismatch"));
        }
        let d = self.dim;
        let mut entries = vec![Complex64::default(); d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = (0..d).map(|k| self.entry(i, k) * other.entry(k, j)).sum();
            }
        }
        Ok(UnitaryGate { dim: d, entries })
    }
}

pub fn hadamard() -> UnitaryGate {
    let h = c(FRAC_1_SQRT_2, 0.0);
    UnitaryGate {
        dim: 2,
        entries: vec![h, h, h, -h],
    }
}

pub fn identity(dim: usize) -> UnitaryGate {
    let mut entries = vec![Complex64::default(); dim * dim];
    for i in 0..dim {
        entries[i * dim + i] = c(1.0, 0.0);
    }
    UnitaryGate { dim, entries }
}

/// Bit flip.
pub fn pauli_x() -> UnitaryGate {
    let z = Complex64::default();
    let o = c(1.0, 0.0);
    UnitaryGate {
        dim: 2,
        entries: vec![z, o, o, z],
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(contract(format!("density matrix needs {} entries", dim * dim)));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(contract("non-finite density matrix entry"));
        }
        let herm = hermitian_defect(dim, &entries);
        if herm > HERMITIAN_TOL {
            return Err(contract(format!("matrix is not Hermitian (defect {herm:e})")));
        }
        let trace: f64 = (0..dim).map(|i| entries[i * dim + i].re).sum();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(contract(format!("density matrix trace is {trace}")));
        }
        let rho = Self { dim, entries };
        if let Some(min) = rho.eigenvalues().first() {
            if *min < EIGEN_FLOOR {
                return Err(contract(format!("density matrix has eigenvalue {min}")));
            }
        }
        Ok(rho)
    }

    /// `|ψ><ψ|` for a normalized vector.
    pub fn from_pure(amps: &[Complex64]) -> Result<Self> {
        let d = amps.len();
        let mut entries = vec![Complex64::default(); d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = amps[i] * amps[j].conj();
            }
        }
        Self::new(d, entries)
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let d = probs.len();
        let mut entries = vec![Complex64::default(); d * d];
        for (i, p) in probs.iter().enumerate() {
            entries[i * d + i] = c(*p, 0.0);
        }
        Self::new(d, entries)
    }

    /// Convex combination `Σ w_i ρ_i`.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|(_, r)| r.dim)
            .ok_or_else(|| contract("empty mixture"))?;
        let mut entries = vec![Complex64::default(); dim * dim];
        for (w, rho) in parts {
            if rho.dim != dim {
                return Err(contract("mixture of matrices with different dimensions"));
            }
            for (acc, z) in entries.iter_mut().zip(&rho.entries) {
                *acc += z * *w;
            }
        }
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.dim, &self.entries)
    }
}

fn hermitian_defect(dim: usize, entries: &[Complex64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        for j in i..dim {
            worst = worst.max((entries[i * dim + j] - entries[j * dim + i].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (ascending) of a Hermitian matrix.
///
/// `H = A + iB` is embedded as the real symmetric `[[A, -B], [B, A]]`, whose
/// spectrum is that of `H` with every eigenvalue doubled; cyclic Jacobi
/// rotations then diagonalize the embedding.
pub fn hermitian_eigenvalues(dim: usize, entries: &[Complex64]) -> Vec<f64> {
    let n = 2 * dim;
    let mut m = vec![0.0; n * n];
    for i in 0..dim {
        for j in 0..dim {
            // Symmetrize so that rounding asymmetry cannot stall the sweeps.
            let z = (entries[i * dim + j] + entries[j * dim + i].conj()) * 0.5;
            m[i * n + j] = z.re;
            m[(i + dim) * n + (j + dim)] = z.re;
            m[i * n + (j + dim)] = -z.im;
            m[(i + dim) * n + j] = z.im;
        }
    }
    let mut evals = jacobi_symmetric_eigenvalues(n, &mut m);
    evals.sort_by(|a, b| a.total_cmp(b));
    evals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

/// Cyclic Jacobi on a real symmetric `n×n` matrix (destroyed in place).
fn jacobi_symmetric_eigenvalues(n: usize, a: &mut [f64]) -> Vec<f64> {
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[p * n + q] * a[p * n + q];
            }
        }
        s
    };
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(a) < JACOBI_OFF_TOL {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = (t * t + 1.0).sqrt().recip();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cs * akp - sn * akq;
                    a[k * n + q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cs * apk - sn * aqk;
                    a[q * n + k] = sn * apk + cs * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Von Neumann entropy in bits. Eigenvalues are clipped to `[0, 1]` first.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()
        .into_iter()
        .map(|l| plogp(l.clamp(0.0, 1.0)))
        .sum()
}

/// `h(q) = -q log2 q - (1-q) log2 (1-q)`.
pub fn binary_entropy(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(contract(format!("probability {q} outside [0, 1]")));
    }
    Ok(plogp(q) + plogp(1.0 - q))
}

/// Shannon entropy in bits of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(contract(format!("probability {bad} outside [0, 1]")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(contract(format!("probabilities sum to {total}")));
    }
    Ok(p.iter().map(|&x| plogp(x)).sum())
}
