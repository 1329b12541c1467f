//! Density matrices, Lindblad and Kraus channels, measurement, and
//! nuclear-bath dephasing rates.
//!
//! Master-equation convention (rates in 1/ns, H in GHz):
//! `ρ̇ = −i 2π [H, ρ] + Σ_k γ_k (2 x_k ρ x_k† − x_k†x_k ρ − ρ x_k†x_k)`.
//! With `x = s_z` at rate 1/T₂ a spin-1/2 coherence decays as e^{−t/T₂};
//! with `x = s₋` at rate 1/(2T₁) the excited population decays as
//! e^{−t/T₁} and the coherence at half that rate. The computational
//! ground state is |1⟩ ≡ |↓⟩ (index 1); |0⟩ ≡ |↑⟩ is the excited state.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::constants::DIPOLAR_GHZ_A3;
use crate::operator::Operator;
use crate::spin::{embed, spin_operators, SpinRegister};
use crate::{Error, Result};

/// Validation tolerance for trace, hermiticity, and positivity of states.
const STATE_TOL: f64 = 1e-9;

/// A unit-trace positive-semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Wrap and validate: Hermitian, trace 1, eigenvalues ≥ −1e−9.
    pub fn new(op: Operator) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian { deviation: op.hermiticity_deviation() });
        }
        let tr = op.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix must have unit trace, got {tr}"
            )));
        }
        let (vals, _) = op.eigendecompose()?;
        if vals[0] < -STATE_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix must be positive semidefinite; minimum eigenvalue {}",
                vals[0]
            )));
        }
        Ok(Self { op })
    }

    /// Internal constructor for evolution outputs whose properties are
    /// guaranteed by the generating map (up to solver tolerance).
    fn from_matrix_unchecked(mat: Array2<C64>) -> Self {
        Self { op: Operator::new(mat).expect("square matrix") }
    }

    /// |ψ⟩⟨ψ| from a normalized state vector.
    pub fn from_pure(psi: &Array1<C64>) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidArgument(format!(
                "state vector must be normalized, got |ψ|² = {norm}"
            )));
        }
        let n = psi.len();
        let mut mat = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                mat[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Ok(Self::from_matrix_unchecked(mat))
    }

    /// Maximally mixed state I/d.
    pub fn maximally_mixed(dim: usize) -> Self {
        let mat = Array2::<C64>::eye(dim).mapv(|c| c / dim as f64);
        Self::from_matrix_unchecked(mat)
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &Array2<C64> {
        self.op.matrix()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.op.get(i, j)
    }

    /// Re Tr(ρ A) — the expectation value of a Hermitian observable.
    pub fn expectation(&self, a: &Operator) -> Result<f64> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "observable dim {} vs state dim {}",
                a.dim(),
                self.dim()
            )));
        }
        let mut tr = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                tr += self.get(i, j) * a.get(j, i);
            }
        }
        Ok(tr.re)
    }

    /// Tr(ρ²) — 1 for pure states, 1/d for maximally mixed.
    pub fn purity(&self) -> f64 {
        let mut p = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                p += (self.get(i, j) * self.get(j, i)).re;
            }
        }
        p
    }

    /// U ρ U†.
    pub fn apply_unitary(&self, u: &Operator) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "unitary dim {} vs state dim {}",
                u.dim(),
                self.dim()
            )));
        }
        let m = u.matrix().dot(self.matrix()).dot(&u.dagger().into_matrix());
        Ok(Self::from_matrix_unchecked(m))
    }

    /// ⟨ψ|ρ|ψ⟩ — overlap with a pure state.
    pub fn fidelity_with_pure(&self, psi: &Array1<C64>) -> Result<f64> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state vector len {} vs density dim {}",
                psi.len(),
                self.dim()
            )));
        }
        let mut f = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                f += psi[i].conj() * self.get(i, j) * psi[j];
            }
        }
        Ok(f.re)
    }

    /// Check the state invariants; for use after long evolutions.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.op.clone()).map(|_| ())
    }
}

/// Relaxation and dephasing times of one site, ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseModel {
    /// Population relaxation time T₁ (ns); `None` disables relaxation.
    pub t1: Option<f64>,
    /// Pure-dephasing time T₂ (ns); `None` disables dephasing.
    pub t2: Option<f64>,
}

impl NoiseModel {
    /// Physicality warnings (the total coherence time cannot exceed 2T₁,
    /// so a pure-dephasing T₂ > 2T₁ is suspect).
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if let (Some(t1), Some(t2)) = (self.t1, self.t2) {
            if t2 > 2.0 * t1 {
                w.push(format!(
                    "T₂ = {t2} ns exceeds 2T₁ = {} ns; no physical single-spin channel \
                     produces this combination",
                    2.0 * t1
                ));
            }
        }
        w
    }

    /// Collapse operators (x, rate 1/ns) for one site of spin s embedded in
    /// `reg`: s_z at 1/T₂ and s₋ at 1/(2T₁).
    pub fn collapse_ops(&self, site: usize, reg: &SpinRegister) -> Result<Vec<(Operator, f64)>> {
        let s = reg
            .sites()
            .get(site)
            .ok_or(Error::SiteOutOfRange { index: site, len: reg.len() })?
            .s;
        let ops = spin_operators(s)?;
        let mut out = Vec::new();
        if let Some(t2) = self.t2 {
            if !(t2 > 0.0) {
                return Err(Error::InvalidArgument(format!("T₂ must be positive, got {t2}")));
            }
            out.push((embed(&ops.sz, site, reg)?, 1.0 / t2));
        }
        if let Some(t1) = self.t1 {
            if !(t1 > 0.0) {
                return Err(Error::InvalidArgument(format!("T₁ must be positive, got {t1}")));
            }
            out.push((embed(&ops.sminus, site, reg)?, 1.0 / (2.0 * t1)));
        }
        Ok(out)
    }
}

fn lindblad_rhs(
    h: &Array2<C64>,
    collapse: &[(Array2<C64>, Array2<C64>, f64)], // (x, x†x, rate)
    rho: &Array2<C64>,
) -> Array2<C64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let comm = h.dot(rho) - rho.dot(h);
    let mut out = comm.mapv(|c| c * C64::new(0.0, -two_pi));
    for (x, xdx, rate) in collapse {
        let sandwich = x.dot(rho).dot(&x.t().mapv(|c| c.conj()));
        let anti = xdx.dot(rho) + rho.dot(xdx);
        out = out + (sandwich.mapv(|c| c * 2.0) - anti).mapv(|c| c * *rate);
    }
    out
}

fn rk4_step(
    h: &Array2<C64>,
    collapse: &[(Array2<C64>, Array2<C64>, f64)],
    rho: &Array2<C64>,
    dt: f64,
) -> Array2<C64> {
    let k1 = lindblad_rhs(h, collapse, rho);
    let k2 = lindblad_rhs(h, collapse, &(rho + &k1.mapv(|c| c * (0.5 * dt))));
    let k3 = lindblad_rhs(h, collapse, &(rho + &k2.mapv(|c| c * (0.5 * dt))));
    let k4 = lindblad_rhs(h, collapse, &(rho + &k3.mapv(|c| c * dt)));
    rho + &(k1 + k2.mapv(|c| c * 2.0) + k3.mapv(|c| c * 2.0) + k4).mapv(|c| c * (dt / 6.0))
}

/// Evolve ρ under the master equation for time `t` (ns) with collapse
/// operators and rates (1/ns). Fixed-step RK4; `dt` is chosen automatically
/// when `None` by halving a probe step until the one-step self-consistency
/// error is below 1e−11, which keeps accumulated error near 1e−8 on
/// relaxation-scale problems.
pub fn lindblad_evolve(
    h: &Operator,
    collapse_ops: &[(Operator, f64)],
    rho0: &DensityMatrix,
    t: f64,
    dt: Option<f64>,
) -> Result<DensityMatrix> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("evolution time must be ≥ 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let dim = rho0.dim();
    if h.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian dim {} vs state dim {dim}",
            h.dim()
        )));
    }
    if !h.is_hermitian() {
        return Err(Error::NotHermitian { deviation: h.hermiticity_deviation() });
    }
    for (x, rate) in collapse_ops {
        if x.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "collapse operator dim {} vs state dim {dim}",
                x.dim()
            )));
        }
        if *rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "collapse rate must be ≥ 0, got {rate}"
            )));
        }
    }

    let collapse: Vec<(Array2<C64>, Array2<C64>, f64)> = collapse_ops
        .iter()
        .map(|(x, rate)| {
            let xm = x.matrix().clone();
            let xdx = x.dagger().mul(x).into_matrix();
            (xm, xdx, *rate)
        })
        .collect();
    let hm = h.matrix().clone();

    let step = match dt {
        Some(d) => {
            if !(d > 0.0) {
                return Err(Error::InvalidArgument(format!("dt must be positive, got {d}")));
            }
            d
        }
        None => {
            // Probe: halve until a full step agrees with two half steps.
            let mut d = t / 200.0;
            let rho = rho0.matrix();
            loop {
                let full = rk4_step(&hm, &collapse, rho, d);
                let half = rk4_step(&hm, &collapse, &rk4_step(&hm, &collapse, rho, 0.5 * d), 0.5 * d);
                let err = (&full - &half).iter().map(|c| c.norm()).fold(0.0, f64::max);
                if err < 1e-11 || d < t / 2e6 {
                    break d;
                }
                d *= 0.5;
            }
        }
    };

    let n = (t / step).ceil() as usize;
    let dt_eff = t / n as f64;
    let mut rho = rho0.matrix().clone();
    for _ in 0..n {
        rho = rk4_step(&hm, &collapse, &rho, dt_eff);
    }
    Ok(DensityMatrix::from_matrix_unchecked(rho))
}

/// Apply a Kraus channel ρ → Σ_k E_k ρ E_k†. The set must be complete:
/// Σ E†E = I to 1e−9.
pub fn kraus_apply(rho: &DensityMatrix, kraus: &[Operator]) -> Result<DensityMatrix> {
    if kraus.is_empty() {
        return Err(Error::InvalidArgument("empty Kraus set".into()));
    }
    let dim = rho.dim();
    let mut completeness = Array2::<C64>::zeros((dim, dim));
    for e in kraus {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator dim {} vs state dim {dim}",
                e.dim()
            )));
        }
        completeness = completeness + e.dagger().mul(e).into_matrix();
    }
    let dev = (&completeness - &Array2::<C64>::eye(dim))
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "Kraus set is not trace-preserving: max|ΣE†E − I| = {dev:.2e}"
        )));
    }
    let mut out = Array2::<C64>::zeros((dim, dim));
    for e in kraus {
        let em = e.matrix();
        out = out + em.dot(rho.matrix()).dot(&em.t().mapv(|c| c.conj()));
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Kraus pair for spin-1/2 pure dephasing over time t:
/// E₀ = √((1+p)/2) I, E₁ = √((1−p)/2) σ_z with p = e^{−t/T₂}; equivalent
/// to the Lindblad channel x = s_z at rate 1/T₂.
pub fn dephasing_kraus(t: f64, t2: f64) -> Result<Vec<Operator>> {
    if !(t2 > 0.0) || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "dephasing needs T₂ > 0 and t ≥ 0, got T₂ = {t2}, t = {t}"
        )));
    }
    let p = (-t / t2).exp();
    let sigma_z = spin_operators(0.5)?.sz.scale(C64::new(2.0, 0.0));
    Ok(vec![
        Operator::identity(2).scale(C64::new(((1.0 + p) / 2.0).sqrt(), 0.0)),
        sigma_z.scale(C64::new(((1.0 - p) / 2.0).sqrt(), 0.0)),
    ])
}

/// Kraus pair for spin-1/2 amplitude damping of the excited |0⟩ ≡ |↑⟩ into
/// the ground |1⟩ ≡ |↓⟩ over time t:
/// E₀ = |1⟩⟨1| + √(e^{−t/T₁}) |0⟩⟨0|, E₁ = √(1 − e^{−t/T₁}) |1⟩⟨0|;
/// equivalent to the Lindblad channel x = s₋ at rate 1/(2T₁).
pub fn relaxation_kraus(t: f64, t1: f64) -> Result<Vec<Operator>> {
    if !(t1 > 0.0) || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "relaxation needs T₁ > 0 and t ≥ 0, got T₁ = {t1}, t = {t}"
        )));
    }
    let p = (-t / t1).exp();
    let mut e0 = Array2::<C64>::zeros((2, 2));
    e0[(1, 1)] = C64::new(1.0, 0.0);
    e0[(0, 0)] = C64::new(p.sqrt(), 0.0);
    let mut e1 = Array2::<C64>::zeros((2, 2));
    e1[(1, 0)] = C64::new((1.0 - p).sqrt(), 0.0);
    Ok(vec![Operator::new(e0)?, Operator::new(e1)?])
}

/// Exact pure dephasing of a single spin-s qudit: every coherence decays as
/// ρ_mm′ → ρ_mm′ e^{−(m−m′)² t/T₂}, the closed-form solution of the
/// Lindblad channel x = s_z at rate 1/T₂ (for s = 1/2 this is e^{−t/T₂}).
pub fn qudit_dephasing(rho: &DensityMatrix, s: f64, t: f64, t2: f64) -> Result<DensityMatrix> {
    let dim = (2.0 * s + 1.0).round() as usize;
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} does not match spin s = {s} (dim {dim})",
            rho.dim()
        )));
    }
    if !(t2 > 0.0) || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "dephasing needs T₂ > 0 and t ≥ 0, got T₂ = {t2}, t = {t}"
        )));
    }
    let mut out = rho.matrix().clone();
    for i in 0..dim {
        for j in 0..dim {
            // m = s − index (descending basis); m_i − m_j = j − i... with sign
            let dm = (j as f64) - (i as f64);
            out[(i, j)] *= (-(dm * dm) * t / t2).exp();
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Trace out all subsystems not in `keep` (indices into `dims`, ascending).
/// `dims` are the per-factor dimensions in tensor order (site 0 leftmost).
pub fn partial_trace(rho: &Operator, dims: &[usize], keep: &[usize]) -> Result<Operator> {
    let total: usize = dims.iter().product();
    if rho.dim() != total {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs factor dims product {total}",
            rho.dim()
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("keep indices must be strictly ascending".into()));
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(format!(
            "keep index out of range for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let keep_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let tr_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // strides of each factor in the flat index
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let unflatten = |mut idx: usize, subset: &[usize]| -> usize {
        // flat index over the subset's factors, in subset order
        let mut flat = 0usize;
        // idx enumerates subset levels in row-major subset order
        for (pos, &k) in subset.iter().enumerate() {
            let rest: usize = subset[pos + 1..].iter().map(|&x| dims[x]).product();
            let level = idx / rest;
            idx %= rest;
            flat += level * strides[k];
        }
        flat
    };

    let mut out = Array2::<C64>::zeros((keep_dim, keep_dim));
    for i in 0..keep_dim {
        let base_i = unflatten(i, keep);
        for j in 0..keep_dim {
            let base_j = unflatten(j, keep);
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..tr_dim {
                let off = unflatten(k, &traced);
                acc += rho.get(base_i + off, base_j + off);
            }
            out[(i, j)] = acc;
        }
    }
    Operator::new(out)
}

/// Reduced state of a subset of register sites.
pub fn reduced_state(
    rho: &DensityMatrix,
    reg: &SpinRegister,
    keep: &[usize],
) -> Result<DensityMatrix> {
    let dims: Vec<usize> = (0..reg.len()).map(|k| reg.site_dim(k)).collect();
    let red = partial_trace(rho.operator(), &dims, keep)?;
    DensityMatrix::new(red)
}

/// One branch of a projective z-basis measurement on a site.
#[derive(Debug, Clone)]
pub struct MeasurementBranch {
    /// Measured level of the site (0 = highest m).
    pub level: usize,
    pub probability: f64,
    /// Collapsed normalized post-measurement state.
    pub state: DensityMatrix,
}

fn site_projector(level: usize, site: usize, reg: &SpinRegister) -> Result<Operator> {
    let d = reg.site_dim(site);
    let mut p = Array2::<C64>::zeros((d, d));
    p[(level, level)] = C64::new(1.0, 0.0);
    embed(&Operator::new(p)?, site, reg)
}

/// Projective z-basis measurement of one site: all branches with their
/// probabilities and collapsed states. Zero-probability branches
/// (p ≤ 1e−14) are omitted.
pub fn measure_z(
    rho: &DensityMatrix,
    site: usize,
    reg: &SpinRegister,
) -> Result<Vec<MeasurementBranch>> {
    if site >= reg.len() {
        return Err(Error::SiteOutOfRange { index: site, len: reg.len() });
    }
    let mut out = Vec::new();
    for level in 0..reg.site_dim(site) {
        let p_op = site_projector(level, site, reg)?;
        let prob = rho.expectation(&p_op)?;
        if prob > 1e-14 {
            let m = p_op.matrix().dot(rho.matrix()).dot(p_op.matrix());
            let m = m.mapv(|c| c / prob);
            out.push(MeasurementBranch {
                level,
                probability: prob,
                state: DensityMatrix::from_matrix_unchecked(m),
            });
        }
    }
    Ok(out)
}

/// Collapse onto a specific z-level of a site. Collapsing onto a branch of
/// probability ≤ 1e−14 is an error: that outcome cannot occur.
pub fn collapse_z(
    rho: &DensityMatrix,
    site: usize,
    level: usize,
    reg: &SpinRegister,
) -> Result<(f64, DensityMatrix)> {
    if site >= reg.len() {
        return Err(Error::SiteOutOfRange { index: site, len: reg.len() });
    }
    if level >= reg.site_dim(site) {
        return Err(Error::InvalidArgument(format!(
            "level {level} out of range for site of dimension {}",
            reg.site_dim(site)
        )));
    }
    let p_op = site_projector(level, site, reg)?;
    let prob = rho.expectation(&p_op)?;
    if prob <= 1e-14 {
        return Err(Error::ZeroProbabilityBranch(level));
    }
    let m = p_op.matrix().dot(rho.matrix()).dot(p_op.matrix());
    let m = m.mapv(|c| c / prob);
    Ok((prob, DensityMatrix::from_matrix_unchecked(m)))
}

/// Pauli axis for single-qubit expectation values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// ⟨σ_axis⟩ of a spin-1/2 site, evaluated the way an experiment would:
/// rotate the state so the requested axis lies along z, then take the
/// population difference. Equals Tr(ρ σ_axis) exactly.
pub fn expectation_pauli(
    rho: &DensityMatrix,
    site: usize,
    axis: PauliAxis,
    reg: &SpinRegister,
) -> Result<f64> {
    if site >= reg.len() {
        return Err(Error::SiteOutOfRange { index: site, len: reg.len() });
    }
    if (reg.sites()[site].s - 0.5).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "Pauli expectation needs a spin-1/2 site; site {site} has s = {}",
            reg.sites()[site].s
        )));
    }
    let ops = spin_operators(0.5)?;
    // Pre-rotation mapping the axis onto z: σ_x = R_y(π/2) σ_z R_y(π/2)†
    // and σ_y = R_x(−π/2) σ_z R_x(−π/2)†, so measure after applying the
    // inverse rotation to the state. matexp_unitary(t) = exp(−i 2π H t),
    // hence R_y(θ) = s_y.matexp_unitary(θ/2π).
    let rotated = match axis {
        PauliAxis::Z => rho.clone(),
        PauliAxis::X => {
            let u = embed(&ops.sy, site, reg)?.matexp_unitary(-0.25)?;
            rho.apply_unitary(&u)?
        }
        PauliAxis::Y => {
            let u = embed(&ops.sx, site, reg)?.matexp_unitary(0.25)?;
            rho.apply_unitary(&u)?
        }
    };
    let p_up = rotated.expectation(&site_projector(0, site, reg)?)?;
    let p_down = rotated.expectation(&site_projector(1, site, reg)?)?;
    Ok(p_up - p_down)
}

/// Point-dipole coupling tensor (GHz) between an electronic spin with
/// g-factor `g_e` and a nuclear spin with g-factor `g_n` separated by `r`
/// (Å): D^{αβ} = (μ₀/4π) g_e μ_B g_n μ_N / h · (3 r̂^α r̂^β − δ^{αβ}) / |r|³.
pub fn dipolar_tensor(g_e: f64, g_n: f64, r: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    if r2 == 0.0 {
        return Err(Error::InvalidArgument("dipolar tensor undefined at zero separation".into()));
    }
    let r3 = r2.powf(1.5);
    let pref = g_e * g_n * DIPOLAR_GHZ_A3;
    let mut d = [[0.0; 3]; 3];
    for (a, row) in d.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            let delta = if a == b { 1.0 } else { 0.0 };
            *entry = pref * (3.0 * r[a] * r[b] / r2 - delta) / r3;
        }
    }
    Ok(d)
}

/// A molecular electronic spin coupled to surrounding nuclei: z g-factor
/// and position (Å) per electronic site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSpin {
    pub g_z: f64,
    pub position: [f64; 3],
}

/// Secular (zz) bath correlation matrix C_jj′ = Σ_n D^{zz}_{j,n} D^{zz}_{j′,n}
/// over nuclei at `nuclei` positions (Å) with common g-factor `g_n`, taking
/// the nuclear-bath correlation amplitude as 1 (it rescales all dephasing
/// rates uniformly and drops out of rate ratios).
pub fn bath_correlation_matrix(
    spins: &[BathSpin],
    g_n: f64,
    nuclei: &[[f64; 3]],
) -> Result<Array2<f64>> {
    if spins.is_empty() || nuclei.is_empty() {
        return Err(Error::InvalidArgument(
            "bath correlation needs at least one spin and one nucleus".into(),
        ));
    }
    let mut dzz = Array2::<f64>::zeros((spins.len(), nuclei.len()));
    for (j, s) in spins.iter().enumerate() {
        for (n, pos) in nuclei.iter().enumerate() {
            let r = [
                pos[0] - s.position[0],
                pos[1] - s.position[1],
                pos[2] - s.position[2],
            ];
            dzz[(j, n)] = dipolar_tensor(s.g_z, g_n, r)?[2][2];
        }
    }
    Ok(dzz.dot(&dzz.t()))
}

/// Pure-dephasing rate of a coherence between two eigenstates whose
/// per-site ⟨s_j^z⟩ differ by `delta_sz`: γ = Δᵀ C Δ, where C is the bath
/// correlation matrix. States with identical spin textures are protected
/// (γ = 0); a single spin-1/2 coherence gives exactly C₁₁.
pub fn pure_dephasing_rate(delta_sz: &[f64], c: &Array2<f64>) -> Result<f64> {
    if c.nrows() != delta_sz.len() || c.ncols() != delta_sz.len() {
        return Err(Error::DimensionMismatch(format!(
            "correlation matrix is {}×{} for {} spins",
            c.nrows(),
            c.ncols(),
            delta_sz.len()
        )));
    }
    let mut gamma = 0.0;
    for (j, dj) in delta_sz.iter().enumerate() {
        for (jp, djp) in delta_sz.iter().enumerate() {
            gamma += dj * djp * c[(j, jp)];
        }
    }
    Ok(gamma)
}

/// Per-site ⟨s_j^z⟩ of an eigenvector (column `k` of an eigenbasis) for a
/// register of spins; building block for [`pure_dephasing_rate`] inputs.
pub fn site_sz_expectations(
    vecs: &Operator,
    k: usize,
    reg: &SpinRegister,
) -> Result<Vec<f64>> {
    let dim = reg.total_dim();
    if vecs.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "eigenbasis dim {} vs register dim {dim}",
            vecs.dim()
        )));
    }
    let mut out = Vec::with_capacity(reg.len());
    for site in 0..reg.len() {
        let sz = embed(&spin_operators(reg.sites()[site].s)?.sz, site, reg)?;
        let mut val = C64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                val += vecs.get(i, k).conj() * sz.get(i, j) * vecs.get(j, k);
            }
        }
        out.push(val.re);
    }
    Ok(out)
}

/// Number of detuning samples in inhomogeneous-ensemble averages.
const ENSEMBLE_POINTS: usize = 201;

/// Gaussian ensemble of static detunings: (δ_k, w_k) with Σw = 1, sampled
/// on ±6σ.
fn gaussian_ensemble(sigma: f64) -> Vec<(f64, f64)> {
    if sigma == 0.0 {
        return vec![(0.0, 1.0)];
    }
    let n = ENSEMBLE_POINTS;
    let lim = 6.0 * sigma;
    let mut pts = Vec::with_capacity(n);
    let mut total = 0.0;
    for k in 0..n {
        let x = -lim + 2.0 * lim * (k as f64) / ((n - 1) as f64);
        let w = (-x * x / (2.0 * sigma * sigma)).exp();
        pts.push((x, w));
        total += w;
    }
    for p in &mut pts {
        p.1 /= total;
    }
    pts
}

/// Normalized free-induction amplitude |⟨ρ₀₁(t)⟩|/|ρ₀₁(0)| of a spin-1/2
/// ensemble with Gaussian static-detuning spread σ_f (GHz) and optional
/// homogeneous T₂: the inhomogeneous envelope e^{−(2πσ_f t)²/2} times
/// e^{−t/T₂}.
pub fn free_induction_decay(sigma_f: f64, t: f64, t2: Option<f64>) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("time must be ≥ 0, got {t}")));
    }
    let mut acc = C64::new(0.0, 0.0);
    for (delta, w) in gaussian_ensemble(sigma_f) {
        // coherence phase of δ·s_z evolution: ρ₀₁ ∝ e^{−i 2π δ t}
        acc += C64::new(0.0, -2.0 * std::f64::consts::PI * delta * t).exp() * w;
    }
    let mut amp = acc.norm();
    if let Some(t2) = t2 {
        if !(t2 > 0.0) {
            return Err(Error::InvalidArgument(format!("T₂ must be positive, got {t2}")));
        }
        amp *= (-t / t2).exp();
    }
    Ok(amp)
}

/// Normalized echo amplitude after π/2 — τ — π — τ on the same ensemble:
/// the static spread refocuses exactly, leaving e^{−2τ/T₂} when a
/// homogeneous T₂ acts. Evaluated by explicit per-member propagation of
/// the pulse sequence (ideal instantaneous pulses).
pub fn hahn_echo_amplitude(sigma_f: f64, tau: f64, t2: Option<f64>) -> Result<f64> {
    if tau < 0.0 {
        return Err(Error::InvalidArgument(format!("delay must be ≥ 0, got {tau}")));
    }
    let ops = spin_operators(0.5)?;
    // R_x(θ) = exp(−iθ s_x) = s_x.matexp_unitary(θ/2π)
    let r_half = ops.sx.matexp_unitary(0.25)?; // π/2
    let r_pi = ops.sx.matexp_unitary(0.5)?; // π
    let up = ndarray::array![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let rho0 = DensityMatrix::from_pure(&up)?;

    let mut acc = C64::new(0.0, 0.0);
    for (delta, w) in gaussian_ensemble(sigma_f) {
        let u_free = ops.sz.scale(C64::new(delta, 0.0)).matexp_unitary(tau)?;
        let mut rho = rho0.apply_unitary(&r_half)?;
        rho = rho.apply_unitary(&u_free)?;
        if let Some(t2) = t2 {
            rho = qudit_dephasing(&rho, 0.5, tau, t2)?;
        }
        rho = rho.apply_unitary(&r_pi)?;
        rho = rho.apply_unitary(&u_free)?;
        if let Some(t2) = t2 {
            rho = qudit_dephasing(&rho, 0.5, tau, t2)?;
        }
        acc += rho.get(0, 1) * w;
    }
    // initial coherence after π/2 is 1/2
    Ok(acc.norm() * 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn plus_state() -> DensityMatrix {
        let s = 1.0 / 2.0f64.sqrt();
        DensityMatrix::from_pure(&array![c(s, 0.0), c(s, 0.0)]).unwrap()
    }

    fn random_state(dim: usize, rng: &mut StdRng) -> Array1<C64> {
        let mut v: Array1<C64> =
            Array1::from_iter((0..dim).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
        let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.mapv_inplace(|x| x / norm);
        v
    }

    #[test]
    fn density_matrix_validation() {
        // valid pure state
        let rho = plus_state();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        rho.validate().unwrap();

        // wrong trace
        let bad = Operator::identity(2);
        assert!(DensityMatrix::new(bad).is_err());

        // non-positive
        let mut m = Array2::<C64>::zeros((2, 2));
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(DensityMatrix::new(Operator::new(m).unwrap()).is_err());

        // non-normalized vector
        assert!(DensityMatrix::from_pure(&array![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn dephasing_lindblad_analytic() {
        let t2 = 120.0;
        let reg = SpinRegister::qubits(1);
        let noise = NoiseModel { t1: None, t2: Some(t2) };
        let ops = noise.collapse_ops(0, &reg).unwrap();
        let h = Operator::zeros(2);
        for t in [0.3 * t2, t2, 2.7 * t2] {
            let rho_t = lindblad_evolve(&h, &ops, &plus_state(), t, None).unwrap();
            let expect = 0.5 * (-t / t2).exp();
            let got = rho_t.get(0, 1).re;
            assert!(
                ((got - expect) / expect).abs() < 1e-6,
                "t = {t}: coherence {got} vs {expect}"
            );
            // populations untouched
            assert!((rho_t.get(0, 0).re - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn relaxation_lindblad_analytic() {
        let t1 = 80.0;
        let reg = SpinRegister::qubits(1);
        let noise = NoiseModel { t1: Some(t1), t2: None };
        let ops = noise.collapse_ops(0, &reg).unwrap();
        let h = Operator::zeros(2);
        let excited = DensityMatrix::from_pure(&array![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        for t in [0.5 * t1, t1, 3.0 * t1] {
            let rho_t = lindblad_evolve(&h, &ops, &excited, t, None).unwrap();
            let expect = (-t / t1).exp();
            assert!(
                ((rho_t.get(0, 0).re - expect) / expect).abs() < 1e-6,
                "population decay off at t = {t}"
            );
        }
        // coherence decays at half the population rate
        let t = 1.3 * t1;
        let rho_t = lindblad_evolve(&h, &ops, &plus_state(), t, None).unwrap();
        let expect = 0.5 * (-t / (2.0 * t1)).exp();
        assert!(((rho_t.get(0, 1).re - expect) / expect).abs() < 1e-6);
    }

    #[test]
    fn lindblad_kraus_agreement() {
        let (t1, t2) = (50.0, 70.0);
        let reg = SpinRegister::qubits(1);
        let h = Operator::zeros(2);
        let mut rng = StdRng::seed_from_u64(11);
        let rho0 = DensityMatrix::from_pure(&random_state(2, &mut rng)).unwrap();
        let t = 23.0;

        // dephasing channel
        let noise = NoiseModel { t1: None, t2: Some(t2) };
        let lind = lindblad_evolve(&h, &noise.collapse_ops(0, &reg).unwrap(), &rho0, t, None)
            .unwrap();
        let kraus = kraus_apply(&rho0, &dephasing_kraus(t, t2).unwrap()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (lind.get(i, j) - kraus.get(i, j)).norm() < 1e-6,
                    "dephasing mismatch at ({i},{j})"
                );
            }
        }

        // relaxation channel
        let noise = NoiseModel { t1: Some(t1), t2: None };
        let lind = lindblad_evolve(&h, &noise.collapse_ops(0, &reg).unwrap(), &rho0, t, None)
            .unwrap();
        let kraus = kraus_apply(&rho0, &relaxation_kraus(t, t1).unwrap()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (lind.get(i, j) - kraus.get(i, j)).norm() < 1e-6,
                    "relaxation mismatch at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn lindblad_preserves_state_properties() {
        let reg = SpinRegister::qubits(1);
        let noise = NoiseModel { t1: Some(40.0), t2: Some(30.0) };
        let h = spin_operators(0.5).unwrap().sz.scale(c(1.3, 0.0));
        let rho = lindblad_evolve(
            &h,
            &noise.collapse_ops(0, &reg).unwrap(),
            &plus_state(),
            65.0,
            None,
        )
        .unwrap();
        rho.validate().unwrap();
    }

    #[test]
    fn lindblad_rejects_bad_input() {
        let h = Operator::zeros(2);
        let rho = plus_state();
        assert!(lindblad_evolve(&h, &[], &rho, -1.0, None).is_err());
        assert!(lindblad_evolve(&h, &[], &rho, 1.0, Some(0.0)).is_err());
        let sz = spin_operators(0.5).unwrap().sz;
        assert!(lindblad_evolve(&h, &[(sz, -0.1)], &rho, 1.0, None).is_err());
        let h3 = Operator::zeros(3);
        assert!(lindblad_evolve(&h3, &[], &rho, 1.0, None).is_err());
    }

    #[test]
    fn kraus_completeness_enforced() {
        let rho = plus_state();
        let half = Operator::identity(2).scale(c(0.5, 0.0));
        assert!(kraus_apply(&rho, &[half]).is_err());
        assert!(kraus_apply(&rho, &[]).is_err());
        let id = Operator::identity(2);
        let out = kraus_apply(&rho, &[id]).unwrap();
        assert!((out.get(0, 1) - rho.get(0, 1)).norm() < 1e-15);
    }

    #[test]
    fn qudit_dephasing_mask() {
        let mut rng = StdRng::seed_from_u64(3);
        let rho = DensityMatrix::from_pure(&random_state(4, &mut rng)).unwrap();
        let (t, t2) = (7.0, 55.0);
        let out = qudit_dephasing(&rho, 1.5, t, t2).unwrap();
        // m ∈ {3/2, 1/2, −1/2, −3/2}: coherence (0,3) has Δm = 3
        for i in 0..4 {
            for j in 0..4 {
                let dm = (i as f64) - (j as f64);
                let expect = rho.get(i, j) * (-(dm * dm) * t / t2).exp();
                assert!((out.get(i, j) - expect).norm() < 1e-14);
            }
        }
        // spin-1/2 mask reduces to e^{−t/T₂}
        let rho = plus_state();
        let out = qudit_dephasing(&rho, 0.5, t, t2).unwrap();
        assert!((out.get(0, 1).re - 0.5 * (-t / t2).exp()).abs() < 1e-14);
        assert!(qudit_dephasing(&rho, 1.0, t, t2).is_err());
    }

    #[test]
    fn partial_trace_bell_and_product() {
        // Bell state: both reduced states are I/2
        let s = 1.0 / 2.0f64.sqrt();
        let bell = DensityMatrix::from_pure(&array![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)])
            .unwrap();
        for keep in [[0usize], [1usize]] {
            let red = partial_trace(bell.operator(), &[2, 2], &keep).unwrap();
            assert!((red.get(0, 0).re - 0.5).abs() < 1e-12);
            assert!((red.get(1, 1).re - 0.5).abs() < 1e-12);
            assert!(red.get(0, 1).norm() < 1e-12);
        }

        // product state reduces to its factors
        let mut rng = StdRng::seed_from_u64(5);
        let a = random_state(2, &mut rng);
        let b = random_state(3, &mut rng);
        let mut joint = Array1::<C64>::zeros(6);
        for i in 0..2 {
            for j in 0..3 {
                joint[i * 3 + j] = a[i] * b[j];
            }
        }
        let rho = DensityMatrix::from_pure(&joint).unwrap();
        let red_a = partial_trace(rho.operator(), &[2, 3], &[0]).unwrap();
        let red_b = partial_trace(rho.operator(), &[2, 3], &[1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((red_a.get(i, j) - a[i] * a[j].conj()).norm() < 1e-12);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((red_b.get(i, j) - b[i] * b[j].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn partial_trace_observable_consistency() {
        // Tr(ρ (M ⊗ I)) = Tr(ρ_A M) for random M
        let mut rng = StdRng::seed_from_u64(17);
        let psi = random_state(4, &mut rng);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let red = partial_trace(rho.operator(), &[2, 2], &[0]).unwrap();
        for _ in 0..10 {
            let mut m = Array2::<C64>::zeros((2, 2));
            for i in 0..2 {
                for j in 0..2 {
                    m[(i, j)] = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
            }
            // hermitize
            let m = Operator::new(&m + &m.t().mapv(|x| x.conj())).unwrap();
            let full = m.kron(&Operator::identity(2));
            let lhs = rho.expectation(&full).unwrap();
            let mut rhs = C64::new(0.0, 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    rhs += red.get(i, j) * m.get(j, i);
                }
            }
            assert!((lhs - rhs.re).abs() < 1e-10);
        }
    }

    #[test]
    fn measurement_branches_and_collapse() {
        let reg = SpinRegister::qubits(1);
        let branches = measure_z(&plus_state(), 0, &reg).unwrap();
        assert_eq!(branches.len(), 2);
        for b in &branches {
            assert!((b.probability - 0.5).abs() < 1e-12);
            assert!((b.state.purity() - 1.0).abs() < 1e-12);
            assert!((b.state.get(b.level, b.level).re - 1.0).abs() < 1e-12);
        }

        // zero-probability collapse is an error
        let down = DensityMatrix::from_pure(&array![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let err = collapse_z(&down, 0, 0, &reg);
        assert!(matches!(err, Err(Error::ZeroProbabilityBranch(0))));
        let (p, state) = collapse_z(&down, 0, 1, &reg).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!((state.get(1, 1).re - 1.0).abs() < 1e-12);

        // two-site register: measuring one site keeps the other intact
        let s = 1.0 / 2.0f64.sqrt();
        let reg2 = SpinRegister::qubits(2);
        let bell =
            DensityMatrix::from_pure(&array![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)])
                .unwrap();
        let branches = measure_z(&bell, 0, &reg2).unwrap();
        assert_eq!(branches.len(), 2);
        for b in &branches {
            // perfectly correlated: site 1 collapses with site 0
            let red = reduced_state(&b.state, &reg2, &[1]).unwrap();
            assert!((red.get(b.level, b.level).re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pauli_expectations_match_trace() {
        let mut rng = StdRng::seed_from_u64(29);
        let reg = SpinRegister::qubits(1);
        let ops = spin_operators(0.5).unwrap();
        let paulis = [
            (PauliAxis::X, ops.sx.scale(c(2.0, 0.0))),
            (PauliAxis::Y, ops.sy.scale(c(2.0, 0.0))),
            (PauliAxis::Z, ops.sz.scale(c(2.0, 0.0))),
        ];
        for _ in 0..6 {
            // a mixed state: random two-qubit pure state traced down
            let psi = random_state(4, &mut rng);
            let joint = DensityMatrix::from_pure(&psi).unwrap();
            let rho = reduced_state(&joint, &SpinRegister::qubits(2), &[0]).unwrap();
            for (axis, sigma) in &paulis {
                let via_rotation = expectation_pauli(&rho, 0, *axis, &reg).unwrap();
                let via_trace = rho.expectation(sigma).unwrap();
                assert!(
                    (via_rotation - via_trace).abs() < 1e-10,
                    "{axis:?}: {via_rotation} vs {via_trace}"
                );
            }
        }
    }

    #[test]
    fn noise_model_warnings() {
        let ok = NoiseModel { t1: Some(100.0), t2: Some(150.0) };
        assert!(ok.warnings().is_empty());
        let bad = NoiseModel { t1: Some(100.0), t2: Some(250.0) };
        let w = bad.warnings();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("2T₁"));
    }

    #[test]
    fn dipolar_tensor_properties() {
        let d = dipolar_tensor(2.0, 5.5856946893, [0.0, 0.0, 3.0]).unwrap();
        // traceless and symmetric
        assert!((d[0][0] + d[1][1] + d[2][2]).abs() < 1e-15);
        for a in 0..3 {
            for b in 0..3 {
                assert!((d[a][b] - d[b][a]).abs() < 1e-15);
            }
        }
        // r ∥ z: D^zz = 2 g_e g_n k / r³
        let expect = 2.0 * 2.0 * 5.5856946893 * DIPOLAR_GHZ_A3 / 27.0;
        assert!((d[2][2] - expect).abs() < 1e-12);
        assert!(dipolar_tensor(2.0, 5.58, [0.0; 3]).is_err());
    }

    #[test]
    fn single_spin_rate_is_c11() {
        let spins = [BathSpin { g_z: 2.0, position: [0.0; 3] }];
        let nuclei = [[3.0, 1.0, -2.0], [-1.5, 2.0, 4.0]];
        let c_mat = bath_correlation_matrix(&spins, 5.5856946893, &nuclei).unwrap();
        // coherence between |↑⟩ and |↓⟩: Δ⟨s_z⟩ = 1
        let gamma = pure_dephasing_rate(&[1.0], &c_mat).unwrap();
        assert!((gamma - c_mat[(0, 0)]).abs() < 1e-18);
        // identical textures are protected
        assert!(pure_dephasing_rate(&[0.0], &c_mat).unwrap().abs() < 1e-30);
    }

    #[test]
    fn free_decay_gaussian_envelope() {
        let sigma = 0.002;
        for t in [20.0, 60.0, 120.0] {
            let amp = free_induction_decay(sigma, t, None).unwrap();
            let x = 2.0 * std::f64::consts::PI * sigma * t;
            let expect = (-x * x / 2.0).exp();
            assert!(
                (amp - expect).abs() < 1e-6,
                "t = {t}: {amp} vs {expect}"
            );
        }
    }

    #[test]
    fn hahn_echo_refocuses() {
        let sigma = 0.002;
        let tau = 120.0;
        // static spread alone: full recovery even when the FID has died
        assert!(free_induction_decay(sigma, tau, None).unwrap() < 0.02);
        let echo = hahn_echo_amplitude(sigma, tau, None).unwrap();
        assert!((echo - 1.0).abs() < 1e-9, "echo amplitude {echo}");
        // homogeneous T₂ is not refocused: e^{−2τ/T₂}
        let t2 = 300.0;
        let echo = hahn_echo_amplitude(sigma, tau, Some(t2)).unwrap();
        let expect = (-2.0 * tau / t2).exp();
        assert!(((echo - expect) / expect).abs() < 1e-9);
    }
}
