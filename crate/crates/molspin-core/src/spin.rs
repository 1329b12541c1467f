//! Spin matrices, register descriptions, and tensor embedding.
//!
//! Basis convention: the 2s+1 levels of a spin-s site are ordered by
//! **descending** magnetic quantum number m = s, s−1, …, −s, so index 0 of
//! a spin-1/2 site is `|↑⟩ ≡ |0⟩` and index 1 is `|↓⟩ ≡ |1⟩`. Tensor
//! products place site 0 leftmost (slowest index).

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::operator::Operator;
use crate::{Error, Result};

/// Physical species of a spin site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinKind {
    Electronic,
    Nuclear,
}

/// One spin site: species, spin quantum number, and a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSite {
    pub kind: SpinKind,
    /// Spin quantum number; must be a non-negative half-integer ≥ 1/2.
    pub s: f64,
    pub label: String,
}

impl SpinSite {
    pub fn electronic(s: f64, label: impl Into<String>) -> Self {
        Self { kind: SpinKind::Electronic, s, label: label.into() }
    }

    pub fn nuclear(s: f64, label: impl Into<String>) -> Self {
        Self { kind: SpinKind::Nuclear, s, label: label.into() }
    }

    /// Hilbert-space dimension 2s+1.
    pub fn dim(&self) -> usize {
        (2.0 * self.s + 1.0).round() as usize
    }
}

/// An ordered collection of spin sites; site 0 is leftmost in tensor
/// products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinRegister {
    sites: Vec<SpinSite>,
}

impl SpinRegister {
    /// Builds a register, enforcing half-integer spins and unique labels.
    pub fn new(sites: Vec<SpinSite>) -> Result<Self> {
        for site in &sites {
            validate_half_integer(site.s)?;
        }
        for (i, a) in sites.iter().enumerate() {
            for b in sites.iter().skip(i + 1) {
                if a.label == b.label {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate site label '{}'",
                        a.label
                    )));
                }
            }
        }
        Ok(Self { sites })
    }

    /// Convenience: register of qubits (spin-1/2) labeled q0, q1, ….
    pub fn qubits(n: usize) -> Self {
        let sites = (0..n)
            .map(|i| SpinSite::electronic(0.5, format!("q{i}")))
            .collect();
        Self { sites }
    }

    /// Convenience: single-site register.
    pub fn single(s: f64) -> Result<Self> {
        Self::new(vec![SpinSite::electronic(s, "q0")])
    }

    pub fn sites(&self) -> &[SpinSite] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Product of all site dimensions.
    pub fn total_dim(&self) -> usize {
        self.sites.iter().map(|s| s.dim()).product()
    }

    /// Dimension of one site.
    pub fn site_dim(&self, index: usize) -> Result<usize> {
        self.sites
            .get(index)
            .map(|s| s.dim())
            .ok_or(Error::SiteOutOfRange { index, len: self.sites.len() })
    }

    /// Basis state |i₀ i₁ …⟩ from per-site level indices (index 0 = highest m).
    pub fn basis_state(&self, levels: &[usize]) -> Result<Array1<C64>> {
        if levels.len() != self.sites.len() {
            return Err(Error::DimensionMismatch(format!(
                "need {} level indices, got {}",
                self.sites.len(),
                levels.len()
            )));
        }
        let mut flat = 0usize;
        for (site, &lvl) in self.sites.iter().zip(levels) {
            let d = site.dim();
            if lvl >= d {
                return Err(Error::InvalidArgument(format!(
                    "level {lvl} out of range for site of dimension {d}"
                )));
            }
            flat = flat * d + lvl;
        }
        let mut psi = Array1::zeros(self.total_dim());
        psi[flat] = C64::new(1.0, 0.0);
        Ok(psi)
    }
}

fn validate_half_integer(s: f64) -> Result<()> {
    let doubled = 2.0 * s;
    if s < 0.5 || (doubled - doubled.round()).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "spin quantum number must be a half-integer ≥ 1/2, got {s}"
        )));
    }
    Ok(())
}

/// The spin matrices of a spin-s site.
pub struct SpinOperators {
    pub sx: Operator,
    pub sy: Operator,
    pub sz: Operator,
    pub splus: Operator,
    pub sminus: Operator,
}

/// Builds Sx, Sy, Sz, S± for half-integer `s` in the descending-m basis.
///
/// Matrix elements follow `⟨m±1|S±|m⟩ = √(s(s+1) − m(m±1))`, so
/// `⟨m|Sx|m±1⟩ = ½√(s(s+1) − m(m±1))`.
pub fn spin_operators(s: f64) -> Result<SpinOperators> {
    validate_half_integer(s)?;
    let dim = (2.0 * s + 1.0).round() as usize;
    let m_of = |idx: usize| s - idx as f64;

    let mut sz = Array2::<C64>::zeros((dim, dim));
    let mut splus = Array2::<C64>::zeros((dim, dim));
    for idx in 0..dim {
        let m = m_of(idx);
        sz[(idx, idx)] = C64::new(m, 0.0);
        // S+ |m⟩ = √(s(s+1) − m(m+1)) |m+1⟩; |m+1⟩ sits at idx−1
        if idx > 0 {
            let amp = (s * (s + 1.0) - m * (m + 1.0)).sqrt();
            splus[(idx - 1, idx)] = C64::new(amp, 0.0);
        }
    }
    let sminus = splus.t().mapv(|z| z.conj());
    let sx = (&splus + &sminus).mapv(|z| 0.5 * z);
    let sy = (&splus - &sminus).mapv(|z| C64::new(0.0, -0.5) * z);

    Ok(SpinOperators {
        sx: Operator::new(sx)?,
        sy: Operator::new(sy)?,
        sz: Operator::new(sz)?,
        splus: Operator::new(splus)?,
        sminus: Operator::new(sminus)?,
    })
}

/// Embeds a single-site operator at `site_index`, identity elsewhere.
pub fn embed(op: &Operator, site_index: usize, reg: &SpinRegister) -> Result<Operator> {
    let site_dim = reg.site_dim(site_index)?;
    if op.dim() != site_dim {
        return Err(Error::DimensionMismatch(format!(
            "operator dimension {} does not match site {} dimension {}",
            op.dim(),
            site_index,
            site_dim
        )));
    }
    let mut acc = Operator::identity(1);
    for (i, site) in reg.sites().iter().enumerate() {
        if i == site_index {
            acc = acc.kron(op);
        } else {
            acc = acc.kron(&Operator::identity(site.dim()));
        }
    }
    Ok(acc)
}

/// Embedded spin matrices for every site of a register, in site order.
pub fn register_spin_operators(reg: &SpinRegister) -> Result<Vec<SpinOperators>> {
    reg.sites()
        .iter()
        .enumerate()
        .map(|(i, site)| {
            let ops = spin_operators(site.s)?;
            Ok(SpinOperators {
                sx: embed(&ops.sx, i, reg)?,
                sy: embed(&ops.sy, i, reg)?,
                sz: embed(&ops.sz, i, reg)?,
                splus: embed(&ops.splus, i, reg)?,
                sminus: embed(&ops.sminus, i, reg)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pauli_over_two_for_spin_half() {
        let ops = spin_operators(0.5).unwrap();
        assert_eq!(ops.sz.get(0, 0), c(0.5, 0.0));
        assert_eq!(ops.sz.get(1, 1), c(-0.5, 0.0));
        assert_eq!(ops.sx.get(0, 1), c(0.5, 0.0));
        assert_eq!(ops.sy.get(0, 1), c(0.0, -0.5));
        assert_eq!(ops.sy.get(1, 0), c(0.0, 0.5));
    }

    #[test]
    fn sz_descending_for_spin_one() {
        let ops = spin_operators(1.0).unwrap();
        for (i, expect) in [1.0, 0.0, -1.0].into_iter().enumerate() {
            assert_eq!(ops.sz.get(i, i), c(expect, 0.0));
        }
    }

    #[test]
    fn large_spin_matrix_element() {
        // ⟨0|Sx|±1⟩ = ½√(s(s+1)) for s=10, m=0 ↔ m=±1: √(110−0)/2
        let ops = spin_operators(10.0).unwrap();
        let idx_m0 = 10; // m = 10 − idx
        let expect = 0.5 * (110.0f64).sqrt();
        assert!((ops.sx.get(idx_m0, idx_m0 + 1).re - expect).abs() < 1e-12);
        assert!((ops.sx.get(idx_m0, idx_m0 - 1).re - expect).abs() < 1e-12);
    }

    #[test]
    fn commutators_and_casimir_assorted_spins() {
        for &s in &[0.5, 1.0, 1.5, 2.5, 3.5] {
            let ops = spin_operators(s).unwrap();
            let i_c = c(0.0, 1.0);
            let comm_xy = ops.sx.commutator(&ops.sy);
            assert!((&comm_xy - &ops.sz.scale(i_c)).max_abs() < 1e-12, "xy at s={s}");
            let comm_yz = ops.sy.commutator(&ops.sz);
            assert!((&comm_yz - &ops.sx.scale(i_c)).max_abs() < 1e-12, "yz at s={s}");
            let comm_zx = ops.sz.commutator(&ops.sx);
            assert!((&comm_zx - &ops.sy.scale(i_c)).max_abs() < 1e-12, "zx at s={s}");

            let casimir = &(&ops.sx.mul(&ops.sx) + &ops.sy.mul(&ops.sy))
                + &ops.sz.mul(&ops.sz);
            let expect = Operator::identity(ops.sz.dim()).scale(c(s * (s + 1.0), 0.0));
            assert!((&casimir - &expect).max_abs() < 1e-12, "casimir at s={s}");
        }
    }

    #[test]
    fn splus_sminus_consistency() {
        let ops = spin_operators(1.5).unwrap();
        let sx_rebuilt = ops.splus.add_scaled(c(1.0, 0.0), &ops.sminus).scale(c(0.5, 0.0));
        assert!((&sx_rebuilt - &ops.sx).max_abs() < 1e-14);
    }

    #[test]
    fn rejects_non_half_integer() {
        assert!(spin_operators(0.7).is_err());
        assert!(spin_operators(0.0).is_err());
    }

    #[test]
    fn embed_sigma_z_first_of_two() {
        let reg = SpinRegister::qubits(2);
        let ops = spin_operators(0.5).unwrap();
        let sz0 = embed(&ops.sz, 0, &reg).unwrap();
        // σ_z/2 ⊗ I: diagonal (0.5, 0.5, −0.5, −0.5)
        for (i, expect) in [0.5, 0.5, -0.5, -0.5].into_iter().enumerate() {
            assert_eq!(sz0.get(i, i), c(expect, 0.0));
        }
    }

    #[test]
    fn embed_identity_any_site() {
        let reg = SpinRegister::new(vec![
            SpinSite::electronic(0.5, "a"),
            SpinSite::electronic(1.0, "b"),
        ])
        .unwrap();
        let id = Operator::identity(3);
        let e = embed(&id, 1, &reg).unwrap();
        assert!((&e - &Operator::identity(6)).max_abs() < 1e-15);
    }

    #[test]
    fn embed_spin_one_lowering_action() {
        // Sx on site 1 (s=1) applied to |↓⟩⊗|m=1⟩ gives (1/√2)|↓⟩⊗|m=0⟩
        let reg = SpinRegister::new(vec![
            SpinSite::electronic(0.5, "a"),
            SpinSite::electronic(1.0, "b"),
        ])
        .unwrap();
        let ops = spin_operators(1.0).unwrap();
        let sx1 = embed(&ops.sx, 1, &reg).unwrap();
        let psi = reg.basis_state(&[1, 0]).unwrap(); // |↓⟩ ⊗ |m=+1⟩
        let out = sx1.apply(&psi);
        let target = reg.basis_state(&[1, 1]).unwrap(); // |↓⟩ ⊗ |m=0⟩
        let overlap: C64 = target.iter().zip(out.iter()).map(|(a, b)| a.conj() * b).sum();
        assert!((overlap.re - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn embed_rejects_mismatch_and_bad_site() {
        let reg = SpinRegister::qubits(2);
        let id3 = Operator::identity(3);
        assert!(embed(&id3, 0, &reg).is_err());
        let id2 = Operator::identity(2);
        assert!(embed(&id2, 5, &reg).is_err());
    }

    #[test]
    fn embeddings_on_distinct_sites_commute() {
        let reg = SpinRegister::qubits(3);
        let ops = spin_operators(0.5).unwrap();
        let a = embed(&ops.sx, 0, &reg).unwrap();
        let b = embed(&ops.sy, 2, &reg).unwrap();
        assert!(a.commutator(&b).max_abs() < 1e-14);
    }

    #[test]
    fn register_validation() {
        assert!(SpinRegister::new(vec![
            SpinSite::electronic(0.5, "x"),
            SpinSite::electronic(0.5, "x"),
        ])
        .is_err());
        assert!(SpinRegister::new(vec![SpinSite::electronic(0.3, "x")]).is_err());
        let reg = SpinRegister::new(vec![
            SpinSite::nuclear(2.5, "n"),
            SpinSite::electronic(0.5, "e"),
        ])
        .unwrap();
        assert_eq!(reg.total_dim(), 12);
    }
}
