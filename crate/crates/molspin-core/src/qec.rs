//! Quantum error correction on spin registers: the three-qubit repetition
//! code, qudit codes embedding a protected qubit in a single large spin,
//! error-space recovery channels, and the encoded-memory experiment.
//!
//! Code words live in the descending-m product basis (index 0 ↔ highest m,
//! |0⟩ ≡ |↑⟩ on qubits). A code is two orthonormal words plus one pair of
//! orthonormal error words per correctable error family; recovery projects
//! onto the code and error spaces and rotates each error space back.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::open_system::{collapse_z, qudit_dephasing, DensityMatrix};
use crate::operator::Operator;
use crate::pulse::{rotation_pulse, HwCalibration, PulseSchedule, Transition};
use crate::spin::{embed, spin_operators, SpinRegister};
use crate::{Error, Result};

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn inner(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * *y).sum()
}

fn norm(a: &Array1<C64>) -> f64 {
    inner(a, a).re.sqrt()
}

/// One correctable error family: the normalized images of the two code
/// words under the error, spanning an error space orthogonal to the code.
#[derive(Debug, Clone)]
pub struct ErrorSpace {
    pub e_zero: Array1<C64>,
    pub e_one: Array1<C64>,
}

/// A qubit encoded in a larger Hilbert space with explicitly listed
/// correctable error spaces.
#[derive(Debug, Clone)]
pub struct CodeSpec {
    pub zero_l: Array1<C64>,
    pub one_l: Array1<C64>,
    pub error_spaces: Vec<ErrorSpace>,
}

impl CodeSpec {
    /// Validate orthonormality of the code words and every error space,
    /// and orthogonality between spaces.
    pub fn validate(&self) -> Result<()> {
        let mut vecs: Vec<&Array1<C64>> = vec![&self.zero_l, &self.one_l];
        for es in &self.error_spaces {
            vecs.push(&es.e_zero);
            vecs.push(&es.e_one);
        }
        let dim = self.zero_l.len();
        for v in &vecs {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(
                    "all code and error vectors must share one dimension".into(),
                ));
            }
        }
        for (i, a) in vecs.iter().enumerate() {
            for (j, b) in vecs.iter().enumerate() {
                let ip = inner(a, b);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (ip - cr(expect)).norm() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "code vectors {i}, {j} are not orthonormal: ⟨i|j⟩ = {ip}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// α|0L⟩ + β|1L⟩ (normalizing the coefficients).
    pub fn logical_state(&self, alpha: C64, beta: C64) -> Array1<C64> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        let mut out = Array1::<C64>::zeros(self.zero_l.len());
        for i in 0..out.len() {
            out[i] = (alpha * self.zero_l[i] + beta * self.one_l[i]) / n;
        }
        out
    }

    /// Projector onto the code space.
    pub fn code_projector(&self) -> Operator {
        projector(&[&self.zero_l, &self.one_l])
    }

    /// Recovery channel R(ρ) = P_c ρ P_c + Σ_k U_k (P_k ρ P_k) U_k†, where
    /// U_k maps error space k back onto the code space word-by-word. Trace
    /// is preserved on states supported in the code and error spaces; any
    /// weight outside is reported as the second return value (unrecoverable).
    pub fn recover(&self, rho: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
        let dim = self.zero_l.len();
        if rho.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "state dim {} vs code dim {dim}",
                rho.dim()
            )));
        }
        let pc = self.code_projector();
        let mut out = pc.matrix().dot(rho.matrix()).dot(pc.matrix());
        let mut captured = trace_re(&out);
        for es in &self.error_spaces {
            let pe = projector(&[&es.e_zero, &es.e_one]);
            let ue = transfer(&[(&self.zero_l, &es.e_zero), (&self.one_l, &es.e_one)]);
            let sandwich = pe.matrix().dot(rho.matrix()).dot(pe.matrix());
            captured += trace_re(&sandwich);
            out = out + ue.matrix().dot(&sandwich).dot(&ue.dagger().into_matrix());
        }
        let unrecoverable = (1.0 - captured).max(0.0);
        if captured <= 1e-14 {
            return Err(Error::InvalidArgument(
                "state has no weight in the code or error spaces".into(),
            ));
        }
        // renormalize: the channel is trace preserving on its support
        let out = out.mapv(|c| c / captured);
        Ok((DensityMatrix::new(Operator::new(out)?)?, unrecoverable))
    }
}

fn trace_re(m: &Array2<C64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Σ_k |v_k⟩⟨v_k| over the given vectors.
fn projector(vecs: &[&Array1<C64>]) -> Operator {
    let dim = vecs[0].len();
    let mut p = Array2::<C64>::zeros((dim, dim));
    for v in vecs {
        for i in 0..dim {
            for j in 0..dim {
                p[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    Operator::new(p).expect("square")
}

/// Σ_k |to_k⟩⟨from_k| (a partial isometry).
fn transfer(pairs: &[(&Array1<C64>, &Array1<C64>)]) -> Operator {
    let dim = pairs[0].0.len();
    let mut p = Array2::<C64>::zeros((dim, dim));
    for (to, from) in pairs {
        for i in 0..dim {
            for j in 0..dim {
                p[(i, j)] += to[i] * from[j].conj();
            }
        }
    }
    Operator::new(p).expect("square")
}

/// Knill–Laflamme verification report.
#[derive(Debug, Clone, Copy)]
pub struct KlReport {
    /// Largest violation of ⟨iL|E†F|jL⟩ = c_EF δ_ij over all error pairs.
    pub max_residual: f64,
    pub passes: bool,
}

/// Check the Knill–Laflamme conditions for a code against an error set:
/// for every pair (E, F), ⟨0L|E†F|0L⟩ = ⟨1L|E†F|1L⟩ and ⟨0L|E†F|1L⟩ = 0.
pub fn knill_laflamme_check(
    zero_l: &Array1<C64>,
    one_l: &Array1<C64>,
    errors: &[Operator],
    tol: f64,
) -> Result<KlReport> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("empty error set".into()));
    }
    let dim = zero_l.len();
    for e in errors {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "error operator dim {} vs code dim {dim}",
                e.dim()
            )));
        }
    }
    let mut max_residual = 0.0f64;
    for ea in errors {
        for fb in errors {
            let m = ea.dagger().mul(fb);
            let apply = |v: &Array1<C64>| m.apply(v);
            let d00 = inner(zero_l, &apply(zero_l));
            let d11 = inner(one_l, &apply(one_l));
            let d01 = inner(zero_l, &apply(one_l));
            let d10 = inner(one_l, &apply(zero_l));
            max_residual = max_residual
                .max((d00 - d11).norm())
                .max(d01.norm())
                .max(d10.norm());
        }
    }
    Ok(KlReport { max_residual, passes: max_residual < tol })
}

// ---------------------------------------------------------------------------
// Three-qubit repetition code
// ---------------------------------------------------------------------------

/// Controlled-X with the given control and target qubits (control fires on
/// index 1 ≡ |↓⟩ ≡ logical |1⟩).
pub fn cx_gate(control: usize, target: usize, n_qubits: usize) -> Result<Operator> {
    if control == target || control >= n_qubits || target >= n_qubits {
        return Err(Error::InvalidArgument(format!(
            "cX needs distinct control/target below {n_qubits}, got ({control}, {target})"
        )));
    }
    let dim = 1usize << n_qubits;
    let mut m = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        let cbit = (i >> (n_qubits - 1 - control)) & 1;
        let j = if cbit == 1 { i ^ (1 << (n_qubits - 1 - target)) } else { i };
        m[(j, i)] = cr(1.0);
    }
    Operator::new(m)
}

/// Encode α|0⟩ + β|1⟩ into α|000⟩ + β|111⟩ with two controlled-X gates
/// (control 0 → targets 1, 2).
pub fn three_qubit_encode(psi: &Array1<C64>) -> Result<Array1<C64>> {
    if psi.len() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "logical input must be a qubit, got dim {}",
            psi.len()
        )));
    }
    let mut full = Array1::<C64>::zeros(8);
    full[0] = psi[0]; // |000⟩
    full[4] = psi[1]; // |100⟩
    let u = cx_gate(0, 2, 3)?.mul(&cx_gate(0, 1, 3)?);
    Ok(u.apply(&full))
}

/// The two stabilizer generators Z₁Z₂ and Z₁Z₃ (σ_z ⊗ σ_z ⊗ I and
/// σ_z ⊗ I ⊗ σ_z).
pub fn three_qubit_stabilizers() -> Result<[Operator; 2]> {
    let reg = SpinRegister::qubits(3);
    let sigma_z = spin_operators(0.5)?.sz.scale(cr(2.0));
    let z = |site: usize| embed(&sigma_z, site, &reg);
    Ok([z(0)?.mul(&z(1)?), z(0)?.mul(&z(2)?)])
}

/// Measure both stabilizer signs on a (pure) register state. The state
/// must be a syndrome eigenstate (definite error), as produced by Pauli
/// errors on code words.
pub fn three_qubit_syndrome(state: &Array1<C64>) -> Result<(i8, i8)> {
    let [zz12, zz13] = three_qubit_stabilizers()?;
    let mut out = [0i8; 2];
    for (k, stab) in [zz12, zz13].iter().enumerate() {
        let exp = inner(state, &stab.apply(state)).re;
        if (exp.abs() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "state is not a syndrome eigenstate: ⟨S_{k}⟩ = {exp}"
            )));
        }
        out[k] = if exp > 0.0 { 1 } else { -1 };
    }
    Ok((out[0], out[1]))
}

/// Decode a syndrome to the qubit it singles out: (−,−) → 0, (−,+) → 1,
/// (+,−) → 2, (+,+) → none.
pub fn three_qubit_decode_syndrome(syndrome: (i8, i8)) -> Option<usize> {
    match syndrome {
        (-1, -1) => Some(0),
        (-1, 1) => Some(1),
        (1, -1) => Some(2),
        _ => None,
    }
}

/// Full correction round: read the syndrome, apply σ_x on the implicated
/// qubit. Returns the corrected state and the syndrome.
pub fn three_qubit_correct(state: &Array1<C64>) -> Result<(Array1<C64>, (i8, i8))> {
    let syndrome = three_qubit_syndrome(state)?;
    let corrected = match three_qubit_decode_syndrome(syndrome) {
        None => state.clone(),
        Some(q) => {
            let reg = SpinRegister::qubits(3);
            let sigma_x = spin_operators(0.5)?.sx.scale(cr(2.0));
            embed(&sigma_x, q, &reg)?.apply(state)
        }
    };
    Ok((corrected, syndrome))
}

// ---------------------------------------------------------------------------
// Spin-3/2 dephasing code
// ---------------------------------------------------------------------------

/// The spin-3/2 code protecting against first-order dephasing {1, S_z}:
/// |0L⟩ = (√3/2)|−1/2⟩ + (1/2)|3/2⟩, |1L⟩ = (1/2)|−3/2⟩ + (√3/2)|1/2⟩,
/// with error words |e₀⟩ = −(1/2)|−1/2⟩ + (√3/2)|3/2⟩ and
/// |e₁⟩ = −(√3/2)|−3/2⟩ + (1/2)|1/2⟩ (S_z images, normalized). Both words
/// have ⟨S_z⟩ = 0 and ⟨S_z²⟩ = 3/4. Basis order m = 3/2, 1/2, −1/2, −3/2.
pub fn spin32_code() -> CodeSpec {
    let h = 0.5;
    let r3 = 3.0f64.sqrt() / 2.0;
    let zero_l = ndarray::array![cr(h), cr(0.0), cr(r3), cr(0.0)];
    let one_l = ndarray::array![cr(0.0), cr(r3), cr(0.0), cr(h)];
    let e_zero = ndarray::array![cr(r3), cr(0.0), cr(-h), cr(0.0)];
    let e_one = ndarray::array![cr(0.0), cr(h), cr(0.0), cr(-r3)];
    CodeSpec { zero_l, one_l, error_spaces: vec![ErrorSpace { e_zero, e_one }] }
}

/// The three adjacent-level Givens rotations (upper index, lower index,
/// angle) that encode the spin-3/2 code: applied in order, they map
/// |3/2⟩ → |0L⟩ and |−1/2⟩ → |1L⟩. Each rotation acts on one Δm = ±1
/// transition, so each is one resonant pulse.
pub fn spin32_encode_rotations() -> Vec<(usize, usize, f64)> {
    use std::f64::consts::PI;
    vec![
        (2, 3, 5.0 * PI / 6.0), // mixes |−1/2⟩, |−3/2⟩
        (0, 1, PI / 3.0),       // mixes |3/2⟩, |1/2⟩
        (1, 2, PI / 2.0),       // mixes |1/2⟩, |−1/2⟩
    ]
}

/// Real Givens rotation on levels (i, j) of a d-level system:
/// |i⟩ → cosθ|i⟩ + sinθ|j⟩, |j⟩ → −sinθ|i⟩ + cosθ|j⟩.
pub fn givens(i: usize, j: usize, theta: f64, dim: usize) -> Result<Operator> {
    if i >= dim || j >= dim || i == j {
        return Err(Error::InvalidArgument(format!(
            "Givens rotation needs distinct levels below {dim}, got ({i}, {j})"
        )));
    }
    let mut m = Array2::<C64>::eye(dim);
    m[(i, i)] = cr(theta.cos());
    m[(j, j)] = cr(theta.cos());
    m[(j, i)] = cr(theta.sin());
    m[(i, j)] = cr(-theta.sin());
    Operator::new(m)
}

/// Exact encoding unitary assembled from [`spin32_encode_rotations`].
pub fn spin32_encode_unitary() -> Result<Operator> {
    let mut u = Operator::identity(4);
    for (i, j, theta) in spin32_encode_rotations() {
        u = givens(i, j, theta, 4)?.mul(&u);
    }
    Ok(u)
}

/// A single spin-3/2 qudit with resolved Δm = 1 lines:
/// E(m) = g μ_B B m + D m² (GHz), so the three transitions differ by 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spin32Qudit {
    pub g: f64,
    /// Static field, tesla.
    pub b_field: f64,
    /// Axial anisotropy D (GHz); must be nonzero to resolve the lines.
    pub d: f64,
}

impl Spin32Qudit {
    /// Level energy (GHz) at magnetic quantum number m.
    pub fn energy(&self, m: f64) -> f64 {
        self.g * crate::constants::MU_B * self.b_field * m + self.d * m * m
    }

    /// Transition frequency between adjacent levels (descending indices
    /// `upper`, `upper + 1`), GHz.
    pub fn gap(&self, upper: usize) -> f64 {
        let m_hi = 1.5 - upper as f64;
        self.energy(m_hi) - self.energy(m_hi - 1.0)
    }

    /// Static Hamiltonian on the 4-level space.
    pub fn hamiltonian(&self) -> Result<Operator> {
        let diag: Vec<f64> = (0..4).map(|i| self.energy(1.5 - i as f64)).collect();
        Ok(Operator::from_real_diag(&diag))
    }
}

/// Compile the spin-3/2 encoder into three resonant pulses, one per Givens
/// rotation, on the qudit's Δm = 1 lines (carrier phase π/2 realizes a
/// real-amplitude rotation). Errors if the pulse bandwidth fails to
/// resolve the 2|D| line splitting.
pub fn spin32_encode_schedule(
    qudit: &Spin32Qudit,
    hw: &HwCalibration,
) -> Result<PulseSchedule> {
    if qudit.d == 0.0 {
        return Err(Error::Compilation(
            "degenerate Δm = 1 lines (D = 0): transitions cannot be addressed individually"
                .into(),
        ));
    }
    let ops = spin_operators(1.5)?;
    let mut segs = Vec::new();
    for (i, j, theta) in spin32_encode_rotations() {
        let upper = i.min(j);
        let elem = ops.sx.get(upper, upper + 1).re;
        let tr = Transition { target: 0, freq: qudit.gap(upper), sx_element: elem };
        let seg = rotation_pulse(std::f64::consts::FRAC_PI_2, theta, &tr, hw)?;
        if 1.0 / seg.tau >= crate::pulse::SELECTIVITY_FRACTION * 2.0 * qudit.d.abs() {
            return Err(Error::Compilation(format!(
                "pulse bandwidth {:.4} GHz does not resolve the 2D = {:.4} GHz line \
                 splitting; reduce the Rabi rate",
                1.0 / seg.tau,
                2.0 * qudit.d.abs()
            )));
        }
        segs.push(seg);
    }
    PulseSchedule::from_sequence(segs)
}

/// Exact interaction-picture propagator of a sequential qudit schedule:
/// each resonant segment is integrated in its own rotating frame (the
/// static Hamiltonian is diagonal, so every transform is closed-form) and
/// off-resonant leakage onto the other lines is fully retained.
pub fn simulate_spin32_schedule(
    qudit: &Spin32Qudit,
    schedule: &PulseSchedule,
    hw: &HwCalibration,
) -> Result<Operator> {
    schedule.validate()?;
    let h0 = qudit.hamiltonian()?;
    let ops = spin_operators(1.5)?;
    let sz = &ops.sz;
    let mut u = Operator::identity(4);
    let mut segs = schedule.segments.clone();
    segs.sort_by(|a, b| a.start().partial_cmp(&b.start()).unwrap());
    let mut t = 0.0;
    for seg in &segs {
        if seg.start() > t + 1e-12 {
            u = h0.matexp_unitary(seg.start() - t)?.mul(&u);
        }
        // rotating frame at the carrier on this spin: H_RF = H − f·s_z + drive
        let gamma = hw.rabi_of_amp(seg.amp);
        let drive = ops
            .sx
            .scale(cr(gamma * seg.phase.cos()))
            .add_scaled(C64::new(gamma * seg.phase.sin(), 0.0), &ops.sy);
        let h_rf = h0.add_scaled(cr(-seg.freq), sz).add_scaled(cr(1.0), &drive);
        // U_lab = e^{−i2πf t_end s_z} e^{−i2π H_RF τ} e^{+i2πf t_start s_z}
        let r_end = sz.matexp_unitary(seg.freq * seg.end())?;
        let r_start = sz.matexp_unitary(-seg.freq * seg.start())?;
        u = r_end.mul(&h_rf.matexp_unitary(seg.tau)?.mul(&r_start.dagger().dagger()))
            .mul(&u);
        let _ = r_start;
        t = seg.end();
    }
    if schedule.total_time > t + 1e-12 {
        u = h0.matexp_unitary(schedule.total_time - t)?.mul(&u);
        t = schedule.total_time;
    }
    // interaction picture w.r.t. the static Hamiltonian
    Ok(h0.matexp_unitary(-t)?.dagger().dagger().mul(&u))
}

/// Ancilla-assisted detection and correction for the spin-3/2 code: map
/// the code basis onto bare levels, flip a spin-1/2 ancilla conditioned on
/// the two error labels, measure the ancilla, and rotate errors back.
/// Returns the corrected qudit state and whether an error was flagged.
pub fn spin32_detect_correct(rho: &DensityMatrix) -> Result<(DensityMatrix, bool)> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "spin-3/2 code state must have dim 4, got {}",
            rho.dim()
        )));
    }
    let v = spin32_encode_unitary()?.dagger(); // code basis → bare levels
    let reg = SpinRegister::new(vec![
        crate::spin::SpinSite::electronic(1.5, "qudit"),
        crate::spin::SpinSite::electronic(0.5, "ancilla"),
    ])?;

    // joint state: decoded qudit ⊗ |↓⟩
    let decoded = rho.apply_unitary(&v)?;
    let mut joint = Array2::<C64>::zeros((8, 8));
    for i in 0..4 {
        for j in 0..4 {
            joint[(2 * i + 1, 2 * j + 1)] = decoded.get(i, j);
        }
    }
    let joint = DensityMatrix::new(Operator::new(joint)?)?;

    // flip the ancilla on the error labels |1/2⟩ (idx 1), |−3/2⟩ (idx 3)
    let sigma_x = spin_operators(0.5)?.sx.scale(cr(2.0));
    let mut cond = Array2::<C64>::zeros((8, 8));
    for lvl in 0..4 {
        for (a, b) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
            let entry = if lvl == 1 || lvl == 3 {
                sigma_x.get(a, b)
            } else if a == b {
                cr(1.0)
            } else {
                cr(0.0)
            };
            cond[(2 * lvl + a, 2 * lvl + b)] = entry;
        }
    }
    let joint = joint.apply_unitary(&Operator::new(cond)?)?;

    // ancilla-only measurement: follow the dominant branch (definite for
    // states prepared by a single dephasing error)
    let p_up = {
        let mut p = 0.0;
        for lvl in 0..4 {
            p += joint.get(2 * lvl, 2 * lvl).re;
        }
        p
    };
    let flagged = p_up > 0.5;
    let level = if flagged { 0 } else { 1 };
    let (_, collapsed) = collapse_z(&joint, 1, level, &reg)?;

    // on a flag: shift the error labels back onto the code labels
    let corrected = if flagged {
        let swap = {
            let mut m = Array2::<C64>::zeros((4, 4));
            m[(0, 1)] = cr(1.0);
            m[(1, 0)] = cr(1.0);
            m[(2, 3)] = cr(1.0);
            m[(3, 2)] = cr(1.0);
            Operator::new(m)?
        };
        let full = swap.kron(&Operator::identity(2));
        collapsed.apply_unitary(&full)?
    } else {
        collapsed
    };

    // discard the (now definite) ancilla and re-encode
    let qudit_rho = crate::open_system::partial_trace(corrected.operator(), &[4, 2], &[0])?;
    let out = DensityMatrix::new(qudit_rho)?.apply_unitary(&v.dagger())?;
    Ok((out, flagged))
}

// ---------------------------------------------------------------------------
// Dephasing-code generator for half-integer spins up to 7/2
// ---------------------------------------------------------------------------

/// Generate the dephasing code of a single spin S ∈ {3/2, 5/2, 7/2}. The
/// words occupy interleaved supports m = S − 2k and m = −S + 2k with
/// weights p_k solving Σp = 1 and vanishing odd moments Σ p·m^(2r−1) = 0
/// for r = 1..S−1/2, which cancels {1, S_z} errors to first order. |0L⟩
/// takes the support containing +S. The weights also admit the closed
/// form p_k = C(2S, 2k)/2^(2S−1), asserted against the solver in tests.
pub fn generate_dephasing_code(s: f64) -> Result<CodeSpec> {
    let two_s = (2.0 * s).round();
    if (2.0 * s - two_s).abs() > 1e-12 || two_s as i64 % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "dephasing codes need a half-integer spin, got s = {s}"
        )));
    }
    if s < 1.5 {
        return Err(Error::InvalidArgument(
            "s = 1/2 has no room for a protected qubit; the smallest code spin is 3/2".into(),
        ));
    }
    if s > 3.5 {
        return Err(Error::InvalidArgument(format!(
            "code generation is supported up to s = 7/2, got {s}"
        )));
    }
    let dim = (2.0 * s + 1.0) as usize;
    let k_count = dim / 2; // support size per word
    let n_conditions = k_count; // Σp = 1 plus k_count − 1 odd moments

    // support of the |1L⟩ family: m = −S + 2k
    let ms: Vec<f64> = (0..k_count).map(|k| -s + 2.0 * k as f64).collect();

    // linear system A p = b
    let mut a = vec![vec![0.0f64; k_count]; n_conditions];
    let mut b = vec![0.0f64; n_conditions];
    for (col, _) in ms.iter().enumerate() {
        a[0][col] = 1.0;
    }
    b[0] = 1.0;
    for r in 1..n_conditions {
        for (col, m) in ms.iter().enumerate() {
            a[r][col] = m.powi(2 * r as i32 - 1);
        }
    }
    let p = solve_linear(&mut a, &mut b)?;
    for (k, &pk) in p.iter().enumerate() {
        if pk <= 0.0 {
            return Err(Error::Numerical(format!(
                "moment system produced a non-positive weight p_{k} = {pk}"
            )));
        }
    }

    // assemble words in the descending-m basis: index of m is s − m
    let idx_of = |m: f64| (s - m).round() as usize;
    let mut one_l = Array1::<C64>::zeros(dim);
    let mut zero_l = Array1::<C64>::zeros(dim);
    for (k, &m) in ms.iter().enumerate() {
        one_l[idx_of(m)] = cr(p[k].sqrt());
        zero_l[idx_of(-m)] = cr(p[k].sqrt());
    }

    // error words: normalized S_z images (orthogonal to the code since
    // ⟨S_z⟩ = 0 on both words)
    let sz = spin_operators(s)?.sz;
    let mut e_zero = sz.apply(&zero_l);
    let mut e_one = sz.apply(&one_l);
    let (nz, no) = (norm(&e_zero), norm(&e_one));
    e_zero.mapv_inplace(|c| c / nz);
    e_one.mapv_inplace(|c| c / no);

    let code = CodeSpec { zero_l, one_l, error_spaces: vec![ErrorSpace { e_zero, e_one }] };
    code.validate()?;
    Ok(code)
}

/// Gaussian elimination with partial pivoting for the small moment systems.
fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::Numerical("singular moment system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Binomial closed form for the generator's weights: C(2S, 2k)/2^(2S−1).
pub fn binomial_code_weights(s: f64) -> Vec<f64> {
    let two_s = (2.0 * s).round() as u64;
    let k_count = ((two_s + 1) / 2) as usize;
    let binom = |n: u64, r: u64| -> f64 {
        let mut acc = 1.0f64;
        for i in 0..r {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc
    };
    (0..k_count)
        .map(|k| binom(two_s, 2 * k as u64) / 2f64.powi(two_s as i32 - 1))
        .collect()
}

// ---------------------------------------------------------------------------
// Nuclear-qudit amplitude-shift code
// ---------------------------------------------------------------------------

/// The I = 5/2 ⊗ s = 1/2 amplitude-shift code: |0L⟩ = |−3/2, ↓⟩,
/// |1L⟩ = |+3/2, ↓⟩, protecting against single nuclear shifts
/// E± = Σ_m |m±1⟩⟨m|. Basis: nuclear index 0 ↔ m = 5/2 descending,
/// electron ↓ = index 1, flat = 2·idx_n + idx_e.
pub fn amplitude_code() -> CodeSpec {
    let flat = |idx_n: usize, idx_e: usize| 2 * idx_n + idx_e;
    let basis = |idx_n: usize| {
        let mut v = Array1::<C64>::zeros(12);
        v[flat(idx_n, 1)] = cr(1.0);
        v
    };
    // nuclear indices: m = 5/2, 3/2, 1/2, −1/2, −3/2, −5/2 → 0..5
    let zero_l = basis(4); // |−3/2, ↓⟩
    let one_l = basis(1); // |+3/2, ↓⟩
    let minus = ErrorSpace { e_zero: basis(5), e_one: basis(2) }; // E₋ images
    let plus = ErrorSpace { e_zero: basis(3), e_one: basis(0) }; // E₊ images
    CodeSpec { zero_l, one_l, error_spaces: vec![minus, plus] }
}

/// Unweighted nuclear shift operators E± = Σ_m |m±1⟩⟨m| ⊗ 1 on the
/// I = 5/2 ⊗ s = 1/2 space.
pub fn amplitude_shift_errors() -> Result<(Operator, Operator)> {
    let mut up = Array2::<C64>::zeros((6, 6));
    for idx in 1..6 {
        // idx ↔ m, idx − 1 ↔ m + 1 in the descending basis
        up[(idx - 1, idx)] = cr(1.0);
    }
    let e_plus = Operator::new(up)?.kron(&Operator::identity(2));
    let mut down = Array2::<C64>::zeros((6, 6));
    for idx in 0..5 {
        down[(idx + 1, idx)] = cr(1.0);
    }
    let e_minus = Operator::new(down)?.kron(&Operator::identity(2));
    Ok((e_plus, e_minus))
}

/// Outcome of one amplitude-code detection/correction cycle.
#[derive(Debug, Clone)]
pub struct AmplitudeCycleReport {
    /// Round-1 flag: a downward shift (E₋) was detected.
    pub shift_down_detected: bool,
    /// Round-2 flag: an upward shift (E₊) was detected.
    pub shift_up_detected: bool,
    /// State after correction, electron reset to |↓⟩.
    pub state: DensityMatrix,
    /// Weight found outside the code and both error spaces.
    pub unrecoverable_weight: f64,
}

/// Two-round ancilla-only error detection on the amplitude code: round 1
/// flips the electron conditioned on the nuclear level sitting in the E₋
/// image {−5/2, 1/2} and measures it; round 2 repeats for the E₊ image
/// {−1/2, 5/2}. A flagged round applies the inverse nuclear shift on the
/// affected levels. The nuclear register is never measured directly, so
/// logical superpositions survive.
pub fn amplitude_code_cycle(rho: &DensityMatrix) -> Result<AmplitudeCycleReport> {
    if rho.dim() != 12 {
        return Err(Error::DimensionMismatch(format!(
            "amplitude-code state must have dim 12 (I = 5/2 ⊗ s = 1/2), got {}",
            rho.dim()
        )));
    }
    let reg = SpinRegister::new(vec![
        crate::spin::SpinSite::nuclear(2.5, "nucleus"),
        crate::spin::SpinSite::electronic(0.5, "electron"),
    ])?;
    let code = amplitude_code();

    let conditional_flip = |levels: &[usize]| -> Result<Operator> {
        let sigma_x = spin_operators(0.5)?.sx.scale(cr(2.0));
        let mut m = Array2::<C64>::zeros((12, 12));
        for lvl in 0..6 {
            for (a, b) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
                let entry = if levels.contains(&lvl) {
                    sigma_x.get(a, b)
                } else if a == b {
                    cr(1.0)
                } else {
                    cr(0.0)
                };
                m[(2 * lvl + a, 2 * lvl + b)] = entry;
            }
        }
        Operator::new(m)
    };
    // inverse shift on the flagged levels, as a pair swap (unitary)
    let pair_swap = |pairs: &[(usize, usize)]| -> Result<Operator> {
        let mut m = Array2::<C64>::eye(6);
        for &(i, j) in pairs {
            m[(i, i)] = cr(0.0);
            m[(j, j)] = cr(0.0);
            m[(i, j)] = cr(1.0);
            m[(j, i)] = cr(1.0);
        }
        Ok(Operator::new(m)?.kron(&Operator::identity(2)))
    };

    let mut state = rho.clone();
    let mut flags = [false, false];
    // round 1: E₋ image {−5/2 (idx 5), 1/2 (idx 2)}; undo with idx 5→4, 2→1
    // round 2: E₊ image {−1/2 (idx 3), 5/2 (idx 0)}; undo with idx 3→4, 0→1
    let rounds: [(&[usize], &[(usize, usize)]); 2] =
        [(&[5, 2], &[(5, 4), (2, 1)]), (&[3, 0], &[(3, 4), (0, 1)])];
    for (round, (levels, pairs)) in rounds.iter().enumerate() {
        let probe = state.apply_unitary(&conditional_flip(levels)?)?;
        // electron-only measurement; follow the dominant branch
        let mut p_up = 0.0;
        for lvl in 0..6 {
            p_up += probe.get(2 * lvl, 2 * lvl).re;
        }
        let flagged = p_up > 0.5;
        flags[round] = flagged;
        let (_, collapsed) = collapse_z(&probe, 1, if flagged { 0 } else { 1 }, &reg)?;
        state = if flagged {
            // undo the shift, then return the electron to |↓⟩
            let fixed = collapsed.apply_unitary(&pair_swap(pairs)?)?;
            let sigma_x = spin_operators(0.5)?.sx.scale(cr(2.0));
            fixed.apply_unitary(&embed(&sigma_x, 1, &reg)?)?
        } else {
            collapsed
        };
    }

    // weight outside code ∪ error spaces, measured before correction
    let mut captured_proj = code.code_projector();
    for es in &code.error_spaces {
        captured_proj = &captured_proj + &projector(&[&es.e_zero, &es.e_one]);
    }
    let unrecoverable = (1.0 - rho.expectation(&captured_proj)?).max(0.0);

    Ok(AmplitudeCycleReport {
        shift_down_detected: flags[0],
        shift_up_detected: flags[1],
        state,
        unrecoverable_weight: unrecoverable,
    })
}

// ---------------------------------------------------------------------------
// Encoded-memory experiment
// ---------------------------------------------------------------------------

/// One point of the encoded-vs-bare memory comparison.
#[derive(Debug, Clone, Copy)]
pub struct MemoryPoint {
    /// Storage time, ns.
    pub t_mem: f64,
    /// 1 − ⟨+L|ρ|+L⟩ after encoded storage with periodic correction.
    pub error_corrected: f64,
    /// (1 − e^{−T/T₂})/2: the bare-qubit |+⟩ error over the same time.
    pub error_reference: f64,
}

/// Store |+L⟩ in the spin-3/2 code under pure qudit dephasing (time
/// constant `t2`) for a total idle time `t_mem` split into `cycles`
/// correction cycles. Each cycle idles for t_mem/cycles, then applies the
/// recovery channel inside a correction window of `tau_pulse` ns that
/// itself dephases (split symmetrically around the recovery). The bare
/// reference is an uncorrected spin-1/2 |+⟩ held for the same `t_mem`.
pub fn qec_memory_experiment(
    t_mem: f64,
    cycles: usize,
    tau_pulse: f64,
    t2: f64,
) -> Result<MemoryPoint> {
    if cycles == 0 {
        return Err(Error::InvalidArgument("at least one correction cycle".into()));
    }
    if !(t_mem > 0.0) || !(t2 > 0.0) || tau_pulse < 0.0 {
        return Err(Error::InvalidArgument(
            "memory experiment needs t_mem > 0, T₂ > 0, τ_pulse ≥ 0".into(),
        ));
    }
    let code = spin32_code();
    let plus_l = code.logical_state(cr(1.0), cr(1.0));
    let mut rho = DensityMatrix::from_pure(&plus_l)?;
    let idle = t_mem / cycles as f64;
    for _ in 0..cycles {
        rho = qudit_dephasing(&rho, 1.5, idle, t2)?;
        if tau_pulse > 0.0 {
            rho = qudit_dephasing(&rho, 1.5, 0.5 * tau_pulse, t2)?;
        }
        let (recovered, _) = code.recover(&rho)?;
        rho = recovered;
        if tau_pulse > 0.0 {
            rho = qudit_dephasing(&rho, 1.5, 0.5 * tau_pulse, t2)?;
        }
    }
    let error_corrected = 1.0 - rho.fidelity_with_pure(&plus_l)?;
    let error_reference = 0.5 * (1.0 - (-t_mem / t2).exp());
    Ok(MemoryPoint { t_mem, error_corrected, error_reference })
}
