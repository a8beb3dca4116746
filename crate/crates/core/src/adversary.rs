//! External eavesdropping strategies against the participant→TP channels,
//! the no-disturbance conditions on an entangling probe, and what Eve can
//! extract from her records.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::channel::{QuantumRegistry, QubitRef};
use crate::error::{invalid, Result};
use crate::protocol::{self, Party};
use crate::quantum::{random_matrix2, Basis, DecoyKind, StateVector, TwoQubitUnitary, UNITARY_TOL};

/// Entangling probe: one ancilla `|0>` per intercepted qubit, coupled by `unitary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglingAttack {
    pub unitary: TwoQubitUnitary,
    /// Optional overrides for the first positions of the stream.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_position: Vec<TwoQubitUnitary>,
}

impl EntanglingAttack {
    pub fn new(unitary: TwoQubitUnitary) -> Self {
        Self { unitary, per_position: Vec::new() }
    }

    pub fn unitary_for(&self, position: usize) -> &TwoQubitUnitary {
        self.per_position.get(position).unwrap_or(&self.unitary)
    }

    fn unitaries(&self) -> impl Iterator<Item = &TwoQubitUnitary> {
        std::iter::once(&self.unitary).chain(&self.per_position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum AttackKind {
    None,
    /// Eve reads each particle in the public Z coding basis, keeps what she
    /// read and forwards a freshly prepared `|bit>` in its place.
    InterceptResend,
    /// Eve measures each particle in a uniformly random basis and forwards it.
    MeasurementResend,
    EntangleMeasure(EntanglingAttack),
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::InterceptResend => "intercept_resend",
            AttackKind::MeasurementResend => "measurement_resend",
            AttackKind::EntangleMeasure(_) => "entangle_measure",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackTarget {
    AliceChannel,
    BobChannel,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    pub kind: AttackKind,
    pub target: AttackTarget,
}

impl AttackModel {
    pub fn honest() -> Self {
        Self { kind: AttackKind::None, target: AttackTarget::Both }
    }

    pub fn new(kind: AttackKind, target: AttackTarget) -> Self {
        Self { kind, target }
    }

    /// The attack Eve mounts on `party`'s channel.
    pub fn on_channel(&self, party: Party) -> &AttackKind {
        let hit = matches!(
            (self.target, party),
            (AttackTarget::Both, _) | (AttackTarget::AliceChannel, Party::Alice) | (AttackTarget::BobChannel, Party::Bob)
        );
        if hit {
            &self.kind
        } else {
            &AttackKind::None
        }
    }
}

impl Default for AttackModel {
    fn default() -> Self {
        Self::honest()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EveEntry {
    Measured { basis: Basis, bit: bool },
    Ancilla { handle: QubitRef },
}

/// Eve's notes for one channel, one entry per particle on the wire.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EveRecord {
    pub entries: Vec<EveEntry>,
    /// Distinct probes used; empty unless the attack was entangling.
    pub unitaries: Vec<TwoQubitUnitary>,
    /// Raw `(n+1)`-bit reading per carrier group, filled by [`extract_readouts`].
    pub readouts: Vec<BitString>,
}

impl EveRecord {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ancillas(&self) -> impl Iterator<Item = QubitRef> + '_ {
        self.entries.iter().filter_map(|e| match e {
            EveEntry::Ancilla { handle } => Some(*handle),
            EveEntry::Measured { .. } => None,
        })
    }
}

pub fn intercept_resend<R: Rng + ?Sized>(
    wire: &[QubitRef],
    registry: &mut QuantumRegistry,
    rng: &mut R,
) -> Result<(Vec<QubitRef>, EveRecord)> {
    let mut forwarded = Vec::with_capacity(wire.len());
    let mut record = EveRecord::default();
    for &q in wire {
        let bit = registry.measure(q, Basis::Z, rng)?;
        record.entries.push(EveEntry::Measured { basis: Basis::Z, bit });
        let fake = registry.add(StateVector::basis_state(1, usize::from(bit))?);
        forwarded.push(QubitRef { system: fake, qubit: 0 });
    }
    Ok((forwarded, record))
}

pub fn measurement_resend<R: Rng + ?Sized>(
    wire: &[QubitRef],
    registry: &mut QuantumRegistry,
    rng: &mut R,
) -> Result<(Vec<QubitRef>, EveRecord)> {
    let mut record = EveRecord::default();
    for &q in wire {
        let basis = if rng.random::<bool>() { Basis::X } else { Basis::Z };
        let bit = registry.measure(q, basis, rng)?;
        record.entries.push(EveEntry::Measured { basis, bit });
    }
    Ok((wire.to_vec(), record))
}

pub fn entangle_measure(
    wire: &[QubitRef],
    attack: &EntanglingAttack,
    registry: &mut QuantumRegistry,
) -> Result<(Vec<QubitRef>, EveRecord)> {
    let ancilla = StateVector::basis_state(1, 0)?;
    let mut record = EveRecord::default();
    for u in attack.unitaries() {
        if u.unitarity_deviation() > UNITARY_TOL {
            return Err(invalid("entangling probe is not unitary"));
        }
        if !record.unitaries.contains(u) {
            record.unitaries.push(u.clone());
        }
    }
    for (position, &q) in wire.iter().enumerate() {
        let handle = registry.attach(q, &ancilla)?;
        registry.apply_pair(q, handle, attack.unitary_for(position))?;
        record.entries.push(EveEntry::Ancilla { handle });
    }
    Ok((wire.to_vec(), record))
}

/// Once decoy positions are public, Eve keeps the entries for carrier
/// positions and reads them group by group. Ancillas are measured in Z.
pub fn extract_readouts<R: Rng + ?Sized>(
    record: &mut EveRecord,
    announced_decoys: &[usize],
    carrier_width: usize,
    registry: &mut QuantumRegistry,
    rng: &mut R,
) -> Result<()> {
    if carrier_width == 0 {
        return Err(invalid("carrier width must be positive"));
    }
    let mut bits = Vec::new();
    for (position, entry) in record.entries.iter().enumerate() {
        if announced_decoys.contains(&position) {
            continue;
        }
        bits.push(match entry {
            EveEntry::Measured { bit, .. } => *bit,
            EveEntry::Ancilla { handle } => registry.measure(*handle, Basis::Z, rng)?,
        });
    }
    record.readouts = bits.chunks(carrier_width).map(|c| BitString::new(c.to_vec())).collect();
    Ok(())
}

/// Eve's estimate of a plaintext group from her reading and a guessed mask bit.
pub fn guess_group(readout: &BitString, mask: bool) -> Result<BitString> {
    Ok(protocol::tp_decode(readout, false)?.m2_prime.flip_if(mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveInformation {
    /// Fraction of groups reconstructed exactly.
    pub guess_success_rate: f64,
    /// Whether every group was reconstructed.
    pub secret_recovered: bool,
    /// Largest ancilla distinguishability over the probes used, if any.
    pub ancilla_distinguishability: Option<f64>,
}

/// Scores Eve's best guess against the true plaintext groups. She does not
/// know the bit-flip masks, so each is guessed uniformly.
pub fn eve_information<R: Rng + ?Sized>(
    record: &EveRecord,
    truth: &[BitString],
    rng: &mut R,
) -> Result<EveInformation> {
    let distinguishability = record
        .unitaries
        .iter()
        .map(ancilla_distinguishability)
        .reduce(f64::max);
    if record.readouts.is_empty() || truth.is_empty() {
        return Ok(EveInformation {
            guess_success_rate: 0.0,
            secret_recovered: false,
            ancilla_distinguishability: distinguishability,
        });
    }
    let mut hits = 0;
    for (readout, group) in record.readouts.iter().zip(truth) {
        if &guess_group(readout, rng.random())? == group {
            hits += 1;
        }
    }
    Ok(EveInformation {
        guess_success_rate: hits as f64 / truth.len() as f64,
        secret_recovered: hits == truth.len() && record.readouts.len() == truth.len(),
        ancilla_distinguishability: distinguishability,
    })
}

/// The ancilla-space vectors `λ_ab|ε_ab>` from `U|a>|0> = Σ_b |b> ⊗ λ_ab|ε_ab>`.
fn ancilla_components(u: &TwoQubitUnitary) -> [[[Complex64; 2]; 2]; 2] {
    let mut out = [[[Complex64::new(0.0, 0.0); 2]; 2]; 2];
    for (a, row) in out.iter_mut().enumerate() {
        let col = u.column(2 * a);
        for (b, v) in row.iter_mut().enumerate() {
            *v = [col[2 * b], col[2 * b + 1]];
        }
    }
    out
}

fn norm2(v: &[Complex64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub lambda_01_mag: f64,
    pub lambda_10_mag: f64,
    /// `‖λ00|ε00> − λ11|ε11>‖`.
    pub cross_term_distance: f64,
    pub satisfied: bool,
}

/// Checks whether a probe can pass every decoy check: it must not flip Z
/// eigenstates and must leave the ancilla in the same state for `|0>` and `|1>`.
pub fn check_constraints(u: &TwoQubitUnitary) -> Result<ConstraintReport> {
    let deviation = u.unitarity_deviation();
    if deviation.is_nan() || deviation > UNITARY_TOL {
        return Err(crate::QpcError::NotUnitary { deviation });
    }
    let c = ancilla_components(u);
    let lambda_01_mag = norm2(&c[0][1]);
    let lambda_10_mag = norm2(&c[1][0]);
    let diff = [c[0][0][0] - c[1][1][0], c[0][0][1] - c[1][1][1]];
    let cross_term_distance = norm2(&diff);
    let satisfied = [lambda_01_mag, lambda_10_mag, cross_term_distance]
        .iter()
        .all(|&x| x <= UNITARY_TOL);
    Ok(ConstraintReport { lambda_01_mag, lambda_10_mag, cross_term_distance, satisfied })
}

/// Trace distance between Eve's reduced ancilla states for data `|0>` and `|1>`.
pub fn ancilla_distinguishability(u: &TwoQubitUnitary) -> f64 {
    let c = ancilla_components(u);
    let rho = |a: usize| {
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for v in &c[a] {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += v[i] * v[j].conj();
                }
            }
        }
        m
    };
    let (r0, r1) = (rho(0), rho(1));
    let d00 = 0.5 * ((r0[0][0] - r1[0][0]) - (r0[1][1] - r1[1][1])).re;
    let d01 = r0[0][1] - r1[0][1];
    (d00 * d00 + d01.norm_sqr()).sqrt().min(1.0)
}

/// Exact probability that one decoy of `decoy` kind fails its check under `attack`.
pub fn decoy_error_probability(attack: &AttackKind, decoy: DecoyKind) -> Result<f64> {
    let prepared = StateVector::prepare_decoy(decoy);
    let (basis, bit) = (decoy.basis(), decoy.bit());
    let wrong = |s: &StateVector, qubit: usize| s.outcome_probability(qubit, basis, !bit);
    match attack {
        AttackKind::None => wrong(&prepared, 0),
        AttackKind::InterceptResend => {
            let mut p = 0.0;
            for read in [false, true] {
                let p_read = prepared.outcome_probability(0, Basis::Z, read)?;
                if p_read > 0.0 {
                    let fake = StateVector::basis_state(1, usize::from(read))?;
                    p += p_read * wrong(&fake, 0)?;
                }
            }
            Ok(p)
        }
        AttackKind::MeasurementResend => {
            let mut p = 0.0;
            for eve_basis in [Basis::Z, Basis::X] {
                for read in [false, true] {
                    let p_read = prepared.outcome_probability(0, eve_basis, read)?;
                    if p_read > 0.0 {
                        let collapsed = prepared.project(0, eve_basis, read)?;
                        p += 0.5 * p_read * wrong(&collapsed, 0)?;
                    }
                }
            }
            Ok(p)
        }
        AttackKind::EntangleMeasure(attack) => {
            let joint = prepared.tensor(&StateVector::basis_state(1, 0)?)?;
            let mut worst: f64 = 0.0;
            for u in attack.unitaries() {
                worst = worst.max(wrong(&joint.apply_two_qubit_unitary(0, 1, u)?, 0)?);
            }
            Ok(worst)
        }
    }
}

/// Per-decoy error probability averaged over the four equally likely decoy kinds.
pub fn mean_decoy_error_probability(attack: &AttackKind) -> Result<f64> {
    let mut total = 0.0;
    for kind in DecoyKind::ALL {
        total += decoy_error_probability(attack, kind)?;
    }
    Ok(total / 4.0)
}

/// Probability that at least one of `decoys` independent decoys shows an error.
pub fn detection_probability(per_decoy_error: f64, decoys: usize) -> f64 {
    1.0 - (1.0 - per_decoy_error).powi(decoys as i32)
}

/// A random probe obeying the no-disturbance conditions:
/// `U|a>|0> = |a> ⊗ |w>` for a random ancilla state `|w>`, completed to a
/// unitary by a random rotation of the orthogonal complement.
pub fn random_constraint_satisfying<R: Rng + ?Sized>(rng: &mut R) -> TwoQubitUnitary {
    let zero = Complex64::new(0.0, 0.0);
    let w = random_matrix2(rng);
    let (w0, w1) = (w[0][0], w[1][0]);
    let (p0, p1) = (w[0][1], w[1][1]);
    let v = random_matrix2(rng);
    let phase = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    let mut cols = [[zero; 4]; 4];
    cols[0] = [w0, w1, zero, zero];
    cols[2] = [zero, zero, w0, w1];
    let perp0 = [p0, p1, zero, zero];
    let perp1 = [zero, zero, p0, p1];
    for (slot, k) in [(1usize, 0usize), (3, 1)] {
        for r in 0..4 {
            cols[slot][r] = v[0][k] * perp0[r] + v[1][k] * perp1[r];
        }
    }
    let mut m = [[zero; 4]; 4];
    for (c, col) in cols.iter().enumerate() {
        for r in 0..4 {
            m[r][c] = phase * col[r];
        }
    }
    TwoQubitUnitary::new(m).expect("construction yields a unitary")
}
