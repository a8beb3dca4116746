//! Simulated quantum channel between a participant and TP.
//!
//! Every physical qubit lives in a [`QuantumRegistry`] system: one joint
//! statevector per GHZ carrier, one per decoy photon, and whatever ancillas
//! an eavesdropper attaches. Sequences hold [`QubitRef`] handles into it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, AttackKind, EveRecord};
use crate::error::{invalid, Result};
use crate::quantum::{Basis, DecoyKind, StateVector, TwoQubitUnitary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemId(usize);

/// A single physical qubit: one position inside a registry system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QubitRef {
    pub system: SystemId,
    pub qubit: usize,
}

/// Owner of all joint quantum systems in one protocol session.
#[derive(Debug, Default, Clone)]
pub struct QuantumRegistry {
    systems: Vec<StateVector>,
}

impl QuantumRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, state: StateVector) -> SystemId {
        self.systems.push(state);
        SystemId(self.systems.len() - 1)
    }

    pub fn state(&self, id: SystemId) -> &StateVector {
        &self.systems[id.0]
    }

    pub fn system_count(&self) -> usize {
        self.systems.len()
    }

    /// Handles for every qubit of a system, in qubit order.
    pub fn qubits_of(&self, id: SystemId) -> impl Iterator<Item = QubitRef> {
        (0..self.state(id).qubit_count()).map(move |qubit| QubitRef { system: id, qubit })
    }

    pub fn outcome_probability(&self, q: QubitRef, basis: Basis, bit: bool) -> Result<f64> {
        self.state(q.system).outcome_probability(q.qubit, basis, bit)
    }

    /// Measures `q` and replaces its system with the collapsed state.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: QubitRef, basis: Basis, rng: &mut R) -> Result<bool> {
        let out = self.systems[q.system.0].measure_qubit(q.qubit, basis, rng)?;
        self.systems[q.system.0] = out.collapsed;
        Ok(out.bit)
    }

    /// Appends `ancilla` to the system holding `q` and returns a handle to it.
    pub fn attach(&mut self, q: QubitRef, ancilla: &StateVector) -> Result<QubitRef> {
        let system = &mut self.systems[q.system.0];
        let qubit = system.qubit_count();
        *system = system.tensor(ancilla)?;
        Ok(QubitRef { system: q.system, qubit })
    }

    pub fn apply_pair(&mut self, data: QubitRef, ancilla: QubitRef, u: &TwoQubitUnitary) -> Result<()> {
        if data.system != ancilla.system {
            return Err(invalid("two-qubit gate needs both qubits in one joint system"));
        }
        let system = &mut self.systems[data.system.0];
        *system = system.apply_two_qubit_unitary(data.qubit, ancilla.qubit, u)?;
        Ok(())
    }
}

/// What a transmitted particle is, as known to its sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParticleKind {
    Carrier { group: usize, qubit: usize },
    Decoy { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParticleRef {
    pub kind: ParticleKind,
    pub handle: QubitRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoyEntry {
    pub position: usize,
    pub basis: Basis,
    pub bit: bool,
}

impl DecoyEntry {
    pub fn kind(&self) -> DecoyKind {
        DecoyKind::from_basis_bit(self.basis, self.bit)
    }
}

/// Sender-private record of where the decoys sit; announced after receipt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoyPlacement {
    pub entries: Vec<DecoyEntry>,
}

impl DecoyPlacement {
    pub fn positions(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.position).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A particle sequence with decoys mixed in.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmittedSequence {
    pub particles: Vec<ParticleRef>,
    pub placement: DecoyPlacement,
}

impl TransmittedSequence {
    /// The physical stream as an interceptor sees it: handles only, no labels.
    pub fn wire(&self) -> Vec<QubitRef> {
        self.particles.iter().map(|p| p.handle).collect()
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    fn with_wire(&self, wire: Vec<QubitRef>) -> Result<Self> {
        if wire.len() != self.particles.len() {
            return Err(invalid(format!(
                "channel delivered {} particles for {} sent",
                wire.len(),
                self.particles.len()
            )));
        }
        let particles = self
            .particles
            .iter()
            .zip(wire)
            .map(|(p, handle)| ParticleRef { kind: p.kind, handle })
            .collect();
        Ok(Self { particles, placement: self.placement.clone() })
    }
}

/// Orders the qubits of each carrier group consecutively: `a_1^0..a_1^n, a_2^0..`.
pub fn carrier_sequence(registry: &QuantumRegistry, carriers: &[SystemId]) -> Vec<ParticleRef> {
    carriers
        .iter()
        .enumerate()
        .flat_map(|(group, &id)| {
            registry.qubits_of(id).map(move |handle| ParticleRef {
                kind: ParticleKind::Carrier { group, qubit: handle.qubit },
                handle,
            })
        })
        .collect()
}

/// Inserts `decoy_count` random decoy photons, each at a uniformly random
/// position of the sequence built so far.
pub fn insert_decoys<R: Rng + ?Sized>(
    carriers: Vec<ParticleRef>,
    decoy_count: usize,
    registry: &mut QuantumRegistry,
    rng: &mut R,
) -> TransmittedSequence {
    let mut particles = carriers;
    let mut kinds = Vec::with_capacity(decoy_count);
    for index in 0..decoy_count {
        let kind = DecoyKind::random(rng);
        kinds.push(kind);
        let id = registry.add(StateVector::prepare_decoy(kind));
        let position = rng.random_range(0..=particles.len());
        particles.insert(
            position,
            ParticleRef { kind: ParticleKind::Decoy { index }, handle: QubitRef { system: id, qubit: 0 } },
        );
    }
    let entries = particles
        .iter()
        .enumerate()
        .filter_map(|(position, p)| match p.kind {
            ParticleKind::Decoy { index } => Some(DecoyEntry {
                position,
                basis: kinds[index].basis(),
                bit: kinds[index].bit(),
            }),
            ParticleKind::Carrier { .. } => None,
        })
        .collect();
    TransmittedSequence { particles, placement: DecoyPlacement { entries } }
}

/// Sequence as it reaches TP, plus the eavesdropper's notes if one acted.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub received: TransmittedSequence,
    pub eve: Option<EveRecord>,
}

/// Sends a sequence through the channel. The adversary only ever sees
/// [`TransmittedSequence::wire`].
pub fn transmit<R: Rng + ?Sized>(
    seq: &TransmittedSequence,
    attack: &AttackKind,
    registry: &mut QuantumRegistry,
    rng: &mut R,
) -> Result<Transmission> {
    let wire = seq.wire();
    let (forwarded, eve) = match attack {
        AttackKind::None => return Ok(Transmission { received: seq.clone(), eve: None }),
        AttackKind::InterceptResend => adversary::intercept_resend(&wire, registry, rng)?,
        AttackKind::MeasurementResend => adversary::measurement_resend(&wire, registry, rng)?,
        AttackKind::EntangleMeasure(attack) => adversary::entangle_measure(&wire, attack, registry)?,
    };
    Ok(Transmission { received: seq.with_wire(forwarded)?, eve: Some(eve) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EavesdropCheck {
    pub decoys: usize,
    pub mismatches: usize,
    pub error_rate: f64,
    pub pass: bool,
}

/// TP measures each announced decoy in its announced basis and compares with
/// the sender's preparation bit.
pub fn check_eavesdropping<R: Rng + ?Sized>(
    received: &TransmittedSequence,
    placement: &DecoyPlacement,
    threshold: f64,
    registry: &mut QuantumRegistry,
    rng: &mut R,
) -> Result<EavesdropCheck> {
    let mut mismatches = 0;
    for entry in &placement.entries {
        let particle = received.particles.get(entry.position).ok_or_else(|| {
            invalid(format!(
                "announced decoy position {} outside a {}-particle sequence",
                entry.position,
                received.len()
            ))
        })?;
        if registry.measure(particle.handle, entry.basis, rng)? != entry.bit {
            mismatches += 1;
        }
    }
    let decoys = placement.len();
    let error_rate = if decoys == 0 { 0.0 } else { mismatches as f64 / decoys as f64 };
    Ok(EavesdropCheck { decoys, mismatches, error_rate, pass: error_rate <= threshold })
}

/// The handles left after removing the announced decoy positions, in order.
pub fn strip_decoys(received: &TransmittedSequence, placement: &DecoyPlacement) -> Vec<QubitRef> {
    let mut decoy_positions = placement.positions();
    decoy_positions.sort_unstable();
    received
        .particles
        .iter()
        .enumerate()
        .filter(|(i, _)| decoy_positions.binary_search(i).is_err())
        .map(|(_, p)| p.handle)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitString;
    use crate::rng::seeded;

    fn six_carriers(registry: &mut QuantumRegistry) -> Vec<ParticleRef> {
        let a = registry.add(StateVector::make_ghz(&"01".parse::<BitString>().unwrap()).unwrap());
        let b = registry.add(StateVector::make_ghz(&"11".parse::<BitString>().unwrap()).unwrap());
        carrier_sequence(registry, &[a, b])
    }

    #[test]
    fn zero_decoys_leaves_sequence_unchanged() {
        let mut reg = QuantumRegistry::new();
        let carriers = six_carriers(&mut reg);
        let seq = insert_decoys(carriers.clone(), 0, &mut reg, &mut seeded(1));
        assert_eq!(seq.particles, carriers);
        assert!(seq.placement.is_empty());
    }

    #[test]
    fn removing_decoys_restores_order() {
        let mut reg = QuantumRegistry::new();
        let carriers = six_carriers(&mut reg);
        let seq = insert_decoys(carriers.clone(), 4, &mut reg, &mut seeded(2));
        assert_eq!(seq.len(), 10);
        let positions = seq.placement.positions();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        let stripped = strip_decoys(&seq, &seq.placement);
        let expected: Vec<QubitRef> = carriers.iter().map(|p| p.handle).collect();
        assert_eq!(stripped, expected);
        for e in &seq.placement.entries {
            assert!(matches!(seq.particles[e.position].kind, ParticleKind::Decoy { .. }));
        }
    }

    #[test]
    fn decoy_kinds_are_uniform() {
        let mut rng = seeded(3);
        let trials = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            let mut reg = QuantumRegistry::new();
            let seq = insert_decoys(Vec::new(), 1, &mut reg, &mut rng);
            let kind = seq.placement.entries[0].kind();
            counts[DecoyKind::ALL.iter().position(|&k| k == kind).unwrap()] += 1;
        }
        let sigma = (0.25f64 * 0.75 / trials as f64).sqrt();
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((f - 0.25).abs() <= 3.0 * sigma, "frequency {f}");
        }
    }

    #[test]
    fn honest_transmission_passes_check() {
        let mut reg = QuantumRegistry::new();
        let mut rng = seeded(4);
        let carriers = six_carriers(&mut reg);
        let seq = insert_decoys(carriers, 64, &mut reg, &mut rng);
        let before: Vec<StateVector> = (0..reg.system_count()).map(|i| reg.state(SystemId(i)).clone()).collect();
        let tx = transmit(&seq, &AttackKind::None, &mut reg, &mut rng).unwrap();
        assert!(tx.eve.is_none());
        assert_eq!(tx.received, seq);
        for (i, s) in before.iter().enumerate() {
            assert_eq!(reg.state(SystemId(i)), s);
        }
        let check = check_eavesdropping(&tx.received, &seq.placement, 0.0, &mut reg, &mut rng).unwrap();
        assert_eq!(check.mismatches, 0);
        assert_eq!(check.error_rate, 0.0);
        assert!(check.pass);
        // carriers untouched by the check
        assert_eq!(reg.state(SystemId(0)), &before[0]);
        assert_eq!(reg.state(SystemId(1)), &before[1]);
    }

    #[test]
    fn empty_placement_has_zero_error_rate() {
        let mut reg = QuantumRegistry::new();
        let seq = insert_decoys(six_carriers(&mut reg), 0, &mut reg, &mut seeded(5));
        let check = check_eavesdropping(&seq, &seq.placement, 0.0, &mut reg, &mut seeded(6)).unwrap();
        assert_eq!(check.error_rate, 0.0);
        assert!(check.pass);
    }

    #[test]
    fn bad_announcement_is_rejected() {
        let mut reg = QuantumRegistry::new();
        let seq = insert_decoys(six_carriers(&mut reg), 0, &mut reg, &mut seeded(7));
        let placement = DecoyPlacement {
            entries: vec![DecoyEntry { position: 99, basis: Basis::Z, bit: false }],
        };
        assert!(check_eavesdropping(&seq, &placement, 0.0, &mut reg, &mut seeded(8)).is_err());
    }
}
