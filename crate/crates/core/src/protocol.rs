//! Classical side of the comparison protocol and the end-to-end session.
//!
//! Alice and Bob split their secrets into `n`-bit groups, bit-flip each group
//! under a key-derived mask, and ship every group to TP as an `(n+1)`-qubit
//! GHZ carrier with decoy photons mixed in. TP checks the decoys, measures
//! the carriers in Z, undoes what it can of the masking and compares.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, AttackModel, EveRecord};
use crate::bits::BitString;
use crate::channel::{self, EavesdropCheck, QuantumRegistry, QubitRef, SystemId};
use crate::error::{invalid, Result};
use crate::quantum::{Basis, StateVector, UNITARY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub const BOTH: [Party; 2] = [Party::Alice, Party::Bob];
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
        })
    }
}

/// A participant's private value, bits `x_1..x_N` with `x_1` least significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Secret {
    bits: BitString,
}

impl Secret {
    /// Takes bits in index order `x_1, x_2, ..`.
    pub fn from_bits(bits: BitString) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("secret must have at least one bit"));
        }
        Ok(Self { bits })
    }

    pub fn from_value(value: u64, len: usize) -> Result<Self> {
        if len == 0 || len > 64 {
            return Err(invalid(format!("secret length {len} outside 1..=64")));
        }
        if len < 64 && value >> len != 0 {
            return Err(invalid(format!("value {value} does not fit in {len} bits")));
        }
        Ok(Self { bits: (0..len).map(|j| (value >> j) & 1 == 1).collect() })
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        Self::from_bits((0..len).map(|_| rng.random::<bool>()).collect())
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// `Σ x_j 2^(j-1)`, for secrets of at most 64 bits.
    pub fn value(&self) -> Option<u64> {
        (self.len() <= 64).then(|| {
            self.bits
                .iter()
                .enumerate()
                .fold(0u64, |acc, (j, b)| acc | (u64::from(b) << j))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedSecret {
    pub groups: Vec<BitString>,
    pub group_size: usize,
    pub original_length: usize,
}

impl GroupedSecret {
    pub fn padding(&self) -> usize {
        self.groups.len() * self.group_size - self.original_length
    }
}

pub fn group_count(secret_len: usize, group_size: usize) -> usize {
    secret_len.div_ceil(group_size)
}

fn check_group_size(secret_len: usize, group_size: usize) -> Result<()> {
    if group_size < 2 || group_size > secret_len {
        return Err(invalid(format!(
            "group size {group_size} must lie in [2, {secret_len}]"
        )));
    }
    Ok(())
}

/// Splits the secret into `n`-bit groups in index order, zero-padding the
/// tail of the last group to full width.
pub fn group_secret(secret: &Secret, group_size: usize) -> Result<GroupedSecret> {
    check_group_size(secret.len(), group_size)?;
    let groups = secret
        .bits()
        .bits()
        .chunks(group_size)
        .map(|chunk| {
            let mut g = chunk.to_vec();
            g.resize(group_size, false);
            BitString::new(g)
        })
        .collect();
    Ok(GroupedSecret { groups, group_size, original_length: secret.len() })
}

/// The three pairwise shared key sequences, one bit per group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub k_ab: BitString,
    pub k_ac: BitString,
    pub k_bc: BitString,
}

impl KeyMaterial {
    pub fn new(k_ab: BitString, k_ac: BitString, k_bc: BitString) -> Result<Self> {
        if k_ab.is_empty() || k_ab.len() != k_ac.len() || k_ab.len() != k_bc.len() {
            return Err(invalid("key sequences must be non-empty and of equal length"));
        }
        Ok(Self { k_ab, k_ac, k_bc })
    }

    pub fn group_count(&self) -> usize {
        self.k_ab.len()
    }

    /// Bit-flip mask a participant applies to group `i`.
    pub fn mask(&self, party: Party, i: usize) -> bool {
        self.k_ab[i] ^ self.tp_key(party, i)
    }

    /// The key bit `party` shares with TP for group `i`.
    pub fn tp_key(&self, party: Party, i: usize) -> bool {
        match party {
            Party::Alice => self.k_ac[i],
            Party::Bob => self.k_bc[i],
        }
    }
}

/// Ideal pre-shared keys, three independent uniform sequences.
pub fn generate_keys<R: Rng + ?Sized>(group_count: usize, rng: &mut R) -> Result<KeyMaterial> {
    if group_count == 0 {
        return Err(invalid("at least one group is required"));
    }
    let mut draw = || (0..group_count).map(|_| rng.random::<bool>()).collect::<BitString>();
    let k_ab = draw();
    let k_ac = draw();
    let k_bc = draw();
    KeyMaterial::new(k_ab, k_ac, k_bc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedGroup {
    pub bits: BitString,
}

pub fn encrypt_group(group: &BitString, mask: bool) -> EncryptedGroup {
    EncryptedGroup { bits: group.flip_if(mask) }
}

/// The `(n+1)`-qubit carrier; qubit 0 is the flag qubit.
pub fn prepare_carrier(encrypted: &EncryptedGroup) -> Result<StateVector> {
    StateVector::make_ghz(&encrypted.bits)
}

/// What TP derives from one measured carrier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TpDecodeRecord {
    pub m1: bool,
    pub m2: BitString,
    pub c: bool,
    pub m2_prime: BitString,
}

pub fn tp_decode(measured: &BitString, key_bit: bool) -> Result<TpDecodeRecord> {
    let (m1, m2) = measured
        .split_first()
        .filter(|(_, rest)| !rest.is_empty())
        .ok_or_else(|| invalid("a measured carrier has a flag bit and at least one data bit"))?;
    let c = m1 ^ key_bit;
    let m2_prime = m2.flip_if(c);
    Ok(TpDecodeRecord { m1, m2, c, m2_prime })
}

pub fn compare_groups(a: &BitString, b: &BitString) -> Result<(BitString, bool)> {
    let rc = a.xor(b)?;
    let equal = rc.is_all_zero();
    Ok((rc, equal))
}

/// TP's decoded records and per-group differences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TpComparison {
    pub alice: Vec<TpDecodeRecord>,
    pub bob: Vec<TpDecodeRecord>,
    pub rc: Vec<BitString>,
    pub equal: bool,
}

/// Decodes both sides' carrier measurements and compares group by group.
pub fn tp_compare(measured_a: &[BitString], measured_b: &[BitString], keys: &KeyMaterial) -> Result<TpComparison> {
    let groups = keys.group_count();
    if measured_a.len() != groups || measured_b.len() != groups {
        return Err(invalid(format!(
            "expected {groups} carriers per side, got {} and {}",
            measured_a.len(),
            measured_b.len()
        )));
    }
    let decode = |party: Party, measured: &[BitString]| -> Result<Vec<TpDecodeRecord>> {
        measured
            .iter()
            .enumerate()
            .map(|(i, m)| tp_decode(m, keys.tp_key(party, i)))
            .collect()
    };
    let alice = decode(Party::Alice, measured_a)?;
    let bob = decode(Party::Bob, measured_b)?;
    let mut rc = Vec::with_capacity(groups);
    let mut equal = true;
    for (a, b) in alice.iter().zip(&bob) {
        let (diff, same) = compare_groups(&a.m2_prime, &b.m2_prime)?;
        equal &= same;
        rc.push(diff);
    }
    Ok(TpComparison { alice, bob, rc, equal })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub secret_len: usize,
    pub group_size: usize,
    /// Decoys inserted into each participant's sequence.
    pub decoy_count: usize,
    /// Largest tolerated decoy error rate.
    pub threshold: f64,
}

impl ProtocolConfig {
    pub const DEFAULT_DECOYS: usize = 16;

    pub fn new(secret_len: usize, group_size: usize) -> Self {
        Self { secret_len, group_size, decoy_count: Self::DEFAULT_DECOYS, threshold: 0.0 }
    }

    pub fn with_decoys(mut self, decoy_count: usize) -> Self {
        self.decoy_count = decoy_count;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn group_count(&self) -> usize {
        group_count(self.secret_len, self.group_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.secret_len == 0 {
            return Err(invalid("secret length must be positive"));
        }
        check_group_size(self.secret_len, self.group_size)?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(invalid(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Equal,
    Unequal,
    Aborted,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Equal => "equal",
            Verdict::Unequal => "unequal",
            Verdict::Aborted => "aborted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Alice,
    Bob,
    Tp,
    Eve,
}

impl From<Party> for Actor {
    fn from(p: Party) -> Self {
        match p {
            Party::Alice => Actor::Alice,
            Party::Bob => Actor::Bob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Payload {
    KeysShared { groups: usize },
    SecretGrouped { groups: usize, padding: usize },
    GroupsEncrypted { groups: usize },
    CarriersPrepared { carriers: usize, qubits_per_carrier: usize },
    DecoysInserted { decoys: usize, sequence_len: usize },
    SequenceSent { to: Actor, particles: usize },
    Intercepted { channel: Party, attack: String, particles: usize },
    DecoysAnnounced { to: Actor, positions: Vec<usize>, bases: Vec<Basis> },
    DecoysChecked { channel: Party, mismatches: usize, error_rate: f64, passed: bool },
    Aborted { error_rate: f64 },
    CarriersRead { channel: Party, groups: usize },
    CarriersMeasured { channel: Party, groups: usize },
    Compared { rc: Vec<BitString> },
    VerdictAnnounced { verdict: Verdict },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub step: u8,
    pub actor: Actor,
    #[serde(flatten)]
    pub payload: Payload,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    pub events: Vec<TranscriptEvent>,
}

impl Transcript {
    fn push(&mut self, step: u8, actor: impl Into<Actor>, payload: Payload) {
        self.events.push(TranscriptEvent { step, actor: actor.into(), payload });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCheck {
    pub channel: Party,
    #[serde(flatten)]
    pub check: EavesdropCheck,
}

/// Eve's haul from one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EveChannelReport {
    pub channel: Party,
    pub record: EveRecord,
    /// For entangling probes: largest distance between a carrier group's
    /// joint state with Eve's ancillas and the nearest product state.
    pub max_factorization_residual: Option<f64>,
    /// For entangling probes: whether every carrier marginal was still the
    /// prepared GHZ state (up to phase).
    pub carriers_intact: Option<bool>,
}

/// Values only the simulator sees; kept for analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub keys: KeyMaterial,
    pub alice_groups: GroupedSecret,
    pub bob_groups: GroupedSecret,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub per_group_rc: Vec<BitString>,
    /// Decoy mismatches over decoys, pooled across both channels.
    pub eavesdrop_error_rate: f64,
    pub checks: Vec<ChannelCheck>,
    pub transcript: Transcript,
    /// TP's full view; absent when the session aborted before Step 6.
    #[serde(skip)]
    pub tp_view: Option<TpComparison>,
    #[serde(skip)]
    pub eve: Vec<EveChannelReport>,
    #[serde(skip)]
    pub truth: Option<GroundTruth>,
}

struct Sent {
    party: Party,
    sequence: channel::TransmittedSequence,
    carriers: Vec<SystemId>,
    prepared: Vec<StateVector>,
}

/// Runs one full session between Alice (`x`), Bob (`y`) and TP.
pub fn run_protocol<R: Rng + ?Sized>(
    config: &ProtocolConfig,
    x: &Secret,
    y: &Secret,
    attack: &AttackModel,
    rng: &mut R,
) -> Result<RunOutcome> {
    config.validate()?;
    if x.len() != config.secret_len || y.len() != config.secret_len {
        return Err(invalid(format!(
            "secrets of {} and {} bits for a {}-bit comparison",
            x.len(),
            y.len(),
            config.secret_len
        )));
    }
    let n = config.group_size;
    let mut log = Transcript::default();
    let mut registry = QuantumRegistry::new();

    // Step 1
    let keys = generate_keys(config.group_count(), rng)?;
    log.push(1, Actor::Alice, Payload::KeysShared { groups: keys.group_count() });

    // Steps 2-4 for each sender
    let mut grouped = Vec::with_capacity(2);
    let mut sent = Vec::with_capacity(2);
    for (party, secret) in [(Party::Alice, x), (Party::Bob, y)] {
        let groups = group_secret(secret, n)?;
        log.push(2, party, Payload::SecretGrouped { groups: groups.groups.len(), padding: groups.padding() });
        let encrypted: Vec<EncryptedGroup> = groups
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| encrypt_group(g, keys.mask(party, i)))
            .collect();
        log.push(2, party, Payload::GroupsEncrypted { groups: encrypted.len() });

        let prepared = encrypted.iter().map(prepare_carrier).collect::<Result<Vec<_>>>()?;
        let carriers: Vec<SystemId> = prepared.iter().map(|s| registry.add(s.clone())).collect();
        log.push(3, party, Payload::CarriersPrepared { carriers: carriers.len(), qubits_per_carrier: n + 1 });

        let seq = channel::carrier_sequence(&registry, &carriers);
        let sequence = channel::insert_decoys(seq, config.decoy_count, &mut registry, rng);
        log.push(4, party, Payload::DecoysInserted { decoys: config.decoy_count, sequence_len: sequence.len() });
        grouped.push(groups);
        sent.push(Sent { party, sequence, carriers, prepared });
    }

    // Step 4: transmission
    let mut received = Vec::with_capacity(2);
    let mut eve = Vec::new();
    for s in &sent {
        log.push(4, s.party, Payload::SequenceSent { to: Actor::Tp, particles: s.sequence.len() });
        let kind = attack.on_channel(s.party);
        let tx = channel::transmit(&s.sequence, kind, &mut registry, rng)?;
        if let Some(record) = tx.eve {
            log.push(4, Actor::Eve, Payload::Intercepted {
                channel: s.party,
                attack: kind.name().to_string(),
                particles: record.entries.len(),
            });
            let (residual, intact) = if record.unitaries.is_empty() {
                (None, None)
            } else {
                let (r, ok) = carrier_factorization(&registry, &s.carriers, &s.prepared)?;
                (Some(r), Some(ok))
            };
            eve.push(EveChannelReport {
                channel: s.party,
                record,
                max_factorization_residual: residual,
                carriers_intact: intact,
            });
        }
        received.push(tx.received);
    }

    // Step 5: announcement and decoy check
    let mut checks = Vec::with_capacity(2);
    let (mut mismatches, mut decoys) = (0, 0);
    for (s, rx) in sent.iter().zip(&received) {
        let placement = &s.sequence.placement;
        log.push(5, s.party, Payload::DecoysAnnounced {
            to: Actor::Tp,
            positions: placement.positions(),
            bases: placement.entries.iter().map(|e| e.basis).collect(),
        });
        let check = channel::check_eavesdropping(rx, placement, config.threshold, &mut registry, rng)?;
        log.push(5, Actor::Tp, Payload::DecoysChecked {
            channel: s.party,
            mismatches: check.mismatches,
            error_rate: check.error_rate,
            passed: check.pass,
        });
        mismatches += check.mismatches;
        decoys += check.decoys;
        checks.push(ChannelCheck { channel: s.party, check });
    }
    let error_rate = if decoys == 0 { 0.0 } else { mismatches as f64 / decoys as f64 };

    // Positions are public now; Eve reads whatever she kept.
    for report in &mut eve {
        let idx = Party::BOTH.iter().position(|p| *p == report.channel).unwrap_or(0);
        let positions = sent[idx].sequence.placement.positions();
        adversary::extract_readouts(&mut report.record, &positions, n + 1, &mut registry, rng)?;
        log.push(5, Actor::Eve, Payload::CarriersRead { channel: report.channel, groups: report.record.readouts.len() });
    }

    let truth = GroundTruth {
        keys: keys.clone(),
        alice_groups: grouped[0].clone(),
        bob_groups: grouped[1].clone(),
    };

    if checks.iter().any(|c| !c.check.pass) {
        log.push(5, Actor::Tp, Payload::Aborted { error_rate });
        log.push(6, Actor::Tp, Payload::VerdictAnnounced { verdict: Verdict::Aborted });
        return Ok(RunOutcome {
            verdict: Verdict::Aborted,
            per_group_rc: Vec::new(),
            eavesdrop_error_rate: error_rate,
            checks,
            transcript: log,
            tp_view: None,
            eve,
            truth: Some(truth),
        });
    }

    // Step 6: TP measures every carrier qubit in Z
    let mut measured = Vec::with_capacity(2);
    for (s, rx) in sent.iter().zip(&received) {
        let carriers = channel::strip_decoys(rx, &s.sequence.placement);
        let readings = measure_groups(&carriers, n + 1, &mut registry, rng)?;
        log.push(6, Actor::Tp, Payload::CarriersMeasured { channel: s.party, groups: readings.len() });
        measured.push(readings);
    }
    let comparison = tp_compare(&measured[0], &measured[1], &keys)?;
    let verdict = if comparison.equal { Verdict::Equal } else { Verdict::Unequal };
    log.push(6, Actor::Tp, Payload::Compared { rc: comparison.rc.clone() });
    log.push(6, Actor::Tp, Payload::VerdictAnnounced { verdict });

    Ok(RunOutcome {
        verdict,
        per_group_rc: comparison.rc.clone(),
        eavesdrop_error_rate: error_rate,
        checks,
        transcript: log,
        tp_view: Some(comparison),
        eve,
        truth: Some(truth),
    })
}

fn measure_groups<R: Rng + ?Sized>(
    carriers: &[QubitRef],
    width: usize,
    registry: &mut QuantumRegistry,
    rng: &mut R,
) -> Result<Vec<BitString>> {
    if !carriers.len().is_multiple_of(width) {
        return Err(invalid(format!(
            "{} carrier particles do not split into groups of {width}",
            carriers.len()
        )));
    }
    carriers
        .chunks(width)
        .map(|group| {
            group
                .iter()
                .map(|&q| registry.measure(q, Basis::Z, rng))
                .collect::<Result<BitString>>()
        })
        .collect()
}

/// Checks that each carrier system factors into (carrier) ⊗ (ancillas) and
/// that the carrier factor is still the prepared GHZ state.
fn carrier_factorization(
    registry: &QuantumRegistry,
    carriers: &[SystemId],
    prepared: &[StateVector],
) -> Result<(f64, bool)> {
    let mut worst: f64 = 0.0;
    let mut intact = true;
    for (&id, original) in carriers.iter().zip(prepared) {
        let state = registry.state(id);
        if state.qubit_count() == original.qubit_count() {
            continue;
        }
        let split = state.split_product(original.qubit_count())?;
        worst = worst.max(split.residual);
        intact &= split.residual <= UNITARY_TOL && split.leading.approx_eq_up_to_phase(original, UNITARY_TOL);
    }
    Ok((worst, intact))
}
