//! Experiment drivers: truth-table verification, exhaustive correctness,
//! Monte Carlo detection and guessing experiments, and qubit efficiency.

use std::collections::BTreeMap;
use std::io;

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, AttackKind, AttackModel, AttackTarget};
use crate::bits::BitString;
use crate::error::{invalid, Result};
use crate::protocol::{
    self, encrypt_group, prepare_carrier, tp_compare, KeyMaterial, Party, ProtocolConfig, RunOutcome, Secret,
    Verdict,
};
use crate::quantum::Basis;
use crate::rng::{seeded, trial_rng, SimRng};

/// Published truth table. Columns: K_AB, K_AC, K_BC, M_A^1, M_B^1, R_A, R_B,
/// C_A, C_B, then whether M_A^2' and M_B^2' come out as the complemented
/// plaintext group (1) or the plaintext group itself (0).
pub const TRUTH_TABLE: [[u8; 11]; 32] = [
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0],
    [0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0],
    [0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0],
    [0, 0, 1, 0, 1, 0, 1, 0, 0, 0, 0],
    [0, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0],
    [0, 0, 1, 1, 1, 0, 1, 1, 0, 0, 0],
    [0, 1, 0, 0, 0, 1, 0, 1, 0, 0, 0],
    [0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0],
    [0, 1, 0, 1, 0, 1, 0, 0, 0, 0, 0],
    [0, 1, 0, 1, 1, 1, 0, 0, 1, 0, 0],
    [0, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0],
    [0, 1, 1, 0, 1, 1, 1, 1, 0, 0, 0],
    [0, 1, 1, 1, 0, 1, 1, 0, 1, 0, 0],
    [0, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1],
    [1, 0, 0, 0, 1, 1, 1, 0, 1, 1, 1],
    [1, 0, 0, 1, 0, 1, 1, 1, 0, 1, 1],
    [1, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1],
    [1, 0, 1, 0, 0, 1, 0, 0, 1, 1, 1],
    [1, 0, 1, 0, 1, 1, 0, 0, 0, 1, 1],
    [1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1],
    [1, 0, 1, 1, 1, 1, 0, 1, 0, 1, 1],
    [1, 1, 0, 0, 0, 0, 1, 1, 0, 1, 1],
    [1, 1, 0, 0, 1, 0, 1, 1, 1, 1, 1],
    [1, 1, 0, 1, 0, 0, 1, 0, 0, 1, 1],
    [1, 1, 0, 1, 1, 0, 1, 0, 1, 1, 1],
    [1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1],
    [1, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1],
    [1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 1],
    [1, 1, 1, 1, 1, 0, 0, 0, 0, 1, 1],
];

/// One line of the truth table, with `a_complemented` / `b_complemented`
/// recording whether TP's decoded group is `~G` rather than `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub k_ab: bool,
    pub k_ac: bool,
    pub k_bc: bool,
    pub m_a1: bool,
    pub m_b1: bool,
    pub r_a: bool,
    pub r_b: bool,
    pub c_a: bool,
    pub c_b: bool,
    pub a_complemented: bool,
    pub b_complemented: bool,
}

impl TruthRow {
    fn from_published(row: &[u8; 11]) -> Self {
        let b = |i: usize| row[i] == 1;
        Self {
            k_ab: b(0),
            k_ac: b(1),
            k_bc: b(2),
            m_a1: b(3),
            m_b1: b(4),
            r_a: b(5),
            r_b: b(6),
            c_a: b(7),
            c_b: b(8),
            a_complemented: b(9),
            b_complemented: b(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRowCheck {
    pub row: usize,
    pub expected: TruthRow,
    pub computed: Option<TruthRow>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTableReport {
    pub rows: Vec<TruthRowCheck>,
    pub passed: usize,
    pub all_pass: bool,
}

const TRUTH_GROUP_BITS: usize = 3;

/// The carrier branch with flag bit `flag`, read off the prepared GHZ state.
fn carrier_branch(group: &BitString, mask: bool, flag: bool) -> Result<BitString> {
    let carrier = prepare_carrier(&encrypt_group(group, mask))?;
    let branch = carrier.project(0, Basis::Z, flag)?;
    // a single basis state remains, so any stream gives the same reading
    Ok(branch.measure_all_z(&mut seeded(0)))
}

/// Runs one row of inputs through encryption, carrier preparation, a forced
/// flag-qubit branch and TP's decoding, for every pair of 3-bit groups.
/// Returns `None` if the decoded group is neither `G` nor `~G` for some pair
/// or the classification differs between pairs.
fn compute_truth_row(k_ab: bool, k_ac: bool, k_bc: bool, m_a1: bool, m_b1: bool) -> Result<Option<TruthRow>> {
    let one = |b: bool| BitString::new(vec![b]);
    let keys = KeyMaterial::new(one(k_ab), one(k_ac), one(k_bc))?;
    let (r_a, r_b) = (keys.mask(Party::Alice, 0), keys.mask(Party::Bob, 0));
    let mut seen: Option<TruthRow> = None;
    let width = TRUTH_GROUP_BITS;
    for ga in 0..1u64 << width {
        for gb in 0..1u64 << width {
            let g_a = BitString::from_u64_msb(ga, width);
            let g_b = BitString::from_u64_msb(gb, width);
            let measured_a = carrier_branch(&g_a, r_a, m_a1)?;
            let measured_b = carrier_branch(&g_b, r_b, m_b1)?;
            let cmp = tp_compare(&[measured_a], &[measured_b], &keys)?;
            let classify = |decoded: &BitString, plain: &BitString| {
                if decoded == plain {
                    Some(false)
                } else if *decoded == plain.complement() {
                    Some(true)
                } else {
                    None
                }
            };
            let (Some(a_c), Some(b_c)) = (classify(&cmp.alice[0].m2_prime, &g_a), classify(&cmp.bob[0].m2_prime, &g_b))
            else {
                return Ok(None);
            };
            // the XOR TP computes must be the plaintext XOR
            if cmp.rc[0] != &g_a ^ &g_b {
                return Ok(None);
            }
            let row = TruthRow {
                k_ab,
                k_ac,
                k_bc,
                m_a1: cmp.alice[0].m1,
                m_b1: cmp.bob[0].m1,
                r_a,
                r_b,
                c_a: cmp.alice[0].c,
                c_b: cmp.bob[0].c,
                a_complemented: a_c,
                b_complemented: b_c,
            };
            match seen {
                Some(prev) if prev != row => return Ok(None),
                _ => seen = Some(row),
            }
        }
    }
    Ok(seen)
}

/// Recomputes all 32 rows through the protocol pipeline and compares them
/// with [`TRUTH_TABLE`].
pub fn verify_truth_table() -> Result<TruthTableReport> {
    let mut rows = Vec::with_capacity(32);
    for (i, published) in TRUTH_TABLE.iter().enumerate() {
        let expected = TruthRow::from_published(published);
        let computed = compute_truth_row(expected.k_ab, expected.k_ac, expected.k_bc, expected.m_a1, expected.m_b1)?;
        let pass = computed == Some(expected);
        rows.push(TruthRowCheck { row: i + 1, expected, computed, pass });
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    Ok(TruthTableReport { all_pass: passed == rows.len(), passed, rows })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    pub n: u64,
    pub efficiency: Ratio<u64>,
    pub bounds_ok: bool,
}

impl EfficiencyResult {
    pub fn value(&self) -> f64 {
        *self.efficiency.numer() as f64 / *self.efficiency.denom() as f64
    }
}

/// Compared bits per consumed carrier qubit: `n / (2n + 2)`.
pub fn qubit_efficiency(n: u64) -> Result<EfficiencyResult> {
    if n < 2 {
        return Err(invalid(format!("group size {n} below 2")));
    }
    let denom = n
        .checked_mul(2)
        .and_then(|d| d.checked_add(2))
        .ok_or_else(|| invalid(format!("group size {n} too large")))?;
    let efficiency = Ratio::new(n, denom);
    let bounds_ok = efficiency >= Ratio::new(1, 3) && efficiency < Ratio::new(1, 2);
    Ok(EfficiencyResult { n, efficiency, bounds_ok })
}

/// Aggregate of a binomial Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, String>,
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub analytic: Option<f64>,
    pub std_error: f64,
    pub pass: bool,
}

/// Acceptance band in binomial standard errors.
pub const SIGMA_BAND: f64 = 3.0;

impl ExperimentReport {
    pub fn from_counts(
        name: impl Into<String>,
        parameters: BTreeMap<String, String>,
        trials: u64,
        successes: u64,
        analytic: Option<f64>,
    ) -> Self {
        let estimate = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        let std_error = if trials == 0 { 0.0 } else { (estimate * (1.0 - estimate) / trials as f64).sqrt() };
        let pass = analytic.is_none_or(|a| (estimate - a).abs() <= SIGMA_BAND * std_error);
        Self { name: name.into(), parameters, trials, successes, estimate, analytic, std_error, pass }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| invalid(e.to_string()))
    }

    fn parameter_string(&self) -> String {
        self.parameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Writes reports as CSV with columns
/// `name,parameters,trials,estimate,analytic,std_error,pass`.
pub fn write_csv<W: io::Write>(reports: &[ExperimentReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| invalid(e.to_string());
    w.write_record(["name", "parameters", "trials", "estimate", "analytic", "std_error", "pass"])
        .map_err(io_err)?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.parameter_string(),
            r.trials.to_string(),
            r.estimate.to_string(),
            r.analytic.map(|a| a.to_string()).unwrap_or_default(),
            r.std_error.to_string(),
            r.pass.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| invalid(e.to_string()))
}

pub const MIN_TRIALS: u64 = 100;

fn check_trials(trials: u64) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(invalid(format!("at least {MIN_TRIALS} trials required, got {trials}")));
    }
    Ok(())
}

fn count_parallel<F>(trials: u64, seed: u64, trial: F) -> Result<u64>
where
    F: Fn(&mut SimRng) -> Result<bool> + Sync,
{
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| trial(&mut trial_rng(seed, t)))
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.into_iter().filter(|&h| h).count() as u64)
}

fn random_secret_pair<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<(Secret, Secret)> {
    Ok((Secret::random(len, rng)?, Secret::random(len, rng)?))
}

/// Exact detection probability of a session under `attack`, when every
/// decoy mismatch aborts.
pub fn analytic_detection(attack: &AttackModel, decoys: usize) -> Result<f64> {
    let mut survive = 1.0;
    for party in Party::BOTH {
        let p = adversary::mean_decoy_error_probability(attack.on_channel(party))?;
        survive *= 1.0 - adversary::detection_probability(p, decoys);
    }
    Ok(1.0 - survive)
}

/// Fraction of sessions aborted by the decoy check under `attack`, with
/// `decoys` decoys per sequence and random secrets.
pub fn detection_experiment(
    attack: &AttackModel,
    decoys: usize,
    trials: u64,
    base: &ProtocolConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    check_trials(trials)?;
    let config = base.with_decoys(decoys);
    config.validate()?;
    let successes = count_parallel(trials, seed, |rng| {
        let (x, y) = random_secret_pair(config.secret_len, rng)?;
        let out = protocol::run_protocol(&config, &x, &y, attack, rng)?;
        Ok(out.verdict == Verdict::Aborted)
    })?;
    let analytic = if config.threshold == 0.0 { Some(analytic_detection(attack, decoys)?) } else { None };
    let mut params = BTreeMap::new();
    params.insert("attack".into(), attack.kind.name().into());
    params.insert("target".into(), format!("{:?}", attack.target));
    params.insert("decoys".into(), decoys.to_string());
    params.insert("N".into(), config.secret_len.to_string());
    params.insert("n".into(), config.group_size.to_string());
    params.insert("seed".into(), seed.to_string());
    Ok(ExperimentReport::from_counts("detection", params, trials, successes, analytic))
}

/// Who is trying to learn a secret they should not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuessRole {
    /// TP, targeting Alice's secret from its own view of an honest run.
    Tp,
    /// Alice, intercepting Bob's carriers to learn his secret.
    Alice,
    /// Bob, intercepting Alice's carriers to learn her secret.
    Bob,
    /// An outsider intercepting Alice's carriers.
    Eve,
}

impl GuessRole {
    pub fn name(self) -> &'static str {
        match self {
            GuessRole::Tp => "tp",
            GuessRole::Alice => "alice",
            GuessRole::Bob => "bob",
            GuessRole::Eve => "eve",
        }
    }
}

fn flatten_truncated(groups: &[BitString], len: usize) -> BitString {
    groups.iter().flat_map(|g| g.iter()).take(len).collect()
}

/// One guessing trial; `true` when the attacker reconstructs the whole target secret.
pub fn guess_trial<R: Rng + ?Sized>(role: GuessRole, config: &ProtocolConfig, rng: &mut R) -> Result<bool> {
    let (x, y) = random_secret_pair(config.secret_len, rng)?;
    let (attack, victim) = match role {
        GuessRole::Tp => (AttackModel::honest(), Party::Alice),
        GuessRole::Alice => (AttackModel::new(AttackKind::InterceptResend, AttackTarget::BobChannel), Party::Bob),
        GuessRole::Bob | GuessRole::Eve => {
            (AttackModel::new(AttackKind::InterceptResend, AttackTarget::AliceChannel), Party::Alice)
        }
    };
    let out = protocol::run_protocol(config, &x, &y, &attack, rng)?;
    let truth = out.truth.as_ref().ok_or_else(|| invalid("session kept no ground truth"))?;
    let keys = &truth.keys;
    let target = match victim {
        Party::Alice => &x,
        Party::Bob => &y,
    };
    let guessed: Vec<BitString> = match role {
        GuessRole::Tp => {
            // TP knows K_AC and K_BC; K_AB is the only unknown.
            let view = out.tp_view.as_ref().ok_or_else(|| invalid("honest run produced no TP view"))?;
            view.alice.iter().map(|r| r.m2_prime.flip_if(rng.random())).collect()
        }
        GuessRole::Alice | GuessRole::Bob | GuessRole::Eve => {
            let record = eve_record(&out, victim)?;
            record
                .readouts
                .iter()
                .enumerate()
                .map(|(i, readout)| {
                    let mask = match role {
                        // knows K_AB, guesses the victim's TP key
                        GuessRole::Alice | GuessRole::Bob => keys.k_ab[i] ^ rng.random::<bool>(),
                        _ => rng.random(),
                    };
                    adversary::guess_group(readout, mask)
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(flatten_truncated(&guessed, config.secret_len) == *target.bits())
}

fn eve_record(out: &RunOutcome, channel: Party) -> Result<&adversary::EveRecord> {
    out.eve
        .iter()
        .find(|r| r.channel == channel)
        .map(|r| &r.record)
        .ok_or_else(|| invalid(format!("no interception on {channel}'s channel")))
}

/// Monte Carlo estimate of the probability that `role` recovers its target
/// secret exactly; analytic value `1/2^⌈N/n⌉`.
pub fn guess_experiment(role: GuessRole, config: &ProtocolConfig, trials: u64, seed: u64) -> Result<ExperimentReport> {
    check_trials(trials)?;
    config.validate()?;
    let successes = count_parallel(trials, seed, |rng| guess_trial(role, config, rng))?;
    let groups = config.group_count() as i32;
    let analytic = 0.5f64.powi(groups);
    let mut params = BTreeMap::new();
    params.insert("role".into(), role.name().into());
    params.insert("N".into(), config.secret_len.to_string());
    params.insert("n".into(), config.group_size.to_string());
    params.insert("groups".into(), groups.to_string());
    params.insert("seed".into(), seed.to_string());
    Ok(ExperimentReport::from_counts("guess", params, trials, successes, Some(analytic)))
}

pub const MAX_EXHAUSTIVE_LEN: usize = 8;
const EXHAUSTIVE_PAIR_LIMIT: usize = 5;
const SAMPLED_PAIRS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessCase {
    pub secret_len: usize,
    pub group_size: usize,
    pub exhaustive: bool,
    pub pairs: u64,
    pub equal_verdicts: u64,
    pub unequal_verdicts: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessSummary {
    pub cases: Vec<CorrectnessCase>,
    pub all_pass: bool,
}

/// Honest runs for every `N <= max_len` and `n` in `[2, N]`: all secret pairs
/// through `N = 5`, 1000 sampled pairs beyond (half of them with `X = Y`).
pub fn exhaustive_correctness(max_len: usize, seed: u64) -> Result<CorrectnessSummary> {
    if !(2..=MAX_EXHAUSTIVE_LEN).contains(&max_len) {
        return Err(invalid(format!("maximum secret length must lie in [2, {MAX_EXHAUSTIVE_LEN}], got {max_len}")));
    }
    let mut cases = Vec::new();
    let mut case_id = 0u64;
    for len in 2..=max_len {
        for group_size in 2..=len {
            case_id += 1;
            let config = ProtocolConfig::new(len, group_size);
            let exhaustive = len <= EXHAUSTIVE_PAIR_LIMIT;
            let pairs = if exhaustive { 1u64 << (2 * len) } else { SAMPLED_PAIRS };
            let stream_base = case_id << 32;
            let verdicts = (0..pairs)
                .into_par_iter()
                .map(|p| {
                    let mut rng = trial_rng(seed, stream_base | p);
                    let (x, y) = if exhaustive {
                        (Secret::from_value(p >> len, len)?, Secret::from_value(p & ((1 << len) - 1), len)?)
                    } else {
                        let x = Secret::random(len, &mut rng)?;
                        let y = if rng.random() { x.clone() } else { Secret::random(len, &mut rng)? };
                        (x, y)
                    };
                    let out = protocol::run_protocol(&config, &x, &y, &AttackModel::honest(), &mut rng)?;
                    let expected = if x == y { Verdict::Equal } else { Verdict::Unequal };
                    Ok((out.verdict, out.verdict == expected))
                })
                .collect::<Result<Vec<_>>>()?;
            let count = |v: Verdict| verdicts.iter().filter(|(got, _)| *got == v).count() as u64;
            cases.push(CorrectnessCase {
                secret_len: len,
                group_size,
                exhaustive,
                pairs,
                equal_verdicts: count(Verdict::Equal),
                unequal_verdicts: count(Verdict::Unequal),
                failures: verdicts.iter().filter(|(_, ok)| !ok).count() as u64,
            });
        }
    }
    let all_pass = cases.iter().all(|c| c.failures == 0);
    Ok(CorrectnessSummary { cases, all_pass })
}
