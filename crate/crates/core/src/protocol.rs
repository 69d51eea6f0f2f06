//! One round of decentralized, private traffic-count estimation.
//!
//! Every party holds a one-hot location vector. For each edge the parties
//! jointly compute `s_e + P(U_e)` where `U_e` is a shared uniform nobody
//! learns, and only the sum of the final shares is made public. Parties are
//! simulated in-process; the [`Transcript`] plays the role of the private
//! channels between them.

use std::collections::BTreeSet;
use std::io::Write;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldElement;
use crate::laplace::{NoisePolynomial, UniformDomain};
use crate::sharing::{
    share_from, smpa_into, smpm_into, AdditiveShareSet, FieldRng, LocalKind, Phase, SharingError,
    Transcript,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("need at least {needed} parties, got {got}")]
    TooFewParties { needed: usize, got: usize },
    #[error("invalid input from party {party}: {reason}")]
    InvalidInput { party: usize, reason: String },
    #[error("{parties} parties exceed the encoding's count bound of {max}")]
    OverflowRisk { parties: usize, max: u64 },
    #[error("coalition contains every party")]
    FullCoalition,
    #[error("party {0} is not part of this round")]
    UnknownParty(usize),
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error("transcript write failed: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// A party's location at the start of the round: a one-hot vector over edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyInput {
    pub party: usize,
    pub indicator: Vec<u8>,
}

impl PartyInput {
    pub fn on_edge(party: usize, edge: usize, edge_count: usize) -> Self {
        let mut indicator = vec![0; edge_count];
        indicator[edge] = 1;
        PartyInput { party, indicator }
    }

    /// The edge the party is on, if the indicator is a valid one-hot vector.
    pub fn edge(&self) -> Option<usize> {
        let mut found = None;
        for (e, &v) in self.indicator.iter().enumerate() {
            match (v, found) {
                (0, _) => {}
                (1, None) => found = Some(e),
                _ => return None,
            }
        }
        found
    }
}

/// Everything exchanged and drawn while processing one edge.
#[derive(Debug, Clone)]
pub struct EdgeTranscript {
    pub edge: usize,
    pub parties: usize,
    pub transcript: Transcript,
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    /// Noisy counts in fixed-point units of `2^-fraction_bits`.
    pub fixed_point: Vec<i64>,
    /// The same counts as reals.
    pub counts: Vec<f64>,
    /// Empty when transcripts were not requested.
    pub transcripts: Vec<EdgeTranscript>,
    pub seed: Option<u64>,
}

fn validate(inputs: &[PartyInput], poly: &NoisePolynomial) -> Result<usize> {
    let n = inputs.len();
    if n < 3 {
        return Err(ProtocolError::TooFewParties { needed: 3, got: n });
    }
    if let Some(max) = poly.max_count() {
        if n as u64 > max {
            return Err(ProtocolError::OverflowRisk { parties: n, max });
        }
    }
    let ids: BTreeSet<usize> = inputs.iter().map(|p| p.party).collect();
    if ids.len() != n || ids.iter().next() != Some(&1) || ids.iter().last() != Some(&n) {
        return Err(ProtocolError::InvalidInput {
            party: 0,
            reason: format!("party ids must be exactly 1..={n}"),
        });
    }
    let m = inputs[0].indicator.len();
    for p in inputs {
        if p.indicator.len() != m {
            return Err(ProtocolError::InvalidInput {
                party: p.party,
                reason: format!("indicator has {} entries, expected {m}", p.indicator.len()),
            });
        }
        if p.edge().is_none() {
            return Err(ProtocolError::InvalidInput {
                party: p.party,
                reason: "indicator is not one-hot".into(),
            });
        }
    }
    Ok(m)
}

/// Runs the protocol for every edge and publishes the noisy counts.
pub fn run_round<R: FieldRng + ?Sized>(
    inputs: &[PartyInput],
    poly: &NoisePolynomial,
    rng: &mut R,
    record_transcripts: bool,
) -> Result<RoundResult> {
    let m = validate(inputs, poly)?;
    let mut ordered: Vec<&PartyInput> = inputs.iter().collect();
    ordered.sort_by_key(|p| p.party);
    let n = ordered.len();

    let mut result = RoundResult {
        fixed_point: Vec::with_capacity(m),
        counts: Vec::with_capacity(m),
        transcripts: Vec::new(),
        seed: None,
    };
    for e in 0..m {
        let indicators: Vec<u64> = ordered.iter().map(|p| p.indicator[e] as u64).collect();
        let mut transcript = if record_transcripts {
            Transcript::new()
        } else {
            Transcript::disabled()
        };
        let sum = run_edge(&indicators, poly, rng, &mut transcript)?;
        let fixed = poly.decode_fixed(&sum);
        result.fixed_point.push(fixed);
        result.counts.push(poly.fixed_to_count(fixed));
        if record_transcripts {
            result.transcripts.push(EdgeTranscript {
                edge: e,
                parties: n,
                transcript,
            });
        }
    }
    Ok(result)
}

/// [`run_round`] driven by a ChaCha stream seeded from `seed`.
pub fn run_round_seeded(
    inputs: &[PartyInput],
    poly: &NoisePolynomial,
    seed: u64,
    record_transcripts: bool,
) -> Result<RoundResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result = run_round(inputs, poly, &mut rng, record_transcripts)?;
    result.seed = Some(seed);
    Ok(result)
}

/// Additive shares of the uniform variable, one field draw per party.
fn field_uniform<R: FieldRng + ?Sized>(
    n: usize,
    poly: &NoisePolynomial,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<AdditiveShareSet> {
    let modulus = poly.modulus();
    let mut acc: Option<AdditiveShareSet> = None;
    for party in 1..=n {
        let u = rng.field_element(modulus);
        transcript.record(Phase::SmpaUniform, party, LocalKind::Randomness, &u);
        let dealt = share_from(party, &u, n, Phase::SmpaUniform, rng, transcript)?;
        acc = Some(match acc {
            None => dealt,
            Some(a) => a.add(&dealt)?,
        });
    }
    Ok(acc.expect("at least one party"))
}

/// Additive shares of `V = 2U - (2^B - 1)` where each bit of `U` is the XOR
/// of one private random bit per party.
fn bit_uniform<R: FieldRng + ?Sized>(
    n: usize,
    bits: u32,
    poly: &NoisePolynomial,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<AdditiveShareSet> {
    let modulus = poly.modulus();
    let two = modulus.element(2u64);
    let mut u = AdditiveShareSet::constant(&modulus.zero(), n)?;
    let one = BigUint::from(1u32);
    let two_big = BigUint::from(2u32);
    for k in 0..bits {
        let mut acc: Option<AdditiveShareSet> = None;
        for party in 1..=n {
            let b = modulus.element(rng.uniform_below(&two_big));
            transcript.record(Phase::UniformBit(k), party, LocalKind::Randomness, &b);
            let dealt = share_from(party, &b, n, Phase::UniformBit(k), rng, transcript)?;
            acc = Some(match acc {
                None => dealt,
                Some(a) => {
                    let prod = smpm_into(&a, &dealt, Phase::BitXor(k), rng, transcript)?;
                    a.add(&dealt)?.sub(&prod.scale(&two)?)?
                }
            });
        }
        let weight = modulus.element(&one << k);
        u = u.add(&acc.expect("at least one party").scale(&weight)?)?;
    }
    let offset = modulus.element((&one << bits) - 1u32);
    Ok(u.scale(&two)?.add_constant(&-offset)?)
}

/// One edge of the protocol. `indicators[i]` is party `i+1`'s input; the
/// return value is `Σ θ_i`, the public encoded output.
pub(crate) fn run_edge<R: FieldRng + ?Sized>(
    indicators: &[u64],
    poly: &NoisePolynomial,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<FieldElement> {
    let n = indicators.len();
    let modulus = poly.modulus();
    let scale = poly.count_scale();
    let counts: Vec<FieldElement> = indicators
        .iter()
        .map(|&s| &modulus.element(s) * &scale)
        .collect();
    let alpha = smpa_into(&counts, Phase::SmpaCount, rng, transcript)?;

    let variable = match poly.domain() {
        UniformDomain::Field => field_uniform(n, poly, rng, transcript)?,
        UniformDomain::Bits(b) => bit_uniform(n, b, poly, rng, transcript)?,
    };

    let coeffs = poly.coefficients();
    let mut theta = alpha.add_constant(&coeffs[0])?;
    let mut power = variable.clone();
    for (z, c) in coeffs.iter().enumerate().skip(1) {
        if z > 1 {
            power = smpm_into(&power, &variable, Phase::SmpmPower(z as u32), rng, transcript)?;
        }
        theta = theta.add(&power.scale(c)?)?;
    }

    let mut sum = modulus.zero();
    for (i, share) in theta.shares().enumerate() {
        let share = share.expect("all parties hold shares");
        for j in 1..=n {
            if j != i + 1 {
                transcript.send(Phase::FinalTheta, i + 1, j, share);
            }
        }
        sum = &sum + share;
    }
    Ok(sum)
}

/// Everything a coalition of parties sees for one edge: their inputs and
/// randomness, the messages they received, and the broadcast output shares.
///
/// The empty coalition sees only the broadcast shares, one per party.
pub fn coalition_view(t: &EdgeTranscript, coalition: &[usize]) -> Result<Vec<FieldElement>> {
    let members: BTreeSet<usize> = coalition.iter().copied().collect();
    if let Some(&bad) = members.iter().find(|&&p| p == 0 || p > t.parties) {
        return Err(ProtocolError::UnknownParty(bad));
    }
    if members.len() == t.parties {
        return Err(ProtocolError::FullCoalition);
    }
    let tr = &t.transcript;
    let mut view = Vec::new();
    if members.is_empty() {
        for party in 1..=t.parties {
            if let Some(m) = tr
                .messages
                .iter()
                .find(|m| m.phase == Phase::FinalTheta && m.from == party)
            {
                view.push(m.value.clone());
            }
        }
        return Ok(view);
    }
    view.extend(
        tr.local
            .iter()
            .filter(|r| members.contains(&r.party))
            .map(|r| r.value.clone()),
    );
    view.extend(
        tr.messages
            .iter()
            .filter(|m| members.contains(&m.to))
            .map(|m| m.value.clone()),
    );
    for &party in &members {
        if let Some(m) = tr
            .messages
            .iter()
            .find(|m| m.phase == Phase::FinalTheta && m.from == party)
        {
            view.push(m.value.clone());
        }
    }
    Ok(view)
}

/// Writes every message as one JSON object per line:
/// `{edge, phase, from, to, value}` with the value in decimal.
pub fn write_transcript_jsonl<W: Write>(mut out: W, transcripts: &[EdgeTranscript]) -> Result<()> {
    for t in transcripts {
        for m in &t.transcript.messages {
            let line = serde_json::json!({
                "edge": t.edge,
                "phase": m.phase.to_string(),
                "from": m.from,
                "to": m.to,
                "value": m.value.value().to_string(),
            });
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimeModulus;
    use crate::laplace::{fit_inverse_cdf_poly, LaplaceParams, PolyFitOptions};
    use crate::sharing::ScriptedDraws;
    use std::collections::HashMap;

    fn inputs(edges: &[usize], m: usize) -> Vec<PartyInput> {
        edges
            .iter()
            .enumerate()
            .map(|(i, &e)| PartyInput::on_edge(i + 1, e, m))
            .collect()
    }

    fn raw_poly(p: &PrimeModulus, coeffs: &[u64]) -> NoisePolynomial {
        NoisePolynomial::raw(coeffs.iter().map(|&c| p.element(c)).collect())
    }

    fn small_fit(degree: usize, bits: u32) -> NoisePolynomial {
        let opts = PolyFitOptions {
            degree,
            uniform_bits: bits,
            ..Default::default()
        };
        fit_inverse_cdf_poly(&LaplaceParams::new(0.5).unwrap(), opts, &PrimeModulus::mersenne521())
            .unwrap()
            .encoded()
            .clone()
    }

    /// Recovers `U` from the parties' recorded draws.
    fn recorded_uniform(t: &Transcript, poly: &NoisePolynomial, n: usize) -> BigUint {
        let first_draw = |phase: Phase, party: usize| {
            t.local
                .iter()
                .find(|r| r.phase == phase && r.party == party && r.kind == LocalKind::Randomness)
                .unwrap()
                .value
                .value()
                .clone()
        };
        match poly.domain() {
            UniformDomain::Field => {
                let total: BigUint = (1..=n).map(|i| first_draw(Phase::SmpaUniform, i)).sum();
                total % poly.modulus().value()
            }
            UniformDomain::Bits(b) => {
                let mut u = BigUint::from(0u32);
                for k in 0..b {
                    let bit = (1..=n).fold(0u32, |acc, i| {
                        acc ^ u32::try_from(&first_draw(Phase::UniformBit(k), i)).unwrap()
                    });
                    u += BigUint::from(bit) << k;
                }
                u
            }
        }
    }

    #[test]
    fn zero_noise_returns_exact_counts() {
        let p = PrimeModulus::mersenne61();
        let poly = NoisePolynomial::zero(&p, 3);
        let r = run_round_seeded(&inputs(&[0; 5], 3), &poly, 9, false).unwrap();
        assert_eq!(r.fixed_point, vec![5, 0, 0]);
        assert_eq!(r.counts, vec![5.0, 0.0, 0.0]);
        assert_eq!(r.seed, Some(9));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = PrimeModulus::mersenne61();
        let poly = NoisePolynomial::zero(&p, 1);
        let err = run_round_seeded(&inputs(&[0, 0], 1), &poly, 0, false).unwrap_err();
        assert!(matches!(err, ProtocolError::TooFewParties { needed: 3, got: 2 }));

        let mut bad = inputs(&[0, 1, 1], 2);
        bad[1].indicator = vec![1, 1];
        assert!(matches!(
            run_round_seeded(&bad, &poly, 0, false),
            Err(ProtocolError::InvalidInput { party: 2, .. })
        ));
        bad[1].indicator = vec![0, 0];
        assert!(run_round_seeded(&bad, &poly, 0, false).is_err());
        bad[1].indicator = vec![0, 2];
        assert!(run_round_seeded(&bad, &poly, 0, false).is_err());
        bad[1].indicator = vec![0, 1, 0];
        assert!(run_round_seeded(&bad, &poly, 0, false).is_err());

        let mut ids = inputs(&[0, 0, 0], 1);
        ids[2].party = 7;
        assert!(run_round_seeded(&ids, &poly, 0, false).is_err());
    }

    #[test]
    fn party_count_beyond_encoding_is_rejected() {
        let opts = PolyFitOptions {
            degree: 3,
            uniform_bits: 4,
            max_count: 3,
            ..Default::default()
        };
        let fit = fit_inverse_cdf_poly(&LaplaceParams::new(1.0).unwrap(), opts, &PrimeModulus::mersenne521()).unwrap();
        let err = run_round_seeded(&inputs(&[0; 4], 1), fit.encoded(), 0, false).unwrap_err();
        assert!(matches!(err, ProtocolError::OverflowRisk { parties: 4, max: 3 }));
    }

    #[test]
    fn field_mode_output_is_count_plus_polynomial_of_u() {
        let p = PrimeModulus::from_u64(1_000_003).unwrap();
        let poly = raw_poly(&p, &[17, 5, 999_000, 3]);
        for seed in 0..50 {
            let ins = inputs(&[0, 1, 0, 1, 1], 2);
            let r = run_round_seeded(&ins, &poly, seed, true).unwrap();
            for (e, t) in r.transcripts.iter().enumerate() {
                let u = recorded_uniform(&t.transcript, &poly, 5);
                let s = [2i64, 3][e];
                let expected = p.from_i64(s) + p.from_signed(&(poly.noise_at(&u) as i64).into());
                assert_eq!(p.from_i64(r.fixed_point[e]), expected, "seed {seed} edge {e}");
            }
        }
    }

    #[test]
    fn bit_mode_output_is_count_plus_encoded_noise() {
        let poly = small_fit(5, 6);
        for seed in 0..20 {
            let ins = inputs(&[0, 0, 0, 1], 2);
            let r = run_round_seeded(&ins, &poly, seed, true).unwrap();
            for (e, t) in r.transcripts.iter().enumerate() {
                let u = recorded_uniform(&t.transcript, &poly, 4);
                let s = [3.0, 1.0][e];
                assert!(u < BigUint::from(64u32));
                assert_eq!(r.counts[e], s + poly.noise_at(&u), "seed {seed} edge {e}");
            }
        }
    }

    #[test]
    fn seeded_rounds_are_deterministic() {
        let poly = small_fit(4, 5);
        let ins = inputs(&[0, 1, 2], 3);
        let a = run_round_seeded(&ins, &poly, 42, true).unwrap();
        let b = run_round_seeded(&ins, &poly, 42, true).unwrap();
        assert_eq!(a.fixed_point, b.fixed_point);
        for (x, y) in a.transcripts.iter().zip(&b.transcripts) {
            assert_eq!(x.transcript.messages, y.transcript.messages);
            assert_eq!(x.transcript.local, y.transcript.local);
        }
        let c = run_round_seeded(&ins, &poly, 43, false).unwrap();
        assert_ne!(a.fixed_point, c.fixed_point);
    }

    #[test]
    fn relabeling_parties_keeps_outputs() {
        let poly = small_fit(3, 5);
        let a = inputs(&[0, 0, 1, 2], 3);
        let b = inputs(&[2, 1, 0, 0], 3);
        for seed in 0..20 {
            let ra = run_round_seeded(&a, &poly, seed, false).unwrap();
            let rb = run_round_seeded(&b, &poly, seed, false).unwrap();
            assert_eq!(ra.fixed_point, rb.fixed_point);
        }
    }

    #[test]
    fn message_counts_follow_schedule() {
        let n = 5;
        let nn = n * (n - 1);
        let p = PrimeModulus::mersenne61();
        let d = 4;
        let poly = raw_poly(&p, &[1, 2, 3, 4, 5]);
        let r = run_round_seeded(&inputs(&[0; 5], 1), &poly, 1, true).unwrap();
        let t = &r.transcripts[0].transcript;
        assert_eq!(t.count_phase(Phase::SmpaCount), nn);
        assert_eq!(t.count_phase(Phase::SmpaUniform), nn);
        for z in 2..=d {
            assert_eq!(t.count_phase(Phase::SmpmPower(z)), 2 * nn);
        }
        assert_eq!(t.count_phase(Phase::FinalTheta), nn);
        assert_eq!(t.messages.len(), nn * (3 + 2 * (d as usize - 1)));

        let bits = 3;
        let poly = small_fit(d as usize, bits);
        let r = run_round_seeded(&inputs(&[0; 5], 1), &poly, 1, true).unwrap();
        let t = &r.transcripts[0].transcript;
        assert_eq!(t.count_phase(Phase::SmpaUniform), 0);
        for k in 0..bits {
            assert_eq!(t.count_phase(Phase::UniformBit(k)), nn);
            assert_eq!(t.count_phase(Phase::BitXor(k)), (n - 1) * 2 * nn);
        }
        let expected = nn * (2 + bits as usize * (1 + 2 * (n - 1)) + 2 * (d as usize - 1));
        assert_eq!(t.messages.len(), expected);
    }

    #[test]
    fn coalition_view_sizes() {
        let n = 5;
        let d = 3;
        let p = PrimeModulus::mersenne61();
        let poly = raw_poly(&p, &[1, 2, 3, 4]);
        let r = run_round_seeded(&inputs(&[0; 5], 1), &poly, 1, true).unwrap();
        let t = &r.transcripts[0];
        let deg = crate::sharing::smpm_degree(n);
        for c in 1..n {
            let coalition: Vec<usize> = (1..=c).collect();
            let view = coalition_view(t, &coalition).unwrap();
            let local = 2 + 2 * (n - 1) + 2 * deg * (d - 1);
            let received = (n - 1) * (2 + 2 * (d - 1) + 1);
            assert_eq!(view.len(), c * (local + received + 1), "coalition {c}");
        }
        let public = coalition_view(t, &[]).unwrap();
        assert_eq!(public.len(), n);
        let total = public.iter().fold(p.zero(), |a, b| &a + b);
        assert_eq!(p.from_i64(r.fixed_point[0]), total);
        assert!(matches!(
            coalition_view(t, &[1, 2, 3, 4, 5]),
            Err(ProtocolError::FullCoalition)
        ));
        assert!(matches!(coalition_view(t, &[6]), Err(ProtocolError::UnknownParty(6))));
    }

    #[test]
    fn transcript_dump_is_jsonl() {
        let p = PrimeModulus::mersenne61();
        let poly = raw_poly(&p, &[0, 1]);
        let r = run_round_seeded(&inputs(&[0, 1, 1], 2), &poly, 3, true).unwrap();
        let mut buf = Vec::new();
        write_transcript_jsonl(&mut buf, &r.transcripts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2 * 3 * 6);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["edge"], 0);
        assert_eq!(first["phase"], "smpa-count");
        assert_eq!(first["from"], 1);
        assert_eq!(first["to"], 2);
        assert!(first["value"].as_str().unwrap().parse::<u64>().is_ok());
    }

    /// Distribution of party 1's view over every assignment of the other
    /// parties' randomness, with party 1's own draws held fixed.
    fn single_party_view_distribution(
        p: u64,
        indicators: &[u64],
        own_draws: &[u64],
    ) -> HashMap<Vec<u64>, usize> {
        let modulus = PrimeModulus::from_u64(p).unwrap();
        let poly = raw_poly(&modulus, &[1, 2]);
        // draw order for N=3, d=1: count shares (2 per party), then per party
        // its uniform and two shares
        let own_positions = [0usize, 1, 6, 7, 8];
        let total = 15;
        let others = total - own_positions.len();
        let mut dist = HashMap::new();
        let mut other = vec![0u64; others];
        loop {
            let mut script = Vec::with_capacity(total);
            let (mut o, mut f) = (0, 0);
            for pos in 0..total {
                if own_positions.contains(&pos) {
                    script.push(own_draws[o]);
                    o += 1;
                } else {
                    script.push(other[f]);
                    f += 1;
                }
            }
            let mut rng = ScriptedDraws::new(script);
            let mut t = Transcript::new();
            run_edge(indicators, &poly, &mut rng, &mut t).unwrap();
            assert_eq!(rng.remaining(), 0);
            let et = EdgeTranscript {
                edge: 0,
                parties: 3,
                transcript: t,
            };
            let view: Vec<u64> = coalition_view(&et, &[1])
                .unwrap()
                .iter()
                .map(|v| v.to_u64().unwrap())
                .collect();
            *dist.entry(view).or_insert(0) += 1;

            let mut k = 0;
            loop {
                if k == others {
                    return dist;
                }
                other[k] += 1;
                if other[k] < p {
                    break;
                }
                other[k] = 0;
                k += 1;
            }
        }
    }

    fn check_view_invariance(p: u64) {
        for own_input in [0u64, 1] {
            for own in [[0u64, 0, 0, 0, 0], [1, 2 % p, 0, 1, 1]] {
                let a = single_party_view_distribution(p, &[own_input, 1, 0], &own);
                let b = single_party_view_distribution(p, &[own_input, 0, 1], &own);
                assert_eq!(a, b, "own input {own_input}, own draws {own:?}");
            }
        }
    }

    #[test]
    fn single_party_view_hides_honest_allocation() {
        check_view_invariance(3);
    }

    #[test]
    #[ignore = "enumerates 5^10 randomness assignments per case"]
    fn single_party_view_hides_honest_allocation_p5() {
        check_view_invariance(5);
    }

    #[test]
    fn own_draw_positions_are_party_ones() {
        let modulus = PrimeModulus::from_u64(101).unwrap();
        let poly = raw_poly(&modulus, &[1, 2]);
        let script: Vec<u64> = (0..15).collect();
        let mut t = Transcript::new();
        run_edge(&[0, 1, 0], &poly, &mut ScriptedDraws::new(script), &mut t).unwrap();
        let own: Vec<u64> = t
            .local
            .iter()
            .filter(|r| r.party == 1 && r.kind == LocalKind::Randomness)
            .map(|r| r.value.to_u64().unwrap())
            .collect();
        assert_eq!(own, vec![0, 1, 6, 7, 8]);
    }
}
