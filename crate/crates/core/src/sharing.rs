//! Additive (N-of-N) and Shamir (k-of-N) secret sharing, and the two MPC
//! subroutines built on them: secure multi-party addition (SMPA) and secure
//! multi-party multiplication (SMPM).
//!
//! Parties are numbered `1..=N`. Index 0 is never used as an evaluation point
//! because `X(0)` is the secret.
//!
//! Every field element a party learns is recorded in a [`Transcript`]:
//! its private inputs, the randomness it draws, and each point-to-point
//! message it receives. Security tests inspect coalition views built from it.

use std::collections::VecDeque;
use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_traits::ToPrimitive;
use rand::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::field::{lagrange_weights_at_zero, FieldElement, FieldError, PrimeModulus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SharingError {
    #[error("need at least {needed} parties, got {got}")]
    TooFewParties { needed: usize, got: usize },
    #[error("share for party {0} is missing")]
    MissingShare(usize),
    #[error("threshold {k} is invalid for {n} parties")]
    InvalidThreshold { k: usize, n: usize },
    #[error("need {needed} shares to reconstruct, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("share sets cover {left} and {right} parties")]
    PartyCountMismatch { left: usize, right: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T> = std::result::Result<T, SharingError>;

/// Source of uniform integers. Implemented for every [`RngCore`]; tests use
/// [`ScriptedDraws`] to walk the randomness space exhaustively.
pub trait FieldRng {
    /// Uniform integer in `[0, bound)`.
    fn uniform_below(&mut self, bound: &BigUint) -> BigUint;

    fn field_element(&mut self, modulus: &PrimeModulus) -> FieldElement {
        let v = self.uniform_below(modulus.value());
        modulus.element(v)
    }
}

impl<R: RngCore + ?Sized> FieldRng for R {
    fn uniform_below(&mut self, bound: &BigUint) -> BigUint {
        self.gen_biguint_below(bound)
    }
}

/// Replays a fixed list of draws. Panics when a draw is out of range or the
/// script runs out.
#[derive(Debug, Clone, Default)]
pub struct ScriptedDraws {
    draws: VecDeque<u64>,
    consumed: usize,
}

impl ScriptedDraws {
    pub fn new(draws: impl IntoIterator<Item = u64>) -> Self {
        ScriptedDraws {
            draws: draws.into_iter().collect(),
            consumed: 0,
        }
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn remaining(&self) -> usize {
        self.draws.len()
    }
}

impl FieldRng for ScriptedDraws {
    fn uniform_below(&mut self, bound: &BigUint) -> BigUint {
        let v = self
            .draws
            .pop_front()
            .unwrap_or_else(|| panic!("script exhausted after {} draws", self.consumed));
        assert!(
            bound.to_u64().map_or(true, |b| v < b),
            "scripted draw {v} not below {bound}"
        );
        self.consumed += 1;
        BigUint::from(v)
    }
}

/// Which step of a protocol a transcript entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "kebab-case")]
pub enum Phase {
    /// SMPA over the location indicators.
    SmpaCount,
    /// SMPA over the per-party uniform draws.
    SmpaUniform,
    /// Additive sharing of one party's random bit at the given bit position.
    UniformBit(u32),
    /// SMPM folding party bits together by XOR, at the given bit position.
    BitXor(u32),
    /// SMPM producing shares of `U^z`.
    SmpmPower(u32),
    /// Broadcast of the final output shares.
    FinalTheta,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::SmpaCount => write!(f, "smpa-count"),
            Phase::SmpaUniform => write!(f, "smpa-uniform"),
            Phase::UniformBit(k) => write!(f, "uniform-bit-{k}"),
            Phase::BitXor(k) => write!(f, "bit-xor-{k}"),
            Phase::SmpmPower(z) => write!(f, "smpm-power-{z}"),
            Phase::FinalTheta => write!(f, "final-theta"),
        }
    }
}

/// A point-to-point message on a private channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub phase: Phase,
    pub from: usize,
    pub to: usize,
    pub value: FieldElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalKind {
    Input,
    Randomness,
}

/// A value a party holds without having received it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalRecord {
    pub phase: Phase,
    pub party: usize,
    pub kind: LocalKind,
    pub value: FieldElement,
}

/// Everything exchanged or drawn during a protocol run.
#[derive(Debug, Clone)]
pub struct Transcript {
    enabled: bool,
    pub messages: Vec<Message>,
    pub local: Vec<LocalRecord>,
}

impl Default for Transcript {
    fn default() -> Self {
        Self::new()
    }
}

impl Transcript {
    pub fn new() -> Self {
        Transcript {
            enabled: true,
            messages: Vec::new(),
            local: Vec::new(),
        }
    }

    /// A transcript that drops everything, for runs too large to record.
    pub fn disabled() -> Self {
        Transcript {
            enabled: false,
            messages: Vec::new(),
            local: Vec::new(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn send(&mut self, phase: Phase, from: usize, to: usize, value: &FieldElement) {
        if self.enabled {
            self.messages.push(Message {
                phase,
                from,
                to,
                value: value.clone(),
            });
        }
    }

    pub fn record(&mut self, phase: Phase, party: usize, kind: LocalKind, value: &FieldElement) {
        if self.enabled {
            self.local.push(LocalRecord {
                phase,
                party,
                kind,
                value: value.clone(),
            });
        }
    }

    pub fn extend(&mut self, other: Transcript) {
        if self.enabled {
            self.messages.extend(other.messages);
            self.local.extend(other.local);
        }
    }

    /// Messages with the given phase.
    pub fn count_phase(&self, phase: Phase) -> usize {
        self.messages.iter().filter(|m| m.phase == phase).count()
    }
}

/// Attributes each draw to the party currently acting.
struct PartyRng<'a, R: FieldRng + ?Sized> {
    inner: &'a mut R,
    party: usize,
    phase: Phase,
    transcript: &'a mut Transcript,
}

impl<R: FieldRng + ?Sized> FieldRng for PartyRng<'_, R> {
    fn uniform_below(&mut self, bound: &BigUint) -> BigUint {
        self.inner.uniform_below(bound)
    }

    fn field_element(&mut self, modulus: &PrimeModulus) -> FieldElement {
        let v = modulus.element(self.inner.uniform_below(modulus.value()));
        self.transcript
            .record(self.phase, self.party, LocalKind::Randomness, &v);
        v
    }
}

/// Shares held by parties `1..=N`, summing to the secret modulo `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditiveShareSet {
    shares: Vec<Option<FieldElement>>,
    modulus: PrimeModulus,
}

impl AdditiveShareSet {
    pub fn new(shares: Vec<FieldElement>) -> Result<Self> {
        if shares.len() < 2 {
            return Err(SharingError::TooFewParties {
                needed: 2,
                got: shares.len(),
            });
        }
        let modulus = shares[0].modulus().clone();
        if shares.iter().any(|s| s.modulus() != &modulus) {
            return Err(FieldError::ModulusMismatch.into());
        }
        Ok(AdditiveShareSet {
            shares: shares.into_iter().map(Some).collect(),
            modulus,
        })
    }

    /// Shares of a public constant: party 1 holds `c`, the rest hold zero.
    pub fn constant(c: &FieldElement, n: usize) -> Result<Self> {
        let mut shares = vec![c.modulus().zero(); n];
        if let Some(first) = shares.first_mut() {
            *first = c.clone();
        }
        Self::new(shares)
    }

    pub fn party_count(&self) -> usize {
        self.shares.len()
    }

    pub fn modulus(&self) -> &PrimeModulus {
        &self.modulus
    }

    /// Share of party `i` (1-based).
    pub fn share(&self, party: usize) -> Option<&FieldElement> {
        self.shares.get(party.checked_sub(1)?)?.as_ref()
    }

    /// The set with party `i`'s share removed.
    pub fn withhold(mut self, party: usize) -> Self {
        if let Some(slot) = party.checked_sub(1).and_then(|i| self.shares.get_mut(i)) {
            *slot = None;
        }
        self
    }

    fn complete(&self) -> Result<Vec<&FieldElement>> {
        self.shares
            .iter()
            .enumerate()
            .map(|(i, s)| s.as_ref().ok_or(SharingError::MissingShare(i + 1)))
            .collect()
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&FieldElement, &FieldElement) -> FieldElement,
    ) -> Result<Self> {
        if self.party_count() != other.party_count() {
            return Err(SharingError::PartyCountMismatch {
                left: self.party_count(),
                right: other.party_count(),
            });
        }
        if self.modulus != other.modulus {
            return Err(FieldError::ModulusMismatch.into());
        }
        let a = self.complete()?;
        let b = other.complete()?;
        let shares = a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect();
        Self::new(shares)
    }

    /// Local addition of two shared values.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    /// Local multiplication by a public constant.
    pub fn scale(&self, c: &FieldElement) -> Result<Self> {
        let shares = self.complete()?.into_iter().map(|s| s * c).collect();
        Self::new(shares)
    }

    /// Adds a public constant (party 1 absorbs it).
    pub fn add_constant(&self, c: &FieldElement) -> Result<Self> {
        self.add(&Self::constant(c, self.party_count())?)
    }

    pub fn shares(&self) -> impl Iterator<Item = Option<&FieldElement>> {
        self.shares.iter().map(Option::as_ref)
    }
}

/// Splits `secret` into `n` additive shares. Shares `1..n-1` are uniform; the
/// last is `secret - Σ others`.
pub fn share_additive<R: FieldRng + ?Sized>(
    secret: &FieldElement,
    n: usize,
    rng: &mut R,
) -> Result<AdditiveShareSet> {
    if n < 2 {
        return Err(SharingError::TooFewParties { needed: 2, got: n });
    }
    let modulus = secret.modulus();
    let mut shares = Vec::with_capacity(n);
    let mut acc = modulus.zero();
    for _ in 0..n - 1 {
        let s = rng.field_element(modulus);
        acc = &acc + &s;
        shares.push(s);
    }
    shares.push(secret - &acc);
    AdditiveShareSet::new(shares)
}

pub fn reconstruct_additive(shares: &AdditiveShareSet) -> Result<FieldElement> {
    let all = shares.complete()?;
    Ok(all
        .into_iter()
        .fold(shares.modulus.zero(), |acc, s| &acc + s))
}

/// Evaluations `X(i)` of a random polynomial with `X(0)` equal to the secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShamirShareSet {
    pub threshold: usize,
    pub shares: Vec<(u64, FieldElement)>,
}

impl ShamirShareSet {
    pub fn share(&self, party: u64) -> Option<&FieldElement> {
        self.shares.iter().find(|(i, _)| *i == party).map(|(_, s)| s)
    }
}

fn horner(coeffs: &[FieldElement], x: &FieldElement) -> FieldElement {
    let mut it = coeffs.iter().rev();
    let mut acc = it.next().expect("at least one coefficient").clone();
    for c in it {
        acc = &(&acc * x) + c;
    }
    acc
}

/// k-of-N Shamir sharing. Draws `C_1..C_{k-1}` in order.
pub fn share_shamir<R: FieldRng + ?Sized>(
    secret: &FieldElement,
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<ShamirShareSet> {
    let modulus = secret.modulus();
    let n_fits = BigUint::from(n) < *modulus.value();
    if k < 1 || k > n || !n_fits {
        return Err(SharingError::InvalidThreshold { k, n });
    }
    let mut coeffs = Vec::with_capacity(k);
    coeffs.push(secret.clone());
    for _ in 1..k {
        coeffs.push(rng.field_element(modulus));
    }
    let shares = (1..=n as u64)
        .map(|i| (i, horner(&coeffs, &modulus.element(i))))
        .collect();
    Ok(ShamirShareSet {
        threshold: k,
        shares,
    })
}

/// Recovers `X(0)` from the first `k` of the given shares.
pub fn reconstruct_shamir(shares: &[(u64, FieldElement)], k: usize) -> Result<FieldElement> {
    if k == 0 || shares.len() < k {
        return Err(SharingError::InsufficientShares {
            needed: k.max(1),
            got: shares.len(),
        });
    }
    let used = &shares[..k];
    let modulus = used[0].1.modulus();
    let indices: Vec<u64> = used.iter().map(|(i, _)| *i).collect();
    let weights = lagrange_weights_at_zero(&indices, modulus)?;
    let mut acc = modulus.zero();
    for (w, (_, s)) in weights.iter().zip(used) {
        acc = &acc + &(w * s);
    }
    Ok(acc)
}

/// Secure multi-party addition. Party `i` splits its input into `N` additive
/// shares and sends share `j` to party `j`; each party sums what it holds.
pub fn smpa<R: FieldRng + ?Sized>(
    inputs: &[FieldElement],
    phase: Phase,
    rng: &mut R,
) -> Result<(AdditiveShareSet, Transcript)> {
    let mut transcript = Transcript::new();
    let out = smpa_into(inputs, phase, rng, &mut transcript)?;
    Ok((out, transcript))
}

pub(crate) fn smpa_into<R: FieldRng + ?Sized>(
    inputs: &[FieldElement],
    phase: Phase,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<AdditiveShareSet> {
    let n = inputs.len();
    if n < 2 {
        return Err(SharingError::TooFewParties { needed: 2, got: n });
    }
    let mut dealt = Vec::with_capacity(n);
    for (i, x) in inputs.iter().enumerate() {
        let party = i + 1;
        transcript.record(phase, party, LocalKind::Input, x);
        dealt.push(share_from(party, x, n, phase, rng, transcript)?);
    }
    sum_dealt(&dealt)
}

/// Party `party` additively shares `x` among `n` parties, sending share `j`
/// to party `j` and keeping its own.
pub(crate) fn share_from<R: FieldRng + ?Sized>(
    party: usize,
    x: &FieldElement,
    n: usize,
    phase: Phase,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<AdditiveShareSet> {
    let mut party_rng = PartyRng {
        inner: rng,
        party,
        phase,
        transcript,
    };
    let set = share_additive(x, n, &mut party_rng)?;
    for (j, s) in set.shares().enumerate() {
        let to = j + 1;
        if to != party {
            transcript.send(phase, party, to, s.expect("fresh share set"));
        }
    }
    Ok(set)
}

fn sum_dealt(dealt: &[AdditiveShareSet]) -> Result<AdditiveShareSet> {
    let mut acc = dealt[0].clone();
    for d in &dealt[1..] {
        acc = acc.add(d)?;
    }
    Ok(acc)
}

/// Degree of the per-party Shamir polynomials in SMPM: `floor((N-1)/2)`, so
/// the product polynomial has degree at most `N-1`.
pub fn smpm_degree(n: usize) -> usize {
    (n - 1) / 2
}

/// Secure multi-party multiplication of two additively shared values.
///
/// One communication round: each party Shamir-shares its two additive
/// shares, every party sums the evaluations it receives into `X(i)` and
/// `Y(i)`, and `θ_i = λ_i X(i) Y(i)` are additive shares of the product.
pub fn smpm<R: FieldRng + ?Sized>(
    x: &AdditiveShareSet,
    y: &AdditiveShareSet,
    phase: Phase,
    rng: &mut R,
) -> Result<(AdditiveShareSet, Transcript)> {
    let mut transcript = Transcript::new();
    let out = smpm_into(x, y, phase, rng, &mut transcript)?;
    Ok((out, transcript))
}

pub(crate) fn smpm_into<R: FieldRng + ?Sized>(
    x: &AdditiveShareSet,
    y: &AdditiveShareSet,
    phase: Phase,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<AdditiveShareSet> {
    let n = x.party_count();
    if n != y.party_count() {
        return Err(SharingError::PartyCountMismatch {
            left: n,
            right: y.party_count(),
        });
    }
    if n < 3 {
        return Err(SharingError::TooFewParties { needed: 3, got: n });
    }
    if x.modulus() != y.modulus() {
        return Err(FieldError::ModulusMismatch.into());
    }
    let modulus = x.modulus().clone();
    let xs = x.complete()?;
    let ys = y.complete()?;
    let k = smpm_degree(n) + 1;

    let mut x_at = vec![modulus.zero(); n];
    let mut y_at = vec![modulus.zero(); n];
    for i in 0..n {
        let party = i + 1;
        let mut party_rng = PartyRng {
            inner: &mut *rng,
            party,
            phase,
            transcript: &mut *transcript,
        };
        let xi = share_shamir(xs[i], k, n, &mut party_rng)?;
        let yi = share_shamir(ys[i], k, n, &mut party_rng)?;
        for j in 0..n {
            let (xv, yv) = (&xi.shares[j].1, &yi.shares[j].1);
            if j != i {
                transcript.send(phase, party, j + 1, xv);
                transcript.send(phase, party, j + 1, yv);
            }
            x_at[j] = &x_at[j] + xv;
            y_at[j] = &y_at[j] + yv;
        }
    }
    let indices: Vec<u64> = (1..=n as u64).collect();
    let lambda = lagrange_weights_at_zero(&indices, &modulus)?;
    let theta = (0..n)
        .map(|j| &lambda[j] * &(&x_at[j] * &y_at[j]))
        .collect();
    AdditiveShareSet::new(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn p(v: u64) -> PrimeModulus {
        PrimeModulus::from_u64(v).unwrap()
    }

    fn values(set: &AdditiveShareSet) -> Vec<u64> {
        set.shares().map(|s| s.unwrap().to_u64().unwrap()).collect()
    }

    /// Every assignment of `count` draws from `[0, base)`.
    fn all_draws(base: u64, count: u32) -> impl Iterator<Item = Vec<u64>> {
        (0..base.pow(count)).map(move |mut code| {
            (0..count)
                .map(|_| {
                    let d = code % base;
                    code /= base;
                    d
                })
                .collect()
        })
    }

    #[test]
    fn additive_scripted_example() {
        let m = p(7);
        let mut rng = ScriptedDraws::new([2, 5]);
        let set = share_additive(&m.zero(), 3, &mut rng).unwrap();
        assert_eq!(values(&set), vec![2, 5, 0]);
        assert_eq!(reconstruct_additive(&set).unwrap().to_u64(), Some(0));
    }

    #[test]
    fn additive_two_parties_is_definitional() {
        let m = PrimeModulus::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = m.element(123_456u32);
        let set = share_additive(&x, 2, &mut rng).unwrap();
        let s1 = set.share(1).unwrap();
        assert_eq!(set.share(2).unwrap(), &(&x - s1));
    }

    #[test]
    fn additive_errors() {
        let m = p(7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            share_additive(&m.one(), 1, &mut rng),
            Err(SharingError::TooFewParties { needed: 2, got: 1 })
        );
        let set = share_additive(&m.one(), 3, &mut rng).unwrap().withhold(2);
        assert_eq!(reconstruct_additive(&set), Err(SharingError::MissingShare(2)));
    }

    #[test]
    fn additive_reconstruct_examples() {
        let m = p(7);
        let set = AdditiveShareSet::new(vec![m.element(2u32), m.element(5u32), m.zero()]).unwrap();
        assert_eq!(reconstruct_additive(&set).unwrap().to_u64(), Some(0));
        for n in 2..12u64 {
            let set = AdditiveShareSet::new(vec![m.one(); n as usize]).unwrap();
            assert_eq!(reconstruct_additive(&set).unwrap().to_u64(), Some(n % 7));
        }
    }

    #[test]
    fn additive_round_trip() {
        let m = PrimeModulus::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..1000 {
            let x = m.random(&mut rng);
            let set = share_additive(&x, 2 + i % 6, &mut rng).unwrap();
            assert_eq!(reconstruct_additive(&set).unwrap(), x);
        }
    }

    #[test]
    fn additive_first_shares_uniform_for_every_secret() {
        let m = p(7);
        for secret in 0..7u32 {
            let mut hist: HashMap<(u64, u64), usize> = HashMap::new();
            for draws in all_draws(7, 2) {
                let set = share_additive(&m.element(secret), 3, &mut ScriptedDraws::new(draws)).unwrap();
                let v = values(&set);
                *hist.entry((v[0], v[1])).or_default() += 1;
            }
            assert_eq!(hist.len(), 49);
            assert!(hist.values().all(|&c| c == 1));
        }
    }

    #[test]
    fn shamir_examples() {
        let m = p(7);
        let set = share_shamir(&m.element(4u32), 2, 3, &mut ScriptedDraws::new([3])).unwrap();
        let got: Vec<u64> = set.shares.iter().map(|(_, s)| s.to_u64().unwrap()).collect();
        assert_eq!(got, vec![0, 3, 6]);
        let sub = vec![(1, m.zero()), (2, m.element(3u32))];
        assert_eq!(reconstruct_shamir(&sub, 2).unwrap().to_u64(), Some(4));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = share_shamir(&m.element(5u32), 1, 6, &mut rng).unwrap();
        assert!(set.shares.iter().all(|(_, s)| s.to_u64() == Some(5)));
        assert_eq!(reconstruct_shamir(&[(5, m.element(5u32))], 1).unwrap().to_u64(), Some(5));
    }

    #[test]
    fn shamir_errors() {
        let m = p(7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            share_shamir(&m.one(), 0, 3, &mut rng),
            Err(SharingError::InvalidThreshold { .. })
        ));
        assert!(matches!(
            share_shamir(&m.one(), 4, 3, &mut rng),
            Err(SharingError::InvalidThreshold { .. })
        ));
        assert!(matches!(
            share_shamir(&m.one(), 2, 7, &mut rng),
            Err(SharingError::InvalidThreshold { .. })
        ));
        assert_eq!(
            reconstruct_shamir(&[(1, m.one())], 2),
            Err(SharingError::InsufficientShares { needed: 2, got: 1 })
        );
        assert_eq!(
            reconstruct_shamir(&[(1, m.one()), (1, m.one())], 2),
            Err(SharingError::Field(FieldError::DuplicateIndex(1)))
        );
    }

    #[test]
    fn shamir_single_share_uniform_for_every_secret() {
        let m = p(7);
        for secret in 0..7u32 {
            for party in 1..=3u64 {
                let mut hist = [0usize; 7];
                for c1 in 0..7 {
                    let set =
                        share_shamir(&m.element(secret), 2, 3, &mut ScriptedDraws::new([c1])).unwrap();
                    hist[set.share(party).unwrap().to_u64().unwrap() as usize] += 1;
                }
                assert_eq!(hist, [1; 7]);
            }
        }
    }

    fn subsets(n: u64, k: usize) -> Vec<Vec<u64>> {
        (0u32..(1 << n))
            .filter(|mask| mask.count_ones() as usize == k)
            .map(|mask| (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect())
            .collect()
    }

    #[test]
    fn shamir_every_subset_reconstructs() {
        let m = PrimeModulus::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=5usize {
            for k in 1..=n {
                let secret = m.random(&mut rng);
                let set = share_shamir(&secret, k, n, &mut rng).unwrap();
                for subset in subsets(n as u64, k) {
                    let picked: Vec<(u64, FieldElement)> = subset
                        .iter()
                        .map(|&i| (i, set.share(i).unwrap().clone()))
                        .collect();
                    assert_eq!(reconstruct_shamir(&picked, k).unwrap(), secret);
                }
            }
        }
    }

    #[test]
    fn smpa_sums() {
        let m = PrimeModulus::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ones = vec![m.one(); 3];
        let (out, _) = smpa(&ones, Phase::SmpaCount, &mut rng).unwrap();
        assert_eq!(reconstruct_additive(&out).unwrap().to_u64(), Some(3));
        for i in 0..1000 {
            let n = 2 + i % 5;
            let inputs: Vec<FieldElement> = (0..n).map(|_| m.random(&mut rng)).collect();
            let plain = inputs.iter().fold(m.zero(), |a, b| &a + b);
            let (out, t) = smpa(&inputs, Phase::SmpaCount, &mut rng).unwrap();
            assert_eq!(reconstruct_additive(&out).unwrap(), plain);
            assert_eq!(t.messages.len(), n * (n - 1));
        }
    }

    #[test]
    fn smpa_received_messages_uniform_on_zero_inputs() {
        // Party 1 receives one share from each of parties 2 and 3; with all
        // inputs zero those two values are jointly uniform on Z_7^2.
        let m = p(7);
        let zeros = vec![m.zero(); 3];
        let mut hist: HashMap<Vec<u64>, usize> = HashMap::new();
        for draws in all_draws(7, 6) {
            let (out, t) = smpa(&zeros, Phase::SmpaCount, &mut ScriptedDraws::new(draws)).unwrap();
            assert!(reconstruct_additive(&out).unwrap().is_zero());
            let received: Vec<u64> = t
                .messages
                .iter()
                .filter(|msg| msg.to == 1)
                .map(|msg| msg.value.to_u64().unwrap())
                .collect();
            *hist.entry(received).or_default() += 1;
        }
        assert_eq!(hist.len(), 49);
        assert!(hist.values().all(|&c| c == 7usize.pow(4)));
    }

    #[test]
    fn smpm_examples() {
        let m = p(101);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = AdditiveShareSet::new(vec![m.element(1u32), m.element(1u32), m.element(2u32)]).unwrap();
        let y = AdditiveShareSet::new(vec![m.element(2u32), m.element(2u32), m.element(1u32)]).unwrap();
        let (xy, t) = smpm(&x, &y, Phase::SmpmPower(2), &mut rng).unwrap();
        assert_eq!(reconstruct_additive(&xy).unwrap().to_u64(), Some(20));
        assert_eq!(t.messages.len(), 2 * 3 * 2);

        let zero = AdditiveShareSet::new(vec![m.element(3u32), m.element(97u32), m.element(1u32)]).unwrap();
        let (prod, _) = smpm(&zero, &y, Phase::SmpmPower(2), &mut rng).unwrap();
        assert!(reconstruct_additive(&prod).unwrap().is_zero());
    }

    #[test]
    fn smpm_errors() {
        let m = p(101);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let two = AdditiveShareSet::new(vec![m.one(), m.one()]).unwrap();
        assert_eq!(
            smpm(&two, &two, Phase::SmpmPower(2), &mut rng).unwrap_err(),
            SharingError::TooFewParties { needed: 3, got: 2 }
        );
        let three = AdditiveShareSet::new(vec![m.one(); 3]).unwrap();
        assert_eq!(
            smpm(&three, &two, Phase::SmpmPower(2), &mut rng).unwrap_err(),
            SharingError::PartyCountMismatch { left: 3, right: 2 }
        );
    }

    #[test]
    fn smpm_products_large_field() {
        let m = PrimeModulus::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for &n in &[3usize, 4, 5, 6, 7] {
            for _ in 0..100 {
                let (a, b) = (m.random(&mut rng), m.random(&mut rng));
                let x = share_additive(&a, n, &mut rng).unwrap();
                let y = share_additive(&b, n, &mut rng).unwrap();
                let (xy, t) = smpm(&x, &y, Phase::SmpmPower(2), &mut rng).unwrap();
                assert_eq!(reconstruct_additive(&xy).unwrap(), &a * &b);
                assert_eq!(t.messages.len(), 2 * n * (n - 1));
                // each party draws two polynomials of degree floor((N-1)/2)
                assert_eq!(t.local.len(), 2 * n * smpm_degree(n));
            }
        }
    }

    #[test]
    fn disabled_transcript_records_nothing() {
        let m = p(101);
        let mut t = Transcript::disabled();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = smpa_into(&[m.one(), m.one(), m.one()], Phase::SmpaCount, &mut rng, &mut t).unwrap();
        assert_eq!(reconstruct_additive(&out).unwrap().to_u64(), Some(3));
        assert!(t.messages.is_empty() && t.local.is_empty());
    }
}
