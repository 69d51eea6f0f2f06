//! The Laplace mechanism and the polynomial inverse CDF that lets parties
//! sample its noise inside MPC.
//!
//! A polynomial of degree `d` over the full field `Z_p` cannot approximate a
//! real function: `U^z` wraps around modulo `p` as soon as `U` exceeds
//! `p^(1/z)`. The shared uniform variable is therefore drawn from a small
//! range `[0, 2^B)` (built from `B` XOR-shared random bits) and the
//! polynomial is evaluated in fixed point:
//!
//! ```text
//! w = (U + 1/2) / 2^B          midpoint quantile in (0, 1)
//! t = w - 1/2 = V / 2^(B+1)    with V = 2U - (2^B - 1) an odd integer
//! P(t) = Σ a_z t^z
//! 2^f · 2^((B+1)d) · P(t) = Σ ĉ_z V^z,   ĉ_z = round(a_z · 2^(f + (B+1)(d-z)))
//! ```
//!
//! Every quantity on the right is an integer, so the field computation is
//! exact as long as its magnitude stays below `p/2`. That bound is checked
//! when the polynomial is fitted.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldElement, PrimeModulus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplaceError {
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("u = {u} is outside the open domain (0, {domain})")]
    DomainError { u: u64, domain: u64 },
    #[error("invalid fit options: {0}")]
    InvalidOptions(String),
    #[error("fixed-point evaluation needs {required_bits} bits but the modulus leaves {available_bits}")]
    OverflowRisk { required_bits: u64, available_bits: u64 },
    #[error("least-squares fit failed: {0}")]
    FitFailed(String),
}

pub type Result<T> = std::result::Result<T, LaplaceError>;

/// Laplace distribution with mean 0 and scale `1/ε`. `ε = ∞` is accepted and
/// means no noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams {
    epsilon: f64,
}

impl LaplaceParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 {
            Ok(LaplaceParams { epsilon })
        } else {
            Err(LaplaceError::InvalidEpsilon(epsilon))
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn scale(&self) -> f64 {
        1.0 / self.epsilon
    }

    /// `(ε/2) e^{-ε|z|}`
    pub fn pdf(&self, z: f64) -> f64 {
        0.5 * self.epsilon * (-self.epsilon * z.abs()).exp()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            0.5 * (self.epsilon * z).exp()
        } else {
            1.0 - 0.5 * (-self.epsilon * z).exp()
        }
    }

    /// Inverse CDF on the open interval `(0, 1)`.
    pub fn quantile(&self, q: f64) -> f64 {
        debug_assert!(q > 0.0 && q < 1.0);
        if q <= 0.5 {
            self.scale() * (2.0 * q).ln()
        } else {
            -self.scale() * (2.0 * (1.0 - q)).ln()
        }
    }
}

/// Exact inverse CDF on the integer grid `{1, ..., domain-1}`:
/// `(1/ε) ln(2u/domain)` below the midpoint and `-(1/ε) ln(2(1 - u/domain))`
/// above it.
///
/// The upper branch is computed from `domain - u` so that
/// `inverse_cdf_exact(domain - u) == -inverse_cdf_exact(u)` holds exactly.
pub fn inverse_cdf_exact(u: u64, domain: u64, params: &LaplaceParams) -> Result<f64> {
    if u == 0 || u >= domain {
        return Err(LaplaceError::DomainError { u, domain });
    }
    let (u, d) = (u as u128, domain as u128);
    if 2 * u <= d {
        Ok(params.scale() * ((2 * u) as f64 / d as f64).ln())
    } else {
        Ok(-(params.scale() * ((2 * (d - u)) as f64 / d as f64).ln()))
    }
}

/// Inverse-transform sample from the exact Laplace distribution.
pub fn sample_laplace_exact<R: Rng + ?Sized>(params: &LaplaceParams, rng: &mut R) -> f64 {
    loop {
        let q: f64 = rng.gen();
        if q > 0.0 {
            return params.quantile(q);
        }
    }
}

/// Range of the shared uniform variable the noise polynomial is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UniformDomain {
    /// `U` uniform on all of `Z_p`. Only meaningful for polynomials whose
    /// coefficients are already field elements.
    Field,
    /// `U` uniform on `[0, 2^B)`; the polynomial variable is `V = 2U - (2^B - 1)`.
    Bits(u32),
}

/// A noise polynomial as the protocol consumes it: coefficients in `Z_p`
/// applied to powers of the shared variable, plus the fixed-point layout
/// needed to decode the result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoisePolynomial {
    modulus: PrimeModulus,
    coefficients: Vec<FieldElement>,
    domain: UniformDomain,
    fraction_bits: u32,
    extra_shift: u32,
    max_count: Option<u64>,
}

impl NoisePolynomial {
    /// Field coefficients over a field-uniform `U`, no fixed point.
    pub fn raw(coefficients: Vec<FieldElement>) -> Self {
        assert!(!coefficients.is_empty(), "polynomial needs a constant term");
        let modulus = coefficients[0].modulus().clone();
        NoisePolynomial {
            modulus,
            coefficients,
            domain: UniformDomain::Field,
            fraction_bits: 0,
            extra_shift: 0,
            max_count: None,
        }
    }

    /// All-zero coefficients: the protocol then returns exact counts.
    pub fn zero(modulus: &PrimeModulus, degree: usize) -> Self {
        Self::raw(vec![modulus.zero(); degree + 1])
    }

    pub fn modulus(&self) -> &PrimeModulus {
        &self.modulus
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    pub fn domain(&self) -> UniformDomain {
        self.domain
    }

    pub fn fraction_bits(&self) -> u32 {
        self.fraction_bits
    }

    /// Largest true count the encoding carries without wraparound, if bounded.
    pub fn max_count(&self) -> Option<u64> {
        self.max_count
    }

    /// Factor applied to the true count so it lines up with the noise term.
    pub fn count_scale(&self) -> FieldElement {
        self.modulus
            .element(BigUint::one() << (self.fraction_bits + self.extra_shift))
    }

    /// The polynomial variable for a given uniform draw.
    pub fn variable(&self, u: &BigUint) -> FieldElement {
        match self.domain {
            UniformDomain::Field => self.modulus.element(u.clone()),
            UniformDomain::Bits(b) => {
                let v = (BigInt::from_biguint(Sign::Plus, u.clone()) << 1u32)
                    - ((BigInt::one() << b) - 1);
                self.modulus.from_signed(&v)
            }
        }
    }

    /// Signed decode of an output sum into fixed-point units of
    /// `2^-fraction_bits`.
    pub fn decode_fixed(&self, sum: &FieldElement) -> i64 {
        let signed = sum.to_signed();
        let shifted = if self.extra_shift == 0 {
            signed
        } else {
            let half = BigInt::one() << (self.extra_shift - 1);
            (signed + half).div_floor(&(BigInt::one() << self.extra_shift))
        };
        shifted.to_i64().expect("decoded value fits in i64")
    }

    pub fn fixed_to_count(&self, fixed: i64) -> f64 {
        fixed as f64 / (1u64 << self.fraction_bits) as f64
    }

    /// Noise the protocol produces for uniform draw `u`, evaluated directly in
    /// the field without any sharing.
    pub fn noise_at(&self, u: &BigUint) -> f64 {
        let v = self.variable(u);
        let mut acc = self.modulus.zero();
        for c in self.coefficients.iter().rev() {
            acc = &(&acc * &v) + c;
        }
        self.fixed_to_count(self.decode_fixed(&acc))
    }
}

/// Parameters of [`fit_inverse_cdf_poly`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyFitOptions {
    pub degree: usize,
    /// The fit covers quantiles `[q, 1-q]`.
    pub clamp: f64,
    /// Output resolution is `2^-fraction_bits`.
    pub fraction_bits: u32,
    /// The shared uniform variable takes `2^uniform_bits` values.
    pub uniform_bits: u32,
    /// Largest true count the encoding must carry without wraparound.
    pub max_count: u64,
}

impl Default for PolyFitOptions {
    fn default() -> Self {
        PolyFitOptions {
            degree: 15,
            clamp: 1e-4,
            fraction_bits: 16,
            uniform_bits: 16,
            max_count: 1 << 32,
        }
    }
}

/// Fit summary in the JSON layout the CLI writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epsilon: f64,
    pub d: usize,
    pub q: f64,
    pub scale: u64,
    pub max_abs_error: f64,
    pub ks_distance: f64,
}

/// Least-squares polynomial approximation `P_{ε,d}` of the Laplace inverse CDF,
/// with its field encoding.
#[derive(Debug, Clone)]
pub struct InverseCdfPoly {
    params: LaplaceParams,
    options: PolyFitOptions,
    coefficients: Vec<f64>,
    max_abs_error: f64,
    ks_distance: f64,
    encoded: NoisePolynomial,
}

impl InverseCdfPoly {
    pub fn params(&self) -> &LaplaceParams {
        &self.params
    }

    pub fn options(&self) -> &PolyFitOptions {
        &self.options
    }

    pub fn degree(&self) -> usize {
        self.options.degree
    }

    /// Monomial coefficients in `t = w - 1/2`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Worst `|P(w) - F^{-1}(w)|` on a dense grid over `[q, 1-q]`.
    pub fn max_abs_error(&self) -> f64 {
        self.max_abs_error
    }

    /// Exact Kolmogorov-Smirnov distance between the noise distribution
    /// produced over the `2^B` uniform atoms and the Laplace CDF.
    pub fn ks_distance(&self) -> f64 {
        self.ks_distance
    }

    pub fn encoded(&self) -> &NoisePolynomial {
        &self.encoded
    }

    pub fn domain_size(&self) -> u64 {
        1u64 << self.options.uniform_bits
    }

    /// `P` at quantile `w`.
    pub fn evaluate(&self, w: f64) -> f64 {
        let t = w - 0.5;
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// `P` at the midpoint quantile of uniform atom `u`.
    pub fn noise_at_atom(&self, u: u64) -> f64 {
        self.evaluate((u as f64 + 0.5) / self.domain_size() as f64)
    }

    pub fn report(&self) -> FitReport {
        FitReport {
            epsilon: self.params.epsilon(),
            d: self.options.degree,
            q: self.options.clamp,
            scale: 1u64 << self.options.fraction_bits,
            max_abs_error: self.max_abs_error,
            ks_distance: self.ks_distance,
        }
    }
}

fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect()
}

/// Monomial coefficients of `T_0..T_d`.
fn chebyshev_monomials(d: usize) -> Vec<Vec<f64>> {
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    t.push(vec![1.0]);
    if d >= 1 {
        t.push(vec![0.0, 1.0]);
    }
    for j in 2..=d {
        let mut next = vec![0.0; j + 1];
        for (i, &c) in t[j - 1].iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, &c) in t[j - 2].iter().enumerate() {
            next[i] -= c;
        }
        t.push(next);
    }
    t
}

/// `round(x · 2^shift)` computed exactly from the binary representation of `x`.
fn round_scaled(x: f64, shift: u32) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let (mantissa, exponent, sign) = Float::integer_decode(x);
    let e = exponent as i64 + shift as i64;
    let mag = BigInt::from(mantissa);
    let rounded = if e >= 0 {
        mag << (e as u64)
    } else {
        let drop = (-e) as u64;
        let half = BigInt::one() << (drop - 1);
        (mag + half) >> drop
    };
    if sign < 0 {
        -rounded
    } else {
        rounded
    }
}

fn ks_against(params: &LaplaceParams, mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let f = params.cdf(z);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `L_ε`.
pub fn ks_statistic(params: &LaplaceParams, samples: &[f64]) -> f64 {
    ks_against(params, samples.to_vec())
}

/// Least-squares fit of the inverse CDF on Chebyshev nodes over `[q, 1-q]`,
/// encoded into `modulus`.
pub fn fit_inverse_cdf_poly(
    params: &LaplaceParams,
    options: PolyFitOptions,
    modulus: &PrimeModulus,
) -> Result<InverseCdfPoly> {
    let d = options.degree;
    let q = options.clamp;
    if d < 1 {
        return Err(LaplaceError::InvalidOptions("degree must be at least 1".into()));
    }
    if !(q > 0.0 && q < 0.5) {
        return Err(LaplaceError::InvalidOptions(format!("clamp {q} outside (0, 1/2)")));
    }
    if !(1..=30).contains(&options.uniform_bits) {
        return Err(LaplaceError::InvalidOptions(format!(
            "uniform_bits {} outside 1..=30",
            options.uniform_bits
        )));
    }
    if !params.epsilon().is_finite() {
        return Err(LaplaceError::InvalidOptions("epsilon must be finite to fit".into()));
    }

    let half_width = 0.5 - q;
    let nodes = chebyshev_nodes(4 * (d + 1));
    let rows = nodes.len();
    let design = nalgebra::DMatrix::from_fn(rows, d + 1, |i, j| (j as f64 * nodes[i].acos()).cos());
    let target = nalgebra::DVector::from_iterator(
        rows,
        nodes.iter().map(|&x| params.quantile(0.5 + x * half_width)),
    );
    let cheb = design
        .svd(true, true)
        .solve(&target, 1e-14)
        .map_err(|e| LaplaceError::FitFailed(e.to_string()))?;

    // Chebyshev basis in x = t / (1/2 - q) -> monomials in t.
    let basis = chebyshev_monomials(d);
    let mut in_x = vec![0.0; d + 1];
    for (j, poly) in basis.iter().enumerate() {
        for (i, &c) in poly.iter().enumerate() {
            in_x[i] += cheb[j] * c;
        }
    }
    let coefficients: Vec<f64> = in_x
        .iter()
        .enumerate()
        .map(|(z, &c)| c / half_width.powi(z as i32))
        .collect();

    let mut poly = InverseCdfPoly {
        params: *params,
        options,
        coefficients,
        max_abs_error: 0.0,
        ks_distance: 0.0,
        encoded: NoisePolynomial::zero(modulus, d),
    };

    const GRID: usize = 20_001;
    poly.max_abs_error = (0..GRID)
        .map(|i| {
            let w = q + (1.0 - 2.0 * q) * i as f64 / (GRID - 1) as f64;
            (poly.evaluate(w) - params.quantile(w)).abs()
        })
        .fold(0.0, f64::max);
    let atoms: Vec<f64> = (0..poly.domain_size()).map(|u| poly.noise_at_atom(u)).collect();
    poly.ks_distance = ks_against(params, atoms);
    poly.encoded = encode(&poly.coefficients, &options, modulus)?;
    Ok(poly)
}

fn encode(coefficients: &[f64], options: &PolyFitOptions, modulus: &PrimeModulus) -> Result<NoisePolynomial> {
    let d = coefficients.len() - 1;
    let step = options.uniform_bits + 1;
    let extra_shift = step * d as u32;
    let encoded: Vec<BigInt> = coefficients
        .iter()
        .enumerate()
        .map(|(z, &a)| round_scaled(a, options.fraction_bits + step * (d - z) as u32))
        .collect();

    let v_max = BigInt::from((1u64 << options.uniform_bits) - 1);
    let mut bound = BigInt::from(options.max_count) << (options.fraction_bits + extra_shift);
    let mut power = BigInt::one();
    for c in &encoded {
        bound += c.abs() * &power;
        power *= &v_max;
    }
    let required_bits = bound.bits() + 1;
    let available_bits = modulus.bits() - 1;
    // need 2 * bound < p
    if (bound << 1u32) >= BigInt::from_biguint(Sign::Plus, modulus.value().clone()) {
        return Err(LaplaceError::OverflowRisk {
            required_bits,
            available_bits,
        });
    }
    Ok(NoisePolynomial {
        modulus: modulus.clone(),
        coefficients: encoded.iter().map(|c| modulus.from_signed(c)).collect(),
        domain: UniformDomain::Bits(options.uniform_bits),
        fraction_bits: options.fraction_bits,
        extra_shift,
        max_count: Some(options.max_count),
    })
}
