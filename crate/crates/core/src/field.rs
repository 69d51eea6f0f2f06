//! Arithmetic in a prime field `Z_p` and the Lagrange weights used to turn
//! Shamir shares back into additive shares.
//!
//! Elements carry their modulus. Mixing elements from two different moduli is
//! a programming error: the operator impls panic, the `checked_*` methods
//! return [`FieldError::ModulusMismatch`].

use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(BigUint),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("elements belong to different moduli")]
    ModulusMismatch,
    #[error("duplicate evaluation index {0}")]
    DuplicateIndex(u64),
    #[error("evaluation index must be nonzero and below the modulus, got {0}")]
    InvalidIndex(u64),
}

pub type Result<T> = std::result::Result<T, FieldError>;

/// A prime modulus `p`. Cloning is cheap.
#[derive(Clone)]
pub struct PrimeModulus(Arc<BigUint>);

impl PrimeModulus {
    /// Checks primality before accepting `p`.
    ///
    /// Below 2^64 the Miller-Rabin witness set is deterministic. Above that the
    /// same bases give a probable-prime test.
    pub fn new(p: BigUint) -> Result<Self> {
        if !is_prime(&p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(PrimeModulus(Arc::new(p)))
    }

    pub fn from_u64(p: u64) -> Result<Self> {
        Self::new(BigUint::from(p))
    }

    /// `2^61 - 1`.
    pub fn mersenne61() -> Self {
        PrimeModulus(Arc::new((BigUint::one() << 61u32) - 1u32))
    }

    /// `2^521 - 1`, wide enough for fixed-point polynomial evaluation.
    pub fn mersenne521() -> Self {
        PrimeModulus(Arc::new((BigUint::one() << 521u32) - 1u32))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }

    /// The modulus as `u64`, if it fits.
    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }

    pub fn zero(&self) -> FieldElement {
        self.element(BigUint::zero())
    }

    pub fn one(&self) -> FieldElement {
        self.element(BigUint::one())
    }

    /// Reduces `v` modulo `p`.
    pub fn element(&self, v: impl Into<BigUint>) -> FieldElement {
        let v = v.into();
        let value = if &v < self.value() { v } else { v % self.value() };
        FieldElement {
            value,
            modulus: self.clone(),
        }
    }

    /// Encodes a signed integer; negative values wrap to `p - |v|`.
    pub fn from_signed(&self, v: &BigInt) -> FieldElement {
        let p = BigInt::from_biguint(Sign::Plus, self.value().clone());
        let r = v.mod_floor(&p);
        self.element(r.to_biguint().expect("mod_floor is non-negative"))
    }

    pub fn from_i64(&self, v: i64) -> FieldElement {
        self.from_signed(&BigInt::from(v))
    }

    /// Uniform element of `{0, ..., p-1}`.
    pub fn random<R: RngCore + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let v = rng.gen_biguint_below(self.value());
        FieldElement {
            value: v,
            modulus: self.clone(),
        }
    }
}

impl Default for PrimeModulus {
    fn default() -> Self {
        Self::mersenne61()
    }
}

impl PartialEq for PrimeModulus {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for PrimeModulus {}

impl fmt::Debug for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.bits() > 64 {
            write!(f, "PrimeModulus({}-bit)", self.0.bits())
        } else {
            write!(f, "PrimeModulus({})", self.0)
        }
    }
}

/// An integer in `[0, p)`.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldElement {
    value: BigUint,
    modulus: PrimeModulus,
}

impl Hash for FieldElement {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.value.hash(state);
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl FieldElement {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn modulus(&self) -> &PrimeModulus {
        &self.modulus
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.value.to_u64()
    }

    /// Signed decode: `v` if `v < p/2`, else `v - p`.
    pub fn to_signed(&self) -> BigInt {
        let p = self.modulus.value();
        let doubled: BigUint = &self.value << 1u32;
        if &doubled < p {
            BigInt::from_biguint(Sign::Plus, self.value.clone())
        } else {
            BigInt::from_biguint(Sign::Plus, self.value.clone())
                - BigInt::from_biguint(Sign::Plus, p.clone())
        }
    }

    fn same_modulus(&self, other: &Self) -> Result<()> {
        if self.modulus == other.modulus {
            Ok(())
        } else {
            Err(FieldError::ModulusMismatch)
        }
    }

    fn wrap(&self, value: BigUint) -> FieldElement {
        FieldElement {
            value,
            modulus: self.modulus.clone(),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.same_modulus(other)?;
        let mut v = &self.value + &other.value;
        if &v >= self.modulus.value() {
            v -= self.modulus.value();
        }
        Ok(self.wrap(v))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.same_modulus(other)?;
        let v = if self.value >= other.value {
            &self.value - &other.value
        } else {
            self.modulus.value() - &other.value + &self.value
        };
        Ok(self.wrap(v))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.same_modulus(other)?;
        Ok(self.wrap((&self.value * &other.value) % self.modulus.value()))
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inverse(&self) -> Result<Self> {
        if self.value.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        let p = BigInt::from_biguint(Sign::Plus, self.modulus.value().clone());
        let a = BigInt::from_biguint(Sign::Plus, self.value.clone());
        let egcd = a.extended_gcd(&p);
        debug_assert!(egcd.gcd.is_one());
        let inv = egcd.x.mod_floor(&p);
        Ok(self.wrap(inv.to_biguint().expect("non-negative")))
    }

    pub fn pow(&self, exponent: u64) -> Self {
        self.wrap(self.value.modpow(&BigUint::from(exponent), self.modulus.value()))
    }

    pub fn scale(&self, k: u64) -> Self {
        self.wrap((&self.value * k) % self.modulus.value())
    }
}

/// `mod_inverse(a)`: the `b` with `a * b = 1 (mod p)`.
pub fn mod_inverse(a: &FieldElement) -> Result<FieldElement> {
    a.inverse()
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl<'a> $trait<&'a FieldElement> for &'a FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: &'a FieldElement) -> FieldElement {
                self.$checked(rhs).expect("field elements from different moduli")
            }
        }

        impl $trait<FieldElement> for FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: FieldElement) -> FieldElement {
                (&self).$method(&rhs)
            }
        }

        impl<'a> $trait<&'a FieldElement> for FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: &'a FieldElement) -> FieldElement {
                (&self).$method(rhs)
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Sub, sub, checked_sub);
forward_binop!(Mul, mul, checked_mul);

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        if self.value.is_zero() {
            self.clone()
        } else {
            self.wrap(self.modulus.value() - &self.value)
        }
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        -&self
    }
}

/// Weights `λ_j` with `Σ λ_j X(i_j) = X(0)` for every polynomial `X` of degree
/// below `indices.len()`.
///
/// For `indices = 1..=N` these are the first row of the inverse Vandermonde
/// matrix `V_{N,N}^{-1}`.
pub fn lagrange_weights_at_zero(indices: &[u64], modulus: &PrimeModulus) -> Result<Vec<FieldElement>> {
    let p = modulus.value();
    for (pos, &i) in indices.iter().enumerate() {
        if i == 0 || &BigUint::from(i) >= p {
            return Err(FieldError::InvalidIndex(i));
        }
        if indices[..pos].contains(&i) {
            return Err(FieldError::DuplicateIndex(i));
        }
    }
    let points: Vec<FieldElement> = indices.iter().map(|&i| modulus.element(i)).collect();
    let mut weights = Vec::with_capacity(points.len());
    for (j, xj) in points.iter().enumerate() {
        let mut num = modulus.one();
        let mut den = modulus.one();
        for (k, xk) in points.iter().enumerate() {
            if k != j {
                num = &num * xk;
                den = &den * &(xk - xj);
            }
        }
        weights.push(&num * &den.inverse()?);
    }
    Ok(weights)
}

const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Miller-Rabin over the first twelve primes. Deterministic below 3.1e23,
/// which covers every `u64`.
pub fn is_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &w in WITNESSES.iter() {
        let w = BigUint::from(w);
        if n == &w {
            return true;
        }
        if (n % &w).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let shift = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> shift;
    'witness: for &w in WITNESSES.iter() {
        let mut x = BigUint::from(w).modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..shift {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
