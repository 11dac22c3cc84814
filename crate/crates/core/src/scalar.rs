//! Coefficient rings for Grassmann numbers.
//!
//! Three rings implement [`Scalar`]:
//!
//! - [`GaussianRational`]: exact `a + bi` with `a, b ∈ ℚ`, the ring for all
//!   symbolic verification.
//! - [`Surd`]: exact `p + q√d` with `p, q` Gaussian rationals and one fixed
//!   positive non-square radicand `d`. Used whenever `√κ` must stay exact.
//! - [`Complex64`]: IEEE complex floats for Monte Carlo and SDE integration.
//!
//! Conversion goes exact → float only ([`Scalar::to_complex`]).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Which family a coefficient ring belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoefficientRing {
    ExactGaussianRational,
    ComplexFloat64,
}

/// Field-like coefficient ring used by every algebraic structure in the crate.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    const RING: CoefficientRing;

    fn zero() -> Self;
    fn one() -> Self;
    /// Exact zero test for exact rings; `== 0.0` for floats.
    fn is_zero(&self) -> bool;
    fn from_rational(r: &BigRational) -> Self;
    fn imag_unit() -> Self;
    /// Multiplicative inverse, `None` for zero.
    fn inv(&self) -> Option<Self>;
    /// `√r` for a non-negative rational, if the ring can represent it.
    fn sqrt_rational(r: &BigRational) -> Option<Self>;
    fn to_complex(&self) -> Complex64;
    fn parse_text(s: &str) -> Result<Self>;

    fn from_i64(n: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(n.into()))
    }

    fn magnitude(&self) -> f64 {
        self.to_complex().norm()
    }

    fn is_exact() -> bool {
        Self::RING == CoefficientRing::ExactGaussianRational
    }
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // to_f64 on BigRational handles large numerators/denominators gracefully.
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Ok(r) = BigRational::from_str(s) {
        return Ok(r);
    }
    // terminating decimals such as `-0.25`, read exactly
    let err = || Error::Parse(format!("invalid rational `{s}`"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').ok_or_else(err)?;
    if (int.is_empty() && frac.is_empty()) || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits: BigInt = format!("0{int}{frac}").parse().map_err(|_| err())?;
    let r = BigRational::new(digits, BigInt::from(10u32).pow(frac.len() as u32));
    Ok(if neg { -r } else { r })
}

/// Exact square root of a non-negative rational, if it is a perfect square.
pub fn exact_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer();
    let d = r.denom();
    let sn = n.sqrt();
    let sd = d.sqrt();
    if &(&sn * &sn) == n && &(&sd * &sd) == d {
        Some(BigRational::new(sn, sd))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------

/// Exact Gaussian rational `re + i·im`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        Self { re, im: BigRational::zero() }
    }

    pub fn int(n: i64) -> Self {
        Self::real(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::real(rational(num, den))
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: -self.im.clone() }
    }

    fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }
}

impl Add for GaussianRational {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for GaussianRational {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for GaussianRational {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        if self.im.is_zero() && o.im.is_zero() {
            return Self::real(self.re * o.re);
        }
        Self {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}

impl Neg for GaussianRational {
    type Output = Self;
    fn neg(self) -> Self {
        Self { re: -self.re, im: -self.im }
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else {
            write!(f, "({},{})", self.re, self.im)
        }
    }
}

impl Scalar for GaussianRational {
    const RING: CoefficientRing = CoefficientRing::ExactGaussianRational;

    fn zero() -> Self {
        Self::default()
    }
    fn one() -> Self {
        Self::int(1)
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn from_rational(r: &BigRational) -> Self {
        Self::real(r.clone())
    }
    fn imag_unit() -> Self {
        Self { re: BigRational::zero(), im: BigRational::one() }
    }
    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm_sqr();
        Some(Self { re: &self.re / &n, im: -(&self.im / &n) })
    }
    fn sqrt_rational(r: &BigRational) -> Option<Self> {
        exact_sqrt(r).map(Self::real)
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }
    fn parse_text(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let (re, im) = inner
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("expected `(re,im)`, got `{s}`")))?;
            Ok(Self::new(parse_rational(re)?, parse_rational(im)?))
        } else {
            Ok(Self::real(parse_rational(s)?))
        }
    }
}

// ---------------------------------------------------------------------------

/// Exact element `rational + radical·√radicand` of a quadratic extension of ℚ(i).
///
/// The radicand is a positive rational that is not a perfect square; it is
/// only meaningful when `radical ≠ 0` and is normalized to zero otherwise.
/// Combining two values with different nonzero radicands panics: a single
/// computation is expected to adjoin exactly one square root.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Surd {
    rational: GaussianRational,
    radical: GaussianRational,
    radicand: BigRational,
}

impl Surd {
    pub fn new(rational: GaussianRational, radical: GaussianRational, radicand: BigRational) -> Self {
        if radical.is_zero() {
            return Self::from(rational);
        }
        if let Some(root) = exact_sqrt(&radicand) {
            return Self::from(rational + radical * GaussianRational::real(root));
        }
        assert!(radicand.is_positive(), "radicand must be positive");
        Self { rational, radical, radicand }
    }

    pub fn rational_part(&self) -> &GaussianRational {
        &self.rational
    }

    pub fn radical_part(&self) -> &GaussianRational {
        &self.radical
    }

    pub fn radicand(&self) -> Option<&BigRational> {
        (!self.radical.is_zero()).then_some(&self.radicand)
    }

    fn shared_radicand(&self, o: &Self) -> BigRational {
        match (self.radicand(), o.radicand()) {
            (Some(a), Some(b)) => {
                assert_eq!(a, b, "cannot combine surds with different radicands");
                a.clone()
            }
            (Some(a), None) | (None, Some(a)) => a.clone(),
            (None, None) => BigRational::zero(),
        }
    }
}

impl From<GaussianRational> for Surd {
    fn from(g: GaussianRational) -> Self {
        Self { rational: g, radical: GaussianRational::zero(), radicand: BigRational::zero() }
    }
}

impl Add for Surd {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let d = self.shared_radicand(&o);
        Surd::new(self.rational + o.rational, self.radical + o.radical, d)
    }
}

impl Sub for Surd {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Mul for Surd {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let d = self.shared_radicand(&o);
        let dq = GaussianRational::real(d.clone());
        let rational = self.rational.clone() * o.rational.clone()
            + self.radical.clone() * o.radical.clone() * dq;
        let radical = self.rational * o.radical + self.radical * o.rational;
        Surd::new(rational, radical, d)
    }
}

impl Neg for Surd {
    type Output = Self;
    fn neg(self) -> Self {
        Self { rational: -self.rational, radical: -self.radical, radicand: self.radicand }
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.radicand() {
            None => write!(f, "{}", self.rational),
            Some(d) => write!(f, "[{};{};{}]", self.rational, self.radical, d),
        }
    }
}

impl Scalar for Surd {
    const RING: CoefficientRing = CoefficientRing::ExactGaussianRational;

    fn zero() -> Self {
        Self::default()
    }
    fn one() -> Self {
        Self::from(GaussianRational::one())
    }
    fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.radical.is_zero()
    }
    fn from_rational(r: &BigRational) -> Self {
        Self::from(GaussianRational::real(r.clone()))
    }
    fn imag_unit() -> Self {
        Self::from(GaussianRational::imag_unit())
    }
    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let Some(d) = self.radicand() else {
            return self.rational.inv().map(Self::from);
        };
        // (a + b√d)^{-1} = (a − b√d) / (a² − b²d); the norm vanishes only at zero
        // because d is a positive non-square rational.
        let a = self.rational.clone();
        let b = self.radical.clone();
        let norm = a.clone() * a.clone() - b.clone() * b.clone() * GaussianRational::real(d.clone());
        let ninv = norm.inv()?;
        Some(Surd::new(a * ninv.clone(), -(b * ninv), d.clone()))
    }
    fn sqrt_rational(r: &BigRational) -> Option<Self> {
        if r.is_negative() {
            return None;
        }
        if r.is_zero() {
            return Some(Self::zero());
        }
        Some(Surd::new(GaussianRational::zero(), GaussianRational::one(), r.clone()))
    }
    fn to_complex(&self) -> Complex64 {
        let base = self.rational.to_complex();
        match self.radicand() {
            None => base,
            Some(d) => base + self.radical.to_complex() * rational_to_f64(d).sqrt(),
        }
    }
    fn parse_text(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let parts: Vec<&str> = inner.split(';').collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("expected `[a;b;d]`, got `{s}`")));
            }
            let d = parse_rational(parts[2])?;
            if !d.is_positive() {
                return Err(Error::Parse(format!("radicand must be positive in `{s}`")));
            }
            Ok(Surd::new(
                GaussianRational::parse_text(parts[0])?,
                GaussianRational::parse_text(parts[1])?,
                d,
            ))
        } else {
            GaussianRational::parse_text(s).map(Self::from)
        }
    }
}

// ---------------------------------------------------------------------------

impl Scalar for Complex64 {
    const RING: CoefficientRing = CoefficientRing::ComplexFloat64;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(rational_to_f64(r), 0.0)
    }
    fn imag_unit() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn inv(&self) -> Option<Self> {
        if Scalar::is_zero(self) {
            None
        } else {
            Some(Complex64::new(1.0, 0.0) / self)
        }
    }
    fn sqrt_rational(r: &BigRational) -> Option<Self> {
        let x = rational_to_f64(r);
        (x >= 0.0).then(|| Complex64::new(x.sqrt(), 0.0))
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
    fn parse_text(s: &str) -> Result<Self> {
        let s = s.trim();
        let float = |t: &str| -> Result<f64> {
            let t = t.trim();
            if let Ok(x) = t.parse::<f64>() {
                return Ok(x);
            }
            parse_rational(t).map(|r| rational_to_f64(&r))
        };
        if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let (re, im) = inner
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("expected `(re,im)`, got `{s}`")))?;
            Ok(Complex64::new(float(re)?, float(im)?))
        } else {
            Ok(Complex64::new(float(s)?, 0.0))
        }
    }
}
