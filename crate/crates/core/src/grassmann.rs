//! Finite Grassmann algebras over a [`Scalar`] ring.
//!
//! An element is a sparse sum of monomials `ψ_S = ψ_{s1} ψ_{s2} … ψ_{sk}`
//! with `s1 < s2 < … < sk`, stored as a generator bitmask. Products follow
//! the Koszul sign rule; derivatives act from the left.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_GENERATORS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    pub fn of_mask(mask: u16) -> Self {
        if mask.count_ones() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Sign of `ψ_S ψ_T` relative to `ψ_{S∪T}` for disjoint masks: `(-1)^{#{(s,t): s > t}}`.
#[inline]
pub fn reorder_sign(s: u16, t: u16) -> bool {
    let mut swaps = 0u32;
    let mut rest = t;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        swaps += (s as u32 >> (j + 1)).count_ones();
    }
    swaps % 2 == 1
}

/// Element of the Grassmann algebra on `generators` anticommuting symbols.
#[derive(Clone, PartialEq, Debug)]
pub struct GrassmannNumber<S> {
    generators: usize,
    // Sorted by mask, no zero coefficients.
    terms: Vec<(u16, S)>,
}

impl<S: Scalar> GrassmannNumber<S> {
    pub fn zero(generators: usize) -> Self {
        assert!(generators <= MAX_GENERATORS, "at most {MAX_GENERATORS} generators");
        Self { generators, terms: Vec::new() }
    }

    pub fn one(generators: usize) -> Self {
        Self::scalar(generators, S::one())
    }

    pub fn scalar(generators: usize, value: S) -> Self {
        let mut out = Self::zero(generators);
        if !value.is_zero() {
            out.terms.push((0, value));
        }
        out
    }

    /// The generator `ψ_index`.
    pub fn generator(index: usize, generators: usize) -> Result<Self> {
        if generators > MAX_GENERATORS {
            return Err(Error::TooManyGenerators { got: generators, max: MAX_GENERATORS });
        }
        if index >= generators {
            return Err(Error::GeneratorOutOfRange { index, generators });
        }
        Ok(Self { generators, terms: vec![(1 << index, S::one())] })
    }

    /// Single monomial `coeff · ψ_mask`.
    pub fn monomial(generators: usize, mask: u16, coeff: S) -> Result<Self> {
        Self::from_terms(generators, [(mask, coeff)])
    }

    pub fn from_terms(generators: usize, terms: impl IntoIterator<Item = (u16, S)>) -> Result<Self> {
        if generators > MAX_GENERATORS {
            return Err(Error::TooManyGenerators { got: generators, max: MAX_GENERATORS });
        }
        let limit: u32 = if generators == 16 { u32::MAX } else { (1u32 << generators) - 1 };
        let mut raw = Vec::new();
        for (mask, c) in terms {
            if (mask as u32) & !limit != 0 {
                return Err(Error::GeneratorOutOfRange {
                    index: 15 - mask.leading_zeros() as usize,
                    generators,
                });
            }
            raw.push((mask, c));
        }
        Ok(Self { generators, terms: merge_terms(raw) })
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn terms(&self) -> &[(u16, S)] {
        &self.terms
    }

    pub fn coeff(&self, mask: u16) -> S {
        self.terms
            .binary_search_by_key(&mask, |(m, _)| *m)
            .map(|i| self.terms[i].1.clone())
            .unwrap_or_else(|_| S::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn body(&self) -> S {
        self.coeff(0)
    }

    pub fn soul(&self) -> Self {
        Self {
            generators: self.generators,
            terms: self.terms.iter().filter(|(m, _)| *m != 0).cloned().collect(),
        }
    }

    pub fn body_soul_split(&self) -> (S, Self) {
        (self.body(), self.soul())
    }

    /// Parity of the element; zero counts as even.
    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for (m, _) in &self.terms {
            match Parity::of_mask(*m) {
                Parity::Even => even = true,
                _ => odd = true,
            }
        }
        match (even, odd) {
            (_, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::Mixed,
        }
    }

    pub fn is_even(&self) -> bool {
        self.parity() == Parity::Even
    }

    /// Odd or zero.
    pub fn is_odd(&self) -> bool {
        self.is_zero() || self.parity() == Parity::Odd
    }

    /// Grade involution: negates the odd part.
    pub fn involute(&self) -> Self {
        Self {
            generators: self.generators,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| if m.count_ones() % 2 == 1 { (*m, -c.clone()) } else { (*m, c.clone()) })
                .collect(),
        }
    }

    /// Applies the grade involution `times` times.
    pub fn involute_pow(&self, times: usize) -> Self {
        if times % 2 == 1 {
            self.involute()
        } else {
            self.clone()
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return Self::zero(self.generators);
        }
        Self {
            generators: self.generators,
            terms: merge_terms(self.terms.iter().map(|(m, c)| (*m, c.clone() * s.clone())).collect()),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut raw = self.terms.clone();
        raw.extend(other.terms.iter().cloned());
        Ok(Self { generators: self.generators, terms: merge_terms(raw) })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut raw = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let c = ca.clone() * cb.clone();
                raw.push((ma | mb, if reorder_sign(*ma, *mb) { -c } else { c }));
            }
        }
        Ok(Self { generators: self.generators, terms: merge_terms(raw) })
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.generators != other.generators {
            return Err(Error::GeneratorMismatch { left: self.generators, right: other.generators });
        }
        Ok(())
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.generators);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Inverse through the terminating series `b⁻¹ Σ_k (−s/b)^k`.
    pub fn inverse(&self) -> Result<Self> {
        let (body, soul) = self.body_soul_split();
        let binv = body.inv().ok_or(Error::NotInvertible)?;
        let step = soul.scale(&-binv.clone());
        let mut term = Self::one(self.generators);
        let mut sum = term.clone();
        for _ in 0..self.generators {
            term = &term * &step;
            if term.is_zero() {
                break;
            }
            sum = &sum + &term;
        }
        Ok(sum.scale(&binv))
    }

    /// Like [`inverse`](Self::inverse) but treats `|body| < eps` as singular.
    pub fn inverse_with_tol(&self, eps: f64) -> Result<Self> {
        if self.body().magnitude() < eps {
            return Err(Error::NotInvertible);
        }
        self.inverse()
    }

    /// Integer power, negative exponents through [`inverse`](Self::inverse).
    pub fn powi(&self, k: i32) -> Result<Self> {
        if k >= 0 {
            Ok(self.pow(k as u32))
        } else {
            Ok(self.inverse()?.pow(k.unsigned_abs()))
        }
    }

    /// Left derivative `∂/∂ψ_index`.
    pub fn derive(&self, index: usize) -> Self {
        if index >= self.generators {
            return Self::zero(self.generators);
        }
        let bit = 1u16 << index;
        let below = bit - 1;
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| m & bit != 0)
            .map(|(m, c)| {
                let neg = (m & below).count_ones() % 2 == 1;
                (m & !bit, if neg { -c.clone() } else { c.clone() })
            })
            .collect();
        Self { generators: self.generators, terms: merge_terms(terms) }
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> GrassmannNumber<T> {
        GrassmannNumber {
            generators: self.generators,
            terms: merge_terms(self.terms.iter().map(|(m, c)| (*m, f(c))).collect()),
        }
    }

    pub fn to_complex(&self) -> GrassmannNumber<Complex64> {
        self.map_scalars(|c| c.to_complex())
    }

    /// Largest coefficient magnitude (grade-wise max norm).
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.magnitude()).fold(0.0, f64::max)
    }

    /// Drops coefficients with magnitude at or below `eps`.
    pub fn normalized(&self, eps: f64) -> Self {
        Self {
            generators: self.generators,
            terms: self.terms.iter().filter(|(_, c)| c.magnitude() > eps).cloned().collect(),
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).max_abs() <= tol
    }

    /// Parses the textual form, e.g. `3/2 + (0,1)*p0p1`.
    pub fn parse(text: &str, generators: usize) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::Parse("empty Grassmann number".into()));
        }
        let mut raw = Vec::new();
        for (negate, term) in split_terms(text) {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::Parse(format!("missing term in `{text}`")));
            }
            let (coeff, mono) = if let Some((c, m)) = term.rsplit_once('*') {
                (S::parse_text(c)?, parse_monomial(m)?)
            } else if let Some(m) = term.strip_prefix('-').filter(|m| m.starts_with('p')) {
                (-S::one(), parse_monomial(m)?)
            } else if term.starts_with('p') {
                (S::one(), parse_monomial(term)?)
            } else {
                (S::parse_text(term)?, 0)
            };
            raw.push((mono, if negate { -coeff } else { coeff }));
        }
        Self::from_terms(generators, raw)
    }
}

/// Splits at ` + ` and ` - ` outside brackets; the flag marks subtracted terms.
fn split_terms(text: &str) -> Vec<(bool, &str)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut depth, mut start, mut negate) = (0i32, 0usize, false);
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b' ' if depth == 0 && i + 2 < bytes.len() && matches!(bytes[i + 1], b'+' | b'-') && bytes[i + 2] == b' ' => {
                out.push((negate, &text[start..i]));
                negate = bytes[i + 1] == b'-';
                start = i + 3;
                i += 3;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    out.push((negate, &text[start..]));
    out
}

fn parse_monomial(text: &str) -> Result<u16> {
    let mut mask = 0u16;
    for piece in text.trim().split('p').skip(1) {
        let i: usize = piece.parse().map_err(|_| Error::Parse(format!("invalid monomial `{text}`")))?;
        if i >= MAX_GENERATORS {
            return Err(Error::GeneratorOutOfRange { index: i, generators: MAX_GENERATORS });
        }
        let bit = 1u16 << i;
        if mask & bit != 0 {
            return Err(Error::Parse(format!("repeated generator in `{text}`")));
        }
        mask |= bit;
    }
    if !text.trim().starts_with('p') || mask == 0 {
        return Err(Error::Parse(format!("invalid monomial `{text}`")));
    }
    Ok(mask)
}

pub fn monomial_name(mask: u16) -> String {
    (0..16).filter(|i| mask & (1 << i) != 0).map(|i| format!("p{i}")).collect()
}

fn merge_terms<S: Scalar>(mut raw: Vec<(u16, S)>) -> Vec<(u16, S)> {
    raw.sort_by_key(|(m, _)| *m);
    let mut out: Vec<(u16, S)> = Vec::with_capacity(raw.len());
    for (m, c) in raw {
        match out.last_mut() {
            Some((lm, lc)) if *lm == m => *lc = lc.clone() + c,
            _ => out.push((m, c)),
        }
    }
    out.retain(|(_, c)| !c.is_zero());
    out
}

impl<S: Scalar> fmt::Display for GrassmannNumber<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if *m == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*{}", monomial_name(*m))?;
            }
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl<S: Scalar> $tr<&GrassmannNumber<S>> for &GrassmannNumber<S> {
            type Output = GrassmannNumber<S>;
            /// Panics when the generator counts differ.
            fn $method(self, rhs: &GrassmannNumber<S>) -> GrassmannNumber<S> {
                self.$checked(rhs).expect("Grassmann operands must share the generator count")
            }
        }
        impl<S: Scalar> $tr for GrassmannNumber<S> {
            type Output = GrassmannNumber<S>;
            fn $method(self, rhs: GrassmannNumber<S>) -> GrassmannNumber<S> {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Mul, mul, checked_mul);

impl<S: Scalar> Neg for &GrassmannNumber<S> {
    type Output = GrassmannNumber<S>;
    fn neg(self) -> GrassmannNumber<S> {
        GrassmannNumber {
            generators: self.generators,
            terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect(),
        }
    }
}

impl<S: Scalar> Neg for GrassmannNumber<S> {
    type Output = GrassmannNumber<S>;
    fn neg(self) -> GrassmannNumber<S> {
        -&self
    }
}

impl<S: Scalar> Sub<&GrassmannNumber<S>> for &GrassmannNumber<S> {
    type Output = GrassmannNumber<S>;
    fn sub(self, rhs: &GrassmannNumber<S>) -> GrassmannNumber<S> {
        self + &(-rhs)
    }
}

impl<S: Scalar> Sub for GrassmannNumber<S> {
    type Output = GrassmannNumber<S>;
    fn sub(self, rhs: GrassmannNumber<S>) -> GrassmannNumber<S> {
        &self - &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::GaussianRational as Q;

    type G = GrassmannNumber<Q>;

    fn psi(i: usize) -> G {
        G::generator(i, 4).unwrap()
    }

    fn q(n: i64) -> G {
        G::scalar(4, Q::int(n))
    }

    #[test]
    fn generator_basics() {
        let p0 = psi(0);
        assert_eq!(p0.terms(), &[(1, Q::int(1))]);
        assert!((&p0 * &p0).is_zero());
        assert_eq!(psi(2).parity(), Parity::Odd);
        assert_eq!(G::generator(4, 4), Err(Error::GeneratorOutOfRange { index: 4, generators: 4 }));
    }

    #[test]
    fn koszul_signs() {
        assert_eq!(&psi(1) * &psi(0), -(&psi(0) * &psi(1)));
        let p01 = &psi(0) * &psi(1);
        let a = &q(1) + &p01;
        let b = &q(1) - &p01;
        assert_eq!(&a * &b, q(1));
        let p012 = &p01 * &psi(2);
        assert_eq!(&psi(2) * &p01, p012);
        assert_eq!(p012.terms(), &[(0b111, Q::int(1))]);
    }

    #[test]
    fn inverse_cases() {
        assert_eq!(q(2).inverse().unwrap(), G::scalar(4, Q::ratio(1, 2)));
        let p01 = &psi(0) * &psi(1);
        assert_eq!((&q(1) + &p01).inverse().unwrap(), &q(1) - &p01);
        assert_eq!(psi(0).inverse(), Err(Error::NotInvertible));
    }

    #[test]
    fn derivative_cases() {
        let p01 = &psi(0) * &psi(1);
        assert_eq!(p01.derive(1), -psi(0));
        assert_eq!((&q(1) + &psi(0)).derive(0), q(1));
    }

    #[test]
    fn split_and_parity() {
        let p01 = &psi(0) * &psi(1);
        let x = &q(3) + &p01;
        assert_eq!(x.body_soul_split(), (Q::int(3), p01.clone()));
        let odd = &psi(0) + &(&p01 * &psi(2));
        assert_eq!(odd.parity(), Parity::Odd);
        assert_eq!((&q(1) + &psi(0)).parity(), Parity::Mixed);
    }

    #[test]
    fn mismatch_is_an_error() {
        let a = G::one(2);
        let b = G::one(3);
        assert!(matches!(a.checked_mul(&b), Err(Error::GeneratorMismatch { .. })));
    }

    #[test]
    fn text_round_trip() {
        let x = G::parse("3/2 + (0,1)*p0p1", 4).unwrap();
        assert_eq!(x.body(), Q::ratio(3, 2));
        assert_eq!(x.coeff(0b11), Q::imag_unit());
        assert_eq!(x.to_string(), "3/2 + (0,1)*p0p1");
        assert_eq!(G::parse("-p2 + p0p3", 4).unwrap(), &(&psi(0) * &psi(3)) - &psi(2));
        assert!(G::parse("2*p0p0", 4).is_err());
        assert!(G::parse("p7", 4).is_err());
        assert_eq!(G::parse("0", 4).unwrap(), G::zero(4));
        let diff = G::parse("2 + p0p1 - 1/2*p2p3 - (1,-1)*p0", 4).unwrap();
        assert_eq!(diff.coeff(0b1100), Q::ratio(-1, 2));
        assert_eq!(diff.coeff(0b0001), Q::new(crate::scalar::rational(-1, 1), crate::scalar::rational(1, 1)));
        assert!(G::parse("2 + ", 4).is_err());
    }
}
