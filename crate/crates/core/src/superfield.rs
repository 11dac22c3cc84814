//! Superspace coordinates and Laurent superfunctions `F(z, θ) = a(z) + θ·b(z)`.
//!
//! The coordinate `θ` is a formal odd variable, distinct from the Grassmann
//! generators appearing in coefficients, and always sits to the left of the
//! `b` coefficients. Moving an odd coefficient across `θ` applies the grade
//! involution.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::grassmann::{GrassmannNumber, Parity};
use crate::scalar::Scalar;

/// Default residual tolerance for float-ring superconformality checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// A point `(z, θ)` of superspace with Grassmann-valued components.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperPoint<S> {
    pub z: GrassmannNumber<S>,
    pub theta: GrassmannNumber<S>,
}

impl<S: Scalar> SuperPoint<S> {
    pub fn new(z: GrassmannNumber<S>, theta: GrassmannNumber<S>) -> Result<Self> {
        if !z.is_even() {
            return Err(Error::Parity(format!("z must be even, got {z}")));
        }
        if !theta.is_odd() {
            return Err(Error::Parity(format!("theta must be odd, got {theta}")));
        }
        if z.generators() != theta.generators() {
            return Err(Error::GeneratorMismatch { left: z.generators(), right: theta.generators() });
        }
        Ok(Self { z, theta })
    }

    pub fn generators(&self) -> usize {
        self.z.generators()
    }

    pub fn to_complex(&self) -> SuperPoint<Complex64> {
        SuperPoint { z: self.z.to_complex(), theta: self.theta.to_complex() }
    }
}

/// Laurent polynomial in `z` with Grassmann coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPoly<S> {
    generators: usize,
    coeffs: BTreeMap<i32, GrassmannNumber<S>>,
}

impl<S: Scalar> LaurentPoly<S> {
    pub fn zero(generators: usize) -> Self {
        Self { generators, coeffs: BTreeMap::new() }
    }

    pub fn monomial(exp: i32, coeff: GrassmannNumber<S>) -> Self {
        let mut p = Self::zero(coeff.generators());
        p.add_term(exp, coeff);
        p
    }

    pub fn constant(coeff: GrassmannNumber<S>) -> Self {
        Self::monomial(0, coeff)
    }

    pub fn from_terms(generators: usize, terms: impl IntoIterator<Item = (i32, GrassmannNumber<S>)>) -> Self {
        let mut p = Self::zero(generators);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, exp: i32, coeff: GrassmannNumber<S>) {
        assert_eq!(coeff.generators(), self.generators, "generator count mismatch");
        if coeff.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(exp).or_insert_with(|| GrassmannNumber::zero(self.generators));
        *slot = &*slot + &coeff;
        if slot.is_zero() {
            self.coeffs.remove(&exp);
        }
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn coeffs(&self) -> &BTreeMap<i32, GrassmannNumber<S>> {
        &self.coeffs
    }

    pub fn coeff(&self, exp: i32) -> GrassmannNumber<S> {
        self.coeffs.get(&exp).cloned().unwrap_or_else(|| GrassmannNumber::zero(self.generators))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn min_exponent(&self) -> Option<i32> {
        self.coeffs.keys().next().copied()
    }

    /// Parity of all coefficients taken together; zero counts as even.
    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for c in self.coeffs.values() {
            match c.parity() {
                Parity::Even => even = true,
                Parity::Odd => odd = true,
                Parity::Mixed => return Parity::Mixed,
            }
        }
        match (even, odd) {
            (_, false) => Parity::Even,
            (false, true) => Parity::Odd,
            _ => Parity::Mixed,
        }
    }

    fn has_parity(&self, p: Parity) -> bool {
        self.is_zero() || self.parity() == p
    }

    pub fn derivative(&self) -> Self {
        let mut out = Self::zero(self.generators);
        for (&e, c) in &self.coeffs {
            if e != 0 {
                out.add_term(e - 1, c.scale(&S::from_i64(e as i64)));
            }
        }
        out
    }

    /// Left multiplication of every coefficient by `g`.
    pub fn scale_left(&self, g: &GrassmannNumber<S>) -> Self {
        Self::from_terms(self.generators, self.coeffs.iter().map(|(e, c)| (*e, g * c)))
    }

    pub fn scale(&self, s: &S) -> Self {
        Self::from_terms(self.generators, self.coeffs.iter().map(|(e, c)| (*e, c.scale(s))))
    }

    pub fn involute(&self) -> Self {
        Self::from_terms(self.generators, self.coeffs.iter().map(|(e, c)| (*e, c.involute())))
    }

    /// Evaluates at an even Grassmann `z`; negative powers need an invertible body.
    pub fn eval(&self, z: &GrassmannNumber<S>) -> Result<GrassmannNumber<S>> {
        let mut out = GrassmannNumber::zero(self.generators);
        if self.is_zero() {
            return Ok(out);
        }
        let lo = *self.coeffs.keys().next().unwrap();
        let hi = *self.coeffs.keys().next_back().unwrap();
        let zinv = if lo < 0 { Some(z.inverse()?) } else { None };
        let mut pos = GrassmannNumber::one(self.generators);
        let mut neg = GrassmannNumber::one(self.generators);
        for k in 0..=hi.max(0) {
            if k > 0 {
                pos = &pos * z;
            }
            if let Some(c) = self.coeffs.get(&k) {
                out = &out + &(c * &pos);
            }
        }
        if let Some(zinv) = zinv {
            for k in 1..=(-lo) {
                neg = &neg * &zinv;
                if let Some(c) = self.coeffs.get(&-k) {
                    out = &out + &(c * &neg);
                }
            }
        }
        Ok(out)
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> LaurentPoly<T> {
        LaurentPoly::from_terms(self.generators, self.coeffs.iter().map(|(e, c)| (*e, c.map_scalars(f))))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    fn to_json(&self) -> Value {
        Value::Object(self.coeffs.iter().map(|(e, c)| (e.to_string(), Value::String(c.to_string()))).collect())
    }

    fn from_json(value: &Value, generators: usize) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::Parse("expected an object of exponents".into()))?;
        let mut p = Self::zero(generators);
        for (k, v) in obj {
            let e: i32 = k.trim().parse().map_err(|_| Error::Parse(format!("invalid exponent `{k}`")))?;
            let text = v.as_str().ok_or_else(|| Error::Parse(format!("coefficient for `{k}` must be a string")))?;
            p.add_term(e, GrassmannNumber::parse(text, generators)?);
        }
        Ok(p)
    }
}

impl<S: Scalar> fmt::Display for LaurentPoly<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match k {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})z")?,
                _ => write!(f, "({c})z^{k}")?,
            }
        }
        Ok(())
    }
}

impl<S: Scalar> Add for &LaurentPoly<S> {
    type Output = LaurentPoly<S>;
    fn add(self, rhs: &LaurentPoly<S>) -> LaurentPoly<S> {
        let mut out = self.clone();
        for (e, c) in &rhs.coeffs {
            out.add_term(*e, c.clone());
        }
        out
    }
}

impl<S: Scalar> Neg for &LaurentPoly<S> {
    type Output = LaurentPoly<S>;
    fn neg(self) -> LaurentPoly<S> {
        LaurentPoly::from_terms(self.generators, self.coeffs.iter().map(|(e, c)| (*e, -c)))
    }
}

impl<S: Scalar> Sub for &LaurentPoly<S> {
    type Output = LaurentPoly<S>;
    fn sub(self, rhs: &LaurentPoly<S>) -> LaurentPoly<S> {
        self + &(-rhs)
    }
}

impl<S: Scalar> Mul for &LaurentPoly<S> {
    type Output = LaurentPoly<S>;
    fn mul(self, rhs: &LaurentPoly<S>) -> LaurentPoly<S> {
        let mut out = LaurentPoly::zero(self.generators);
        for (ea, ca) in &self.coeffs {
            for (eb, cb) in &rhs.coeffs {
                out.add_term(ea + eb, ca * cb);
            }
        }
        out
    }
}

/// `F(z, θ) = a(z) + θ·b(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentSuperfunction<S> {
    pub a: LaurentPoly<S>,
    pub b: LaurentPoly<S>,
}

impl<S: Scalar> LaurentSuperfunction<S> {
    pub fn new(a: LaurentPoly<S>, b: LaurentPoly<S>) -> Self {
        assert_eq!(a.generators(), b.generators(), "generator count mismatch");
        Self { a, b }
    }

    pub fn zero(generators: usize) -> Self {
        Self::new(LaurentPoly::zero(generators), LaurentPoly::zero(generators))
    }

    pub fn constant(c: GrassmannNumber<S>) -> Self {
        let n = c.generators();
        Self::new(LaurentPoly::constant(c), LaurentPoly::zero(n))
    }

    pub fn from_a(a: LaurentPoly<S>) -> Self {
        let n = a.generators();
        Self::new(a, LaurentPoly::zero(n))
    }

    pub fn from_b(b: LaurentPoly<S>) -> Self {
        let n = b.generators();
        Self::new(LaurentPoly::zero(n), b)
    }

    /// The coordinate function `z`.
    pub fn z(generators: usize) -> Self {
        Self::from_a(LaurentPoly::monomial(1, GrassmannNumber::one(generators)))
    }

    /// The coordinate function `θ`.
    pub fn theta(generators: usize) -> Self {
        Self::from_b(LaurentPoly::constant(GrassmannNumber::one(generators)))
    }

    /// `c·z^k`.
    pub fn z_power(k: i32, c: GrassmannNumber<S>) -> Self {
        Self::from_a(LaurentPoly::monomial(k, c))
    }

    /// `θ·c·z^k`.
    pub fn theta_z_power(k: i32, c: GrassmannNumber<S>) -> Self {
        Self::from_b(LaurentPoly::monomial(k, c))
    }

    pub fn generators(&self) -> usize {
        self.a.generators()
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// Even when `a` is even and `b` is odd, odd in the opposite case.
    pub fn parity(&self) -> Parity {
        if self.a.has_parity(Parity::Even) && self.b.has_parity(Parity::Odd) {
            Parity::Even
        } else if self.a.has_parity(Parity::Odd) && self.b.has_parity(Parity::Even) {
            Parity::Odd
        } else {
            Parity::Mixed
        }
    }

    pub fn is_even(&self) -> bool {
        self.is_zero() || self.parity() == Parity::Even
    }

    pub fn is_odd(&self) -> bool {
        self.is_zero() || self.parity() == Parity::Odd
    }

    /// `g · F` for a constant Grassmann `g`.
    pub fn scale_left(&self, g: &GrassmannNumber<S>) -> Self {
        Self::new(self.a.scale_left(g), self.b.scale_left(&g.involute()))
    }

    pub fn scale(&self, s: &S) -> Self {
        Self::new(self.a.scale(s), self.b.scale(s))
    }

    /// `θ · F`.
    pub fn theta_times(&self) -> Self {
        Self::new(LaurentPoly::zero(self.generators()), self.a.clone())
    }

    /// Left derivative `∂_θ F = b`.
    pub fn d_theta(&self) -> Self {
        Self::from_a(self.b.clone())
    }

    pub fn d_z(&self) -> Self {
        Self::new(self.a.derivative(), self.b.derivative())
    }

    /// `D F = (∂_θ + θ∂_z) F = b + θ a'`.
    pub fn superderivative(&self) -> Self {
        Self::new(self.b.clone(), self.a.derivative())
    }

    pub fn eval(&self, p: &SuperPoint<S>) -> Result<GrassmannNumber<S>> {
        let a = self.a.eval(&p.z)?;
        if self.b.is_zero() {
            return Ok(a);
        }
        let b = self.b.eval(&p.z)?;
        Ok(&a + &(&p.theta * &b))
    }

    pub fn max_abs(&self) -> f64 {
        self.a.max_abs().max(self.b.max_abs())
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> LaurentSuperfunction<T> {
        LaurentSuperfunction::new(self.a.map_scalars(f), self.b.map_scalars(f))
    }

    pub fn to_complex(&self) -> LaurentSuperfunction<Complex64> {
        self.map_scalars(|c| c.to_complex())
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(GrassmannNumber::one(self.generators()));
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// `F(z', θ') = Σ a_k z'^k + θ' Σ b_k z'^k` for polynomial `F`.
    pub fn compose(&self, zp: &Self, thetap: &Self) -> Result<Self> {
        if self.a.min_exponent().is_some_and(|e| e < 0) || self.b.min_exponent().is_some_and(|e| e < 0) {
            return Err(Error::NotPolynomial);
        }
        let n = self.generators();
        let hi = self.a.coeffs().keys().chain(self.b.coeffs().keys()).copied().max().unwrap_or(0);
        let mut powers = vec![Self::constant(GrassmannNumber::one(n))];
        for k in 1..=hi.max(0) as usize {
            let next = &powers[k - 1] * zp;
            powers.push(next);
        }
        let mut a_part = Self::zero(n);
        for (e, c) in self.a.coeffs() {
            a_part = &a_part + &powers[*e as usize].scale_left(c);
        }
        let mut b_part = Self::zero(n);
        for (e, c) in self.b.coeffs() {
            b_part = &b_part + &powers[*e as usize].scale_left(c);
        }
        Ok(&a_part + &(thetap * &b_part))
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("a".into(), self.a.to_json());
        m.insert("b".into(), self.b.to_json());
        Value::Object(m)
    }

    pub fn from_json(value: &Value, generators: usize) -> Result<Self> {
        let empty = Value::Object(Map::new());
        let a = LaurentPoly::from_json(value.get("a").unwrap_or(&empty), generators)?;
        let b = LaurentPoly::from_json(value.get("b").unwrap_or(&empty), generators)?;
        Ok(Self::new(a, b))
    }
}

impl<S: Scalar> fmt::Display for LaurentSuperfunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => write!(f, "{}", self.a),
            (true, false) => write!(f, "θ[{}]", self.b),
            (false, false) => write!(f, "{} + θ[{}]", self.a, self.b),
        }
    }
}

impl<S: Scalar> Add for &LaurentSuperfunction<S> {
    type Output = LaurentSuperfunction<S>;
    fn add(self, rhs: &LaurentSuperfunction<S>) -> LaurentSuperfunction<S> {
        LaurentSuperfunction::new(&self.a + &rhs.a, &self.b + &rhs.b)
    }
}

impl<S: Scalar> Sub for &LaurentSuperfunction<S> {
    type Output = LaurentSuperfunction<S>;
    fn sub(self, rhs: &LaurentSuperfunction<S>) -> LaurentSuperfunction<S> {
        LaurentSuperfunction::new(&self.a - &rhs.a, &self.b - &rhs.b)
    }
}

impl<S: Scalar> Neg for &LaurentSuperfunction<S> {
    type Output = LaurentSuperfunction<S>;
    fn neg(self) -> LaurentSuperfunction<S> {
        LaurentSuperfunction::new(-&self.a, -&self.b)
    }
}

impl<S: Scalar> Mul for &LaurentSuperfunction<S> {
    type Output = LaurentSuperfunction<S>;
    // (a1 + θb1)(a2 + θb2) = a1 a2 + θ(â1 b2 + b1 a2), â the grade involution.
    fn mul(self, rhs: &LaurentSuperfunction<S>) -> LaurentSuperfunction<S> {
        let a = &self.a * &rhs.a;
        let b = &(&self.a.involute() * &rhs.b) + &(&self.b * &rhs.a);
        LaurentSuperfunction::new(a, b)
    }
}

/// Outcome of a superconformality test.
#[derive(Clone, Debug)]
pub struct ConformalCheck<S> {
    pub holds: bool,
    /// `Dz' − θ'·Dθ'`.
    pub residual: LaurentSuperfunction<S>,
}

/// Tests `Dz' = θ' Dθ'`. Exact rings require an identically zero residual;
/// float rings compare the largest coefficient magnitude against `tol`.
pub fn is_superconformal<S: Scalar>(
    zp: &LaurentSuperfunction<S>,
    thetap: &LaurentSuperfunction<S>,
    tol: f64,
) -> ConformalCheck<S> {
    let residual = &zp.superderivative() - &(thetap * &thetap.superderivative());
    let holds = if S::is_exact() { residual.is_zero() } else { residual.max_abs() <= tol };
    ConformalCheck { holds, residual }
}

/// Builds `z' = g + θγ`, `θ' = τ + θs` from its four component functions.
pub fn components_to_map<S: Scalar>(
    g: LaurentPoly<S>,
    gamma: LaurentPoly<S>,
    tau: LaurentPoly<S>,
    s: LaurentPoly<S>,
) -> Result<(LaurentSuperfunction<S>, LaurentSuperfunction<S>)> {
    for (name, p, want) in [("g", &g, Parity::Even), ("s", &s, Parity::Even), ("gamma", &gamma, Parity::Odd), ("tau", &tau, Parity::Odd)] {
        if !p.has_parity(want) {
            return Err(Error::Parity(format!("{name} must be {want:?}")));
        }
    }
    Ok((LaurentSuperfunction::new(g, gamma), LaurentSuperfunction::new(tau, s)))
}

/// Checks `γ = τ s` and `∂g = s² − τ ∂τ` for a map given in component form.
pub fn check_gts<S: Scalar>(zp: &LaurentSuperfunction<S>, thetap: &LaurentSuperfunction<S>) -> bool {
    let (g, gamma) = (&zp.a, &zp.b);
    let (tau, s) = (&thetap.a, &thetap.b);
    let first = (gamma - &(tau * s)).is_zero();
    let second = (&g.derivative() - &(&(s * s) - &(tau * &tau.derivative()))).is_zero();
    first && second
}

/// Proxy for local invertibility: the body of the `z¹` coefficient of `z'` is nonzero.
pub fn is_locally_invertible<S: Scalar>(zp: &LaurentSuperfunction<S>) -> bool {
    !zp.a.coeff(1).body().is_zero()
}
