//! The N=1 Neveu-Schwarz superconformal algebra, its Virasoro subalgebra, and
//! level-truncated Verma modules.
//!
//! Vectors are expanded in the PBW basis
//! `L_{-n1}…L_{-nk} G_{-r1}…G_{-rm}|Δ⟩` with `n1 ≥ … ≥ nk ≥ 1` and
//! `r1 > … > rm ≥ 1/2`. Normal ordering happens over exact rationals; the
//! Grassmann coefficients of algebra elements and vectors are combined
//! afterwards, with odd coefficients anticommuting past `G` modes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grassmann::{GrassmannNumber, Parity};
use crate::scalar::{rational, Scalar};

/// A half-integer stored as twice its value: `Half(3)` is `3/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Half(pub i32);

impl Half {
    pub fn from_int(n: i32) -> Self {
        Half(2 * n)
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn to_rational(self) -> BigRational {
        rational(self.0 as i64, 2)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Default level cutoff, `7/2`.
pub const DEFAULT_CUTOFF: Half = Half(7);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    L(i32),
    /// `G_r` with `r` a half-integer.
    G(Half),
}

impl Mode {
    /// `G_r` from twice its index; panics on integer indices (NS sector only).
    pub fn g(twice: i32) -> Self {
        assert!(twice % 2 != 0, "G modes are half-integer in the NS sector");
        Mode::G(Half(twice))
    }

    /// Twice the mode index.
    pub fn twice_index(self) -> i32 {
        match self {
            Mode::L(n) => 2 * n,
            Mode::G(r) => r.0,
        }
    }

    /// Level raised by the mode: `−index`.
    pub fn level(self) -> Half {
        Half(-self.twice_index())
    }

    pub fn is_odd(self) -> bool {
        matches!(self, Mode::G(_))
    }

    pub fn is_lowering(self) -> bool {
        self.twice_index() < 0
    }

    pub fn is_raising(self) -> bool {
        self.twice_index() > 0
    }

    fn pbw_key(self) -> (u8, i32) {
        match self {
            Mode::L(n) => (0, n),
            Mode::G(r) => (1, r.0),
        }
    }

    /// Whether `self` may stand immediately left of `other` in a PBW monomial.
    fn pbw_precedes(self, other: Mode) -> bool {
        let (a, b) = (self.pbw_key(), other.pbw_key());
        a < b || (a == b && !self.is_odd())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::L(n) => write!(f, "L_{{{n}}}"),
            Mode::G(r) => write!(f, "G_{{{r}}}"),
        }
    }
}

fn word_parity(word: &[Mode]) -> usize {
    word.iter().filter(|m| m.is_odd()).count() % 2
}

/// Rational linear combination of modes plus a central scalar.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModeCombination {
    pub modes: BTreeMap<Mode, BigRational>,
    pub central: BigRational,
}

impl ModeCombination {
    pub fn mode(m: Mode) -> Self {
        let mut modes = BTreeMap::new();
        modes.insert(m, BigRational::one());
        Self { modes, central: BigRational::zero() }
    }

    fn add_mode(&mut self, m: Mode, c: BigRational) {
        let e = self.modes.entry(m).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.modes.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty() && self.central.is_zero()
    }

    fn scaled(&self, s: &BigRational) -> Self {
        let mut out = Self::default();
        for (m, c) in &self.modes {
            out.add_mode(*m, c * s);
        }
        out.central = &self.central * s;
        out
    }

    fn accumulate(&mut self, other: &Self) {
        for (m, c) in &other.modes {
            self.add_mode(*m, c.clone());
        }
        self.central += &other.central;
    }

    /// Bracket with another combination; central parts drop out.
    pub fn bracket(&self, other: &Self, c: &BigRational) -> Self {
        let mut out = Self::default();
        for (a, ca) in &self.modes {
            for (b, cb) in &other.modes {
                out.accumulate(&bracket_modes(*a, *b, c).scaled(&(ca * cb)));
            }
        }
        out
    }
}

/// Graded bracket `[a, b}` (anticommutator for two `G` modes).
pub fn bracket_modes(a: Mode, b: Mode, c: &BigRational) -> ModeCombination {
    let mut out = ModeCombination::default();
    match (a, b) {
        (Mode::L(n), Mode::L(m)) => {
            out.add_mode(Mode::L(n + m), BigRational::from_integer((n - m).into()));
            if n + m == 0 {
                let n = n as i64;
                out.central = c * rational(n * (n * n - 1), 12);
            }
        }
        (Mode::L(n), Mode::G(r)) => {
            // (n/2 − r) G_{n+r}
            out.add_mode(Mode::G(Half(2 * n + r.0)), rational((n - r.0) as i64, 2));
        }
        (Mode::G(r), Mode::L(n)) => {
            out.add_mode(Mode::G(Half(2 * n + r.0)), -rational((n - r.0) as i64, 2));
        }
        (Mode::G(r), Mode::G(s)) => {
            let sum = r.0 + s.0;
            out.add_mode(Mode::L(sum / 2), BigRational::from_integer(2.into()));
            if sum == 0 {
                let r2 = (r.0 as i64) * (r.0 as i64);
                // (c/3)(r² − 1/4) with r = r2/4 in twice units
                out.central = c * rational(r2 - 1, 12);
            }
        }
    }
    out
}

/// `[a,[b,c}} − [[a,b},c} − (−1)^{|a||b|}[b,[a,c}}`, central terms included.
pub fn jacobi_residual(a: Mode, b: Mode, x: Mode, c: &BigRational) -> ModeCombination {
    let (ma, mb, mx) = (ModeCombination::mode(a), ModeCombination::mode(b), ModeCombination::mode(x));
    let sign = if a.is_odd() && b.is_odd() { -BigRational::one() } else { BigRational::one() };
    let mut out = ma.bracket(&mb.bracket(&mx, c), c);
    out.accumulate(&ma.bracket(&mb, c).bracket(&mx, c).scaled(&-BigRational::one()));
    out.accumulate(&mb.bracket(&ma.bracket(&mx, c), c).scaled(&-sign));
    out
}

/// Checks graded antisymmetry and the graded Jacobi identity on all modes with
/// `|index| ≤ max_twice / 2`; returns the first failing combination.
pub fn check_algebra_axioms(c: &BigRational, max_twice: i32) -> std::result::Result<usize, String> {
    let modes: Vec<Mode> = (-max_twice..=max_twice)
        .map(|k| if k % 2 == 0 { Mode::L(k / 2) } else { Mode::G(Half(k)) })
        .collect();
    let mut checked = 0;
    for &a in &modes {
        for &b in &modes {
            let sign = if a.is_odd() && b.is_odd() { -BigRational::one() } else { BigRational::one() };
            let mut anti = bracket_modes(a, b, c);
            anti.accumulate(&bracket_modes(b, a, c).scaled(&sign));
            if !anti.is_zero() {
                return Err(format!("graded antisymmetry fails for {a}, {b}"));
            }
            for &x in &modes {
                if !jacobi_residual(a, b, x, c).is_zero() {
                    return Err(format!("Jacobi identity fails for {a}, {b}, {x}"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// The bracket as an algebra element with Grassmann-scalar coefficients.
pub fn bracket<S: Scalar>(a: Mode, b: Mode, c: &BigRational, generators: usize) -> AlgebraElement<S> {
    let comb = bracket_modes(a, b, c);
    let mut out = AlgebraElement::scalar(GrassmannNumber::scalar(generators, S::from_rational(&comb.central)));
    for (m, coef) in comb.modes {
        out = &out + &AlgebraElement::mode(m, GrassmannNumber::scalar(generators, S::from_rational(&coef)));
    }
    out
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlgebraKind {
    Virasoro,
    NeveuSchwarz,
}

impl AlgebraKind {
    fn name(self) -> &'static str {
        match self {
            AlgebraKind::Virasoro => "Virasoro",
            AlgebraKind::NeveuSchwarz => "Neveu-Schwarz",
        }
    }

    fn admits(self, m: Mode) -> bool {
        self == AlgebraKind::NeveuSchwarz || !m.is_odd()
    }
}

/// What `apply` does with terms above the level cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Overflow {
    Error,
    Trim,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModuleParams {
    pub kind: AlgebraKind,
    pub c: BigRational,
    pub delta: BigRational,
    pub level_cutoff: Half,
    pub overflow: Overflow,
}

impl ModuleParams {
    pub fn ns(c: BigRational, delta: BigRational) -> Self {
        Self { kind: AlgebraKind::NeveuSchwarz, c, delta, level_cutoff: DEFAULT_CUTOFF, overflow: Overflow::Error }
    }

    pub fn virasoro(c: BigRational, delta: BigRational) -> Self {
        Self { kind: AlgebraKind::Virasoro, c, delta, level_cutoff: DEFAULT_CUTOFF, overflow: Overflow::Error }
    }

    pub fn with_cutoff(mut self, cutoff: Half) -> Self {
        assert!(cutoff.0 >= 0, "level cutoff must be non-negative");
        self.level_cutoff = cutoff;
        self
    }

    pub fn with_overflow(mut self, overflow: Overflow) -> Self {
        self.overflow = overflow;
        self
    }

    pub fn with_delta(mut self, delta: BigRational) -> Self {
        self.delta = delta;
        self
    }
}

fn check_kappa(kappa: &BigRational) -> Result<()> {
    if !kappa.is_positive() {
        return Err(Error::InvalidKappa(kappa.to_string()));
    }
    Ok(())
}

/// `c_κ = 15/2 − 3(κ + 1/κ)`, `Δ_κ = (2 − κ)/(2κ)`.
pub fn params_from_kappa_ns(kappa: &BigRational) -> Result<ModuleParams> {
    check_kappa(kappa)?;
    let c = rational(15, 2) - BigRational::from_integer(3.into()) * (kappa + kappa.recip());
    let delta = (BigRational::from_integer(2.into()) - kappa) / (kappa * BigRational::from_integer(2.into()));
    Ok(ModuleParams::ns(c, delta))
}

/// `c_κ = 1 − 3(4 − κ)²/(2κ)`, `Δ_κ = (6 − κ)/(2κ)`.
pub fn virasoro_params(kappa: &BigRational) -> Result<ModuleParams> {
    check_kappa(kappa)?;
    let four = BigRational::from_integer(4.into());
    let two_k = kappa * BigRational::from_integer(2.into());
    let d = &four - kappa;
    let c = BigRational::one() - BigRational::from_integer(3.into()) * &d * &d / &two_k;
    let delta = (BigRational::from_integer(6.into()) - kappa) / two_k;
    Ok(ModuleParams::virasoro(c, delta))
}

/// `12Δ − (2Δ + 1)(3Δ + c)`.
pub fn ns_condition_residual(c: &BigRational, delta: &BigRational) -> BigRational {
    let (lhs, rhs) = ns_condition_sides(c, delta);
    lhs - rhs
}

fn ns_condition_sides(c: &BigRational, delta: &BigRational) -> (BigRational, BigRational) {
    let two = BigRational::from_integer(2.into());
    let three = BigRational::from_integer(3.into());
    let lhs = BigRational::from_integer(12.into()) * delta;
    let rhs = (&two * delta + BigRational::one()) * (&three * delta + c);
    (lhs, rhs)
}

// ---------------------------------------------------------------------------

/// PBW-ordered word of lowering modes acting on `|Δ⟩`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BasisMonomial(pub Vec<Mode>);

impl BasisMonomial {
    pub fn vacuum() -> Self {
        Self(Vec::new())
    }

    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        for w in modes.windows(2) {
            if !w[0].pbw_precedes(w[1]) {
                return Err(Error::Invalid(format!("{} {} is not PBW ordered", w[0], w[1])));
            }
        }
        if modes.iter().any(|m| !m.is_lowering()) {
            return Err(Error::Invalid("basis monomials contain lowering modes only".into()));
        }
        Ok(Self(modes))
    }

    pub fn level(&self) -> Half {
        Half(self.0.iter().map(|m| m.level().0).sum())
    }

    pub fn modes(&self) -> &[Mode] {
        &self.0
    }
}

impl fmt::Display for BasisMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.0 {
            write!(f, "{m}")?;
        }
        write!(f, "|Δ⟩")
    }
}

/// All PBW monomials of level at most `max_level`, ordered by level.
pub fn basis(kind: AlgebraKind, max_level: Half) -> Vec<BasisMonomial> {
    fn l_parts(budget: i32, max_part: i32, prefix: &mut Vec<Mode>, out: &mut Vec<Vec<Mode>>) {
        out.push(prefix.clone());
        for n in (1..=max_part.min(budget / 2)).rev() {
            prefix.push(Mode::L(-n));
            l_parts(budget - 2 * n, n, prefix, out);
            prefix.pop();
        }
    }
    fn g_parts(budget: i32, max_twice: i32, prefix: &mut Vec<Mode>, out: &mut Vec<Vec<Mode>>) {
        out.push(prefix.clone());
        let mut k = max_twice.min(budget);
        if k % 2 == 0 {
            k -= 1;
        }
        while k >= 1 {
            prefix.push(Mode::G(Half(-k)));
            g_parts(budget - k, k - 2, prefix, out);
            prefix.pop();
            k -= 2;
        }
    }
    let budget = max_level.0;
    let mut ls = Vec::new();
    l_parts(budget, budget / 2, &mut Vec::new(), &mut ls);
    let mut out = Vec::new();
    for l in ls {
        let used: i32 = l.iter().map(|m| m.level().0).sum();
        let mut gs = Vec::new();
        if kind == AlgebraKind::NeveuSchwarz {
            g_parts(budget - used, budget - used, &mut Vec::new(), &mut gs);
        } else {
            gs.push(Vec::new());
        }
        for g in gs {
            let mut w = l.clone();
            w.extend(g);
            out.push(BasisMonomial(w));
        }
    }
    out.sort_by(|a, b| a.level().cmp(&b.level()).then_with(|| a.cmp(b)));
    out
}

pub type RationalVector = BTreeMap<BasisMonomial, BigRational>;

fn rv_add(target: &mut RationalVector, mono: BasisMonomial, c: BigRational) {
    if c.is_zero() {
        return;
    }
    let e = target.entry(mono.clone()).or_insert_with(BigRational::zero);
    *e += c;
    if e.is_zero() {
        target.remove(&mono);
    }
}

/// Normal-orders words against a highest-weight vector; memoized per instance.
struct Orderer<'a> {
    params: &'a ModuleParams,
    cache: HashMap<(Mode, BasisMonomial), RationalVector>,
}

impl<'a> Orderer<'a> {
    fn new(params: &'a ModuleParams) -> Self {
        Self { params, cache: HashMap::new() }
    }

    fn act(&mut self, m: Mode, mono: &BasisMonomial) -> RationalVector {
        let key = (m, mono.clone());
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let out = self.act_uncached(m, mono);
        self.cache.insert(key, out.clone());
        out
    }

    fn act_uncached(&mut self, m: Mode, mono: &BasisMonomial) -> RationalVector {
        let mut out = RationalVector::new();
        if m == Mode::L(0) {
            rv_add(&mut out, mono.clone(), &self.params.delta + mono.level().to_rational());
            return out;
        }
        let Some((&x, rest)) = mono.0.split_first() else {
            if m.is_lowering() {
                out.insert(BasisMonomial(vec![m]), BigRational::one());
            }
            return out;
        };
        let rest = BasisMonomial(rest.to_vec());
        if m.is_lowering() && m.pbw_precedes(x) {
            let mut w = vec![m];
            w.extend_from_slice(&mono.0);
            out.insert(BasisMonomial(w), BigRational::one());
            return out;
        }
        if m.is_lowering() && m == x && m.is_odd() {
            // G_r G_r = ½{G_r, G_r} = L_{2r}
            return self.act(Mode::L(m.twice_index()), &rest);
        }
        // m x = ± x m + [m, x}
        let sign = if m.is_odd() && x.is_odd() { -BigRational::one() } else { BigRational::one() };
        let inner = self.act(m, &rest);
        for (mm, c) in self.act_vec(x, &inner) {
            rv_add(&mut out, mm, c * &sign);
        }
        let br = bracket_modes(m, x, &self.params.c);
        for (mode, coef) in &br.modes {
            for (mm, c) in self.act(*mode, &rest) {
                rv_add(&mut out, mm, c * coef);
            }
        }
        rv_add(&mut out, rest, br.central.clone());
        out
    }

    fn act_vec(&mut self, m: Mode, v: &RationalVector) -> RationalVector {
        let mut out = RationalVector::new();
        for (mono, c) in v {
            for (mm, cc) in self.act(m, mono) {
                rv_add(&mut out, mm, cc * c);
            }
        }
        out
    }

    /// `word · |mono⟩`, the rightmost mode acting first.
    fn act_word(&mut self, word: &[Mode], mono: &BasisMonomial) -> RationalVector {
        let mut v = RationalVector::new();
        v.insert(mono.clone(), BigRational::one());
        for &m in word.iter().rev() {
            v = self.act_vec(m, &v);
            if v.is_empty() {
                break;
            }
        }
        v
    }
}

/// Normal-orders `word · mono` over the rationals.
pub fn normal_order(params: &ModuleParams, word: &[Mode], mono: &BasisMonomial) -> RationalVector {
    Orderer::new(params).act_word(word, mono)
}

// ---------------------------------------------------------------------------

/// Finite sum of words in the modes with Grassmann coefficients on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement<S> {
    generators: usize,
    terms: BTreeMap<Vec<Mode>, GrassmannNumber<S>>,
}

impl<S: Scalar> AlgebraElement<S> {
    pub fn zero(generators: usize) -> Self {
        Self { generators, terms: BTreeMap::new() }
    }

    /// `g · 1`.
    pub fn scalar(g: GrassmannNumber<S>) -> Self {
        Self::word(Vec::new(), g)
    }

    pub fn mode(m: Mode, coeff: GrassmannNumber<S>) -> Self {
        Self::word(vec![m], coeff)
    }

    pub fn word(word: Vec<Mode>, coeff: GrassmannNumber<S>) -> Self {
        let mut out = Self::zero(coeff.generators());
        out.add_term(word, coeff);
        out
    }

    fn add_term(&mut self, word: Vec<Mode>, coeff: GrassmannNumber<S>) {
        assert_eq!(coeff.generators(), self.generators, "generator count mismatch");
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&word) {
            Some(slot) => {
                *slot = &*slot + &coeff;
                if slot.is_zero() {
                    self.terms.remove(&word);
                }
            }
            None => {
                self.terms.insert(word, coeff);
            }
        }
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Mode>, &GrassmannNumber<S>)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale_left(&self, g: &GrassmannNumber<S>) -> Self {
        let mut out = Self::zero(self.generators);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), g * c);
        }
        out
    }

    /// Total parity: coefficient parity combined with the number of `G` modes.
    pub fn parity(&self) -> Parity {
        let mut seen = None;
        for (w, c) in &self.terms {
            let p = match c.parity() {
                Parity::Mixed => return Parity::Mixed,
                cp => {
                    let odd = (cp == Parity::Odd) as usize ^ word_parity(w);
                    if odd == 1 {
                        Parity::Odd
                    } else {
                        Parity::Even
                    }
                }
            };
            match seen {
                None => seen = Some(p),
                Some(q) if q != p => return Parity::Mixed,
                _ => {}
            }
        }
        seen.unwrap_or(Parity::Even)
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        self.terms.keys().flat_map(|w| w.iter().copied())
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> AlgebraElement<T> {
        let mut out = AlgebraElement::zero(self.generators);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), c.map_scalars(f));
        }
        out
    }
}

impl<S: Scalar> Add for &AlgebraElement<S> {
    type Output = AlgebraElement<S>;
    fn add(self, rhs: &AlgebraElement<S>) -> AlgebraElement<S> {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }
}

impl<S: Scalar> Neg for &AlgebraElement<S> {
    type Output = AlgebraElement<S>;
    fn neg(self) -> AlgebraElement<S> {
        let mut out = AlgebraElement::zero(self.generators);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), -c);
        }
        out
    }
}

impl<S: Scalar> Sub for &AlgebraElement<S> {
    type Output = AlgebraElement<S>;
    fn sub(self, rhs: &AlgebraElement<S>) -> AlgebraElement<S> {
        self + &(-rhs)
    }
}

impl<S: Scalar> Mul for &AlgebraElement<S> {
    type Output = AlgebraElement<S>;
    /// `(c1 w1)(c2 w2) = c1 ĉ2 w1 w2`, `ĉ2` involuted once per `G` in `w1`.
    fn mul(self, rhs: &AlgebraElement<S>) -> AlgebraElement<S> {
        let mut out = AlgebraElement::zero(self.generators);
        for (w1, c1) in &self.terms {
            let flips = word_parity(w1);
            for (w2, c2) in &rhs.terms {
                let mut w = w1.clone();
                w.extend_from_slice(w2);
                out.add_term(w, c1 * &c2.involute_pow(flips));
            }
        }
        out
    }
}

impl<S: Scalar> fmt::Display for AlgebraElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for m in w {
                write!(f, "{m}")?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------

/// Vector in a level-truncated Verma module with Grassmann coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct VermaVector<S> {
    params: ModuleParams,
    generators: usize,
    entries: BTreeMap<BasisMonomial, GrassmannNumber<S>>,
}

impl<S: Scalar> VermaVector<S> {
    pub fn zero(params: ModuleParams, generators: usize) -> Self {
        Self { params, generators, entries: BTreeMap::new() }
    }

    /// `|Δ⟩`.
    pub fn highest_weight(params: ModuleParams, generators: usize) -> Self {
        let mut v = Self::zero(params, generators);
        v.add_entry(BasisMonomial::vacuum(), GrassmannNumber::one(generators));
        v
    }

    pub fn from_rational(params: ModuleParams, generators: usize, rv: &RationalVector) -> Self {
        let mut v = Self::zero(params, generators);
        for (m, c) in rv {
            v.add_entry(m.clone(), GrassmannNumber::scalar(generators, S::from_rational(c)));
        }
        v
    }

    pub fn add_entry(&mut self, mono: BasisMonomial, coeff: GrassmannNumber<S>) {
        assert_eq!(coeff.generators(), self.generators, "generator count mismatch");
        if coeff.is_zero() {
            return;
        }
        match self.entries.get_mut(&mono) {
            Some(slot) => {
                *slot = &*slot + &coeff;
                if slot.is_zero() {
                    self.entries.remove(&mono);
                }
            }
            None => {
                self.entries.insert(mono, coeff);
            }
        }
    }

    pub fn params(&self) -> &ModuleParams {
        &self.params
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn entries(&self) -> &BTreeMap<BasisMonomial, GrassmannNumber<S>> {
        &self.entries
    }

    pub fn coeff(&self, mono: &BasisMonomial) -> GrassmannNumber<S> {
        self.entries.get(mono).cloned().unwrap_or_else(|| GrassmannNumber::zero(self.generators))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// The common level of all terms, if the vector is homogeneous and nonzero.
    pub fn level(&self) -> Option<Half> {
        let mut levels = self.entries.keys().map(|m| m.level());
        let first = levels.next()?;
        levels.all(|l| l == first).then_some(first)
    }

    pub fn scale_left(&self, g: &GrassmannNumber<S>) -> Self {
        let mut out = Self::zero(self.params.clone(), self.generators);
        for (m, c) in &self.entries {
            out.add_entry(m.clone(), g * c);
        }
        out
    }

    /// Overall parity (coefficient parity combined with the number of `G` modes).
    pub fn parity(&self) -> Parity {
        let mut seen = None;
        for (m, c) in &self.entries {
            let p = match c.parity() {
                Parity::Mixed => return Parity::Mixed,
                cp => {
                    if ((cp == Parity::Odd) as usize ^ word_parity(&m.0)) == 1 {
                        Parity::Odd
                    } else {
                        Parity::Even
                    }
                }
            };
            match seen {
                None => seen = Some(p),
                Some(q) if q != p => return Parity::Mixed,
                _ => {}
            }
        }
        seen.unwrap_or(Parity::Even)
    }

    pub fn with_params(mut self, params: ModuleParams) -> Self {
        self.params = params;
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> VermaVector<T> {
        let mut out = VermaVector::zero(self.params.clone(), self.generators);
        for (m, c) in &self.entries {
            out.add_entry(m.clone(), c.map_scalars(f));
        }
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.params != other.params {
            return Err(Error::ParamsMismatch);
        }
        if self.generators != other.generators {
            return Err(Error::GeneratorMismatch { left: self.generators, right: other.generators });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (m, c) in &other.entries {
            out.add_entry(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&other.scale_left(&-GrassmannNumber::one(self.generators)))
    }
}

impl<S: Scalar> fmt::Display for VermaVector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c}) {m}")?;
        }
        Ok(())
    }
}

/// Acts with `e` on `v`, normal ordering into the PBW basis.
pub fn apply<S: Scalar>(e: &AlgebraElement<S>, v: &VermaVector<S>) -> Result<VermaVector<S>> {
    if e.generators() != v.generators() {
        return Err(Error::GeneratorMismatch { left: e.generators(), right: v.generators() });
    }
    let params = v.params();
    if let Some(m) = e.modes().find(|m| !params.kind.admits(*m)) {
        return Err(Error::ModeNotInAlgebra(m.to_string(), params.kind.name()));
    }
    let mut orderer = Orderer::new(params);
    let mut out = VermaVector::zero(params.clone(), v.generators());
    for (word, coeff) in e.terms() {
        let flips = word_parity(word);
        for (mono, g) in v.entries() {
            let image = orderer.act_word(word, mono);
            if image.is_empty() {
                continue;
            }
            let cg = coeff * &g.involute_pow(flips);
            for (m, r) in image {
                if m.level() > params.level_cutoff {
                    match params.overflow {
                        Overflow::Trim => continue,
                        Overflow::Error => {
                            return Err(Error::CutoffOverflow {
                                level: m.level().to_string(),
                                cutoff: params.level_cutoff.to_string(),
                            })
                        }
                    }
                }
                out.add_entry(m, cg.scale(&S::from_rational(&r)));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

/// `((Δ + 1/2) G_{-3/2} − L_{-1} G_{-1/2})|Δ⟩` over the rationals.
pub fn singular_vector_32_rational(params: &ModuleParams) -> RationalVector {
    let mut rv = RationalVector::new();
    rv_add(&mut rv, BasisMonomial(vec![Mode::g(-3)]), &params.delta + rational(1, 2));
    rv_add(&mut rv, BasisMonomial(vec![Mode::L(-1), Mode::g(-1)]), -BigRational::one());
    rv
}

pub fn singular_vector_32<S: Scalar>(params: &ModuleParams, generators: usize) -> VermaVector<S> {
    VermaVector::from_rational(params.clone(), generators, &singular_vector_32_rational(params))
}

/// `(−2 L_{-2} + (κ/2) L_{-1}²)|Δ⟩` over the rationals.
pub fn virasoro_level2_rational(kappa: &BigRational) -> RationalVector {
    let mut rv = RationalVector::new();
    rv_add(&mut rv, BasisMonomial(vec![Mode::L(-2)]), BigRational::from_integer((-2).into()));
    rv_add(&mut rv, BasisMonomial(vec![Mode::L(-1), Mode::L(-1)]), kappa / BigRational::from_integer(2.into()));
    rv
}

/// The level-2 Virasoro vector in the module with `(c_κ, Δ_κ)`.
pub fn virasoro_level2_vector<S: Scalar>(kappa: &BigRational, generators: usize) -> Result<VermaVector<S>> {
    let params = virasoro_params(kappa)?;
    Ok(VermaVector::from_rational(params, generators, &virasoro_level2_rational(kappa)))
}

/// Result of applying every raising mode up to the vector's level.
#[derive(Clone, Debug)]
pub struct SingularityCheck<S> {
    pub singular: bool,
    pub obstructions: Vec<(Mode, VermaVector<S>)>,
}

/// Raising modes of level at most `level` in the given algebra.
pub fn raising_modes(kind: AlgebraKind, level: Half) -> Vec<Mode> {
    (1..=level.0)
        .filter_map(|k| {
            if k % 2 == 0 {
                Some(Mode::L(k / 2))
            } else if kind == AlgebraKind::NeveuSchwarz {
                Some(Mode::G(Half(k)))
            } else {
                None
            }
        })
        .collect()
}

pub fn is_singular<S: Scalar>(v: &VermaVector<S>) -> Result<SingularityCheck<S>> {
    if v.is_zero() {
        return Ok(SingularityCheck { singular: true, obstructions: Vec::new() });
    }
    let level = v.level().ok_or(Error::NotHomogeneous)?;
    let one = GrassmannNumber::one(v.generators());
    let mut obstructions = Vec::new();
    for m in raising_modes(v.params().kind, level) {
        let image = apply(&AlgebraElement::mode(m, one.clone()), v)?;
        if !image.is_zero() {
            obstructions.push((m, image));
        }
    }
    Ok(SingularityCheck { singular: obstructions.is_empty(), obstructions })
}

/// Convenience for Virasoro level-2 vectors.
pub fn is_singular_level2<S: Scalar>(v: &VermaVector<S>) -> Result<SingularityCheck<S>> {
    if v.params().kind != AlgebraKind::Virasoro {
        return Err(Error::Invalid("expected a Virasoro module vector".into()));
    }
    is_singular(v)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Obstruction {
    pub mode: String,
    pub vector: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SingularityReport {
    pub condition: String,
    pub c: String,
    pub delta: String,
    pub lhs: String,
    pub rhs: String,
    pub singular: bool,
    pub obstructions: Vec<Obstruction>,
}

/// JSON-ready report pairing the closed-form NS condition with the check.
pub fn singularity_report<S: Scalar>(params: &ModuleParams, check: &SingularityCheck<S>) -> SingularityReport {
    let (lhs, rhs) = ns_condition_sides(&params.c, &params.delta);
    SingularityReport {
        condition: "12Δ=(2Δ+1)(3Δ+c)".into(),
        c: params.c.to_string(),
        delta: params.delta.to_string(),
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        singular: check.singular,
        obstructions: check
            .obstructions
            .iter()
            .map(|(m, v)| Obstruction { mode: m.to_string(), vector: v.to_string() })
            .collect(),
    }
}

// ---------------------------------------------------------------------------

/// Projector onto a coordinate complement of the submodule generated by a
/// vector, truncated at a level cutoff.
#[derive(Clone, Debug)]
pub struct QuotientProjection {
    params: ModuleParams,
    cutoff: Half,
    basis: Vec<BasisMonomial>,
    index: HashMap<BasisMonomial, usize>,
    // Reduced row echelon form of the descendant span: (pivot column, row).
    rows: Vec<(usize, Vec<BigRational>)>,
}

impl QuotientProjection {
    /// Requires `generator` to be singular in the module described by `params`.
    pub fn new(params: &ModuleParams, generator: &RationalVector, cutoff: Half) -> Result<Self> {
        let v: VermaVector<crate::scalar::GaussianRational> =
            VermaVector::from_rational(params.clone().with_cutoff(cutoff.max(params.level_cutoff)), 0, generator);
        if !is_singular(&v)?.singular {
            return Err(Error::NotSingular);
        }
        Ok(Self::unchecked(params, generator, cutoff))
    }

    /// The level-3/2 NS quotient; errors unless `(c, Δ)` satisfies the singularity condition.
    pub fn ns_level_32(params: &ModuleParams, cutoff: Half) -> Result<Self> {
        if params.kind != AlgebraKind::NeveuSchwarz {
            return Err(Error::Invalid("expected Neveu-Schwarz parameters".into()));
        }
        if !ns_condition_residual(&params.c, &params.delta).is_zero() {
            return Err(Error::NotSingular);
        }
        Ok(Self::unchecked(params, &singular_vector_32_rational(params), cutoff))
    }

    /// Builds the projector without checking singularity; used for detuned studies.
    pub fn unchecked(params: &ModuleParams, generator: &RationalVector, cutoff: Half) -> Self {
        let full = basis(params.kind, cutoff);
        let index: HashMap<_, _> = full.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let gen_level = generator.keys().map(|m| m.level()).max().unwrap_or(Half(0));
        let mut orderer = Orderer::new(params);
        let mut matrix: Vec<Vec<BigRational>> = Vec::new();
        if gen_level <= cutoff && !generator.is_empty() {
            for word in basis(params.kind, Half(cutoff.0 - gen_level.0)) {
                let mut row = vec![BigRational::zero(); full.len()];
                for (mono, c) in generator {
                    for (m, r) in orderer.act_word(&word.0, mono) {
                        if let Some(&j) = index.get(&m) {
                            row[j] += r * c;
                        }
                    }
                }
                matrix.push(row);
            }
        }
        let rows = rref(matrix);
        Self { params: params.clone(), cutoff, basis: full, index, rows }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn cutoff(&self) -> Half {
        self.cutoff
    }

    pub fn basis(&self) -> &[BasisMonomial] {
        &self.basis
    }

    pub fn params(&self) -> &ModuleParams {
        &self.params
    }

    /// Dense projector `P` with `P[i][j]` the coefficient of basis `i` in `P e_j`.
    pub fn matrix(&self) -> Vec<Vec<BigRational>> {
        let n = self.basis.len();
        let mut p = vec![vec![BigRational::zero(); n]; n];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = BigRational::one();
        }
        for (pivot, row) in &self.rows {
            for (i, r) in row.iter().enumerate() {
                if !r.is_zero() {
                    p[i][*pivot] -= r;
                }
            }
        }
        p
    }

    /// Projects `v` componentwise on its Grassmann coefficients. Terms above
    /// the cutoff are passed through unchanged.
    pub fn apply<S: Scalar>(&self, v: &VermaVector<S>) -> VermaVector<S> {
        let mut out = v.clone();
        for (pivot, row) in &self.rows {
            let g = v.coeff(&self.basis[*pivot]);
            if g.is_zero() {
                continue;
            }
            for (j, r) in row.iter().enumerate() {
                if !r.is_zero() {
                    out.add_entry(self.basis[j].clone(), g.scale(&-S::from_rational(r)));
                }
            }
        }
        out
    }

    pub fn index_of(&self, mono: &BasisMonomial) -> Option<usize> {
        self.index.get(mono).copied()
    }
}

fn rref(mut m: Vec<Vec<BigRational>>) -> Vec<(usize, Vec<BigRational>)> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    pivots.into_iter().zip(m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::GaussianRational as Q;

    type V = VermaVector<Q>;
    type E = AlgebraElement<Q>;

    fn r(n: i64, d: i64) -> BigRational {
        rational(n, d)
    }

    fn one() -> GrassmannNumber<Q> {
        GrassmannNumber::one(0)
    }

    fn mono(modes: &[Mode]) -> BasisMonomial {
        BasisMonomial::new(modes.to_vec()).unwrap()
    }

    #[test]
    fn bracket_examples() {
        let c = r(7, 3);
        let b = bracket_modes(Mode::g(1), Mode::g(-1), &c);
        assert_eq!(b.modes.get(&Mode::L(0)), Some(&r(2, 1)));
        assert!(b.central.is_zero());

        let b = bracket_modes(Mode::L(2), Mode::L(-2), &c);
        assert_eq!(b.modes.get(&Mode::L(0)), Some(&r(4, 1)));
        assert_eq!(b.central, &c / r(2, 1));

        let b = bracket_modes(Mode::L(-1), Mode::g(1), &c);
        assert_eq!(b.modes.get(&Mode::g(-1)), Some(&r(-1, 1)));
        assert_eq!(b.modes.len(), 1);

        let e: E = bracket(Mode::L(2), Mode::L(-2), &c, 0);
        assert_eq!(e.terms().count(), 2);
    }

    #[test]
    fn axioms_hold() {
        for c in [r(0, 1), r(3, 2), r(-7, 5)] {
            assert_eq!(check_algebra_axioms(&c, 7).err(), None);
        }
    }

    #[test]
    fn apply_examples() {
        let params = ModuleParams::ns(r(1, 3), r(5, 7));
        let hw = V::highest_weight(params.clone(), 0);
        let gg = E::word(vec![Mode::g(-1), Mode::g(-1)], one());
        let expect = V::from_rational(params.clone(), 0, &[(mono(&[Mode::L(-1)]), r(1, 1))].into_iter().collect());
        assert_eq!(apply(&gg, &hw).unwrap(), expect);

        let l1lm1 = E::word(vec![Mode::L(1), Mode::L(-1)], one());
        let expect = V::from_rational(params.clone(), 0, &[(BasisMonomial::vacuum(), r(10, 7))].into_iter().collect());
        assert_eq!(apply(&l1lm1, &hw).unwrap(), expect);

        let w = E::word(vec![Mode::g(1), Mode::g(-3)], one());
        let expect = V::from_rational(params, 0, &[(mono(&[Mode::L(-1)]), r(2, 1))].into_iter().collect());
        assert_eq!(apply(&w, &hw).unwrap(), expect);
    }

    #[test]
    fn basis_counts() {
        let counts: Vec<usize> = (0..=7)
            .map(|k| basis(AlgebraKind::NeveuSchwarz, Half(k)).iter().filter(|m| m.level() == Half(k)).count())
            .collect();
        assert_eq!(counts, vec![1, 1, 1, 2, 3, 4, 5, 7]);
        let vir: Vec<usize> = (0..=4)
            .map(|n| basis(AlgebraKind::Virasoro, Half(2 * n)).iter().filter(|m| m.level() == Half(2 * n)).count())
            .collect();
        assert_eq!(vir, vec![1, 1, 2, 3, 5]);
    }

    #[test]
    fn chi_examples() {
        let p = ModuleParams::ns(r(3, 2), r(1, 2));
        let chi = singular_vector_32_rational(&p);
        assert_eq!(chi[&mono(&[Mode::g(-3)])], r(1, 1));
        assert_eq!(chi[&mono(&[Mode::L(-1), Mode::g(-1)])], r(-1, 1));
        let p0 = ModuleParams::ns(r(0, 1), r(0, 1));
        assert_eq!(singular_vector_32_rational(&p0)[&mono(&[Mode::g(-3)])], r(1, 2));
    }

    #[test]
    fn g_half_kills_chi_for_any_params() {
        for (c, d) in [(r(1, 1), r(2, 1)), (r(-3, 5), r(7, 4)), (r(0, 1), r(0, 1))] {
            let p = ModuleParams::ns(c, d);
            let chi = singular_vector_32::<Q>(&p, 0);
            let out = apply(&E::mode(Mode::g(1), one()), &chi).unwrap();
            assert!(out.is_zero());
        }
    }

    #[test]
    fn singularity_examples() {
        let check = |c: BigRational, d: BigRational| {
            let p = ModuleParams::ns(c, d);
            is_singular(&singular_vector_32::<Q>(&p, 0)).unwrap().singular
        };
        assert!(check(r(3, 2), r(1, 2)));
        assert!(check(r(0, 1), r(0, 1)));
        assert!(!check(r(1, 1), r(2, 1)));
    }

    #[test]
    fn virasoro_examples() {
        let v = virasoro_level2_vector::<Q>(&r(4, 1), 0).unwrap();
        assert_eq!(v.params().c, r(1, 1));
        assert_eq!(v.params().delta, r(1, 4));
        assert!(is_singular_level2(&v).unwrap().singular);

        let v = virasoro_level2_vector::<Q>(&r(6, 1), 0).unwrap();
        assert_eq!((v.params().c.clone(), v.params().delta.clone()), (r(0, 1), r(0, 1)));
        assert!(is_singular_level2(&v).unwrap().singular);

        let v = virasoro_level2_vector::<Q>(&r(2, 1), 0).unwrap();
        let detuned = v.clone().with_params(v.params().clone().with_delta(r(2, 1)));
        let check = is_singular_level2(&detuned).unwrap();
        assert!(!check.singular);
        assert!(!check.obstructions.is_empty());

        assert!(matches!(virasoro_level2_vector::<Q>(&r(0, 1), 0), Err(Error::InvalidKappa(_))));
    }

    #[test]
    fn virasoro_rejects_g_modes() {
        let v = virasoro_level2_vector::<Q>(&r(4, 1), 0).unwrap();
        let e = E::mode(Mode::g(1), one());
        assert!(matches!(apply(&e, &v), Err(Error::ModeNotInAlgebra(..))));
    }

    #[test]
    fn kappa_examples() {
        let p = params_from_kappa_ns(&r(1, 1)).unwrap();
        assert_eq!((p.c.clone(), p.delta.clone()), (r(3, 2), r(1, 2)));
        let p = params_from_kappa_ns(&r(2, 1)).unwrap();
        assert_eq!((p.c.clone(), p.delta.clone()), (r(0, 1), r(0, 1)));
        let a = params_from_kappa_ns(&r(3, 1)).unwrap();
        let b = params_from_kappa_ns(&r(1, 3)).unwrap();
        assert_eq!(a.c, b.c);
        assert_ne!(a.delta, b.delta);
        assert!(params_from_kappa_ns(&r(-1, 1)).is_err());
    }

    #[test]
    fn overflow_policy() {
        let p = ModuleParams::ns(r(0, 1), r(0, 1)).with_cutoff(Half(1));
        let hw = V::highest_weight(p.clone(), 0);
        let e = E::mode(Mode::g(-3), one());
        assert!(matches!(apply(&e, &hw), Err(Error::CutoffOverflow { .. })));
        let hw = V::highest_weight(p.with_overflow(Overflow::Trim), 0);
        assert!(apply(&e, &hw).unwrap().is_zero());
    }

    #[test]
    fn projection_examples() {
        let p = params_from_kappa_ns(&r(1, 1)).unwrap();
        let proj = QuotientProjection::ns_level_32(&p, DEFAULT_CUTOFF).unwrap();
        let chi = singular_vector_32::<Q>(&p, 0);
        assert!(proj.apply(&chi).is_zero());
        let hw = V::highest_weight(p.clone(), 0);
        assert_eq!(proj.apply(&hw), hw);
        let l1chi = apply(&E::mode(Mode::L(-1), one()), &chi).unwrap();
        assert!(proj.apply(&l1chi).is_zero());
        // free action of U(n−) on χ: one descendant per PBW word of level ≤ 2
        assert_eq!(proj.rank(), basis(AlgebraKind::NeveuSchwarz, Half(4)).len());

        let bad = ModuleParams::ns(r(1, 1), r(2, 1));
        assert!(matches!(QuotientProjection::ns_level_32(&bad, DEFAULT_CUTOFF), Err(Error::NotSingular)));
        assert!(matches!(
            QuotientProjection::new(&bad, &singular_vector_32_rational(&bad), DEFAULT_CUTOFF),
            Err(Error::NotSingular)
        ));
    }

    #[test]
    fn report_json_shape() {
        let p = ModuleParams::ns(r(1, 1), r(2, 1));
        let check = is_singular(&singular_vector_32::<Q>(&p, 0)).unwrap();
        let rep = singularity_report(&p, &check);
        assert_eq!(rep.lhs, "24");
        assert_eq!(rep.rhs, "35");
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["condition"], "12Δ=(2Δ+1)(3Δ+c)");
        assert_eq!(json["obstructions"][0]["mode"], "G_{3/2}");
    }
}
