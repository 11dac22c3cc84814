//! Random walks `G⁻¹dG = (α₀ + ½Σβᵢ²)dt + Σβᵢ dBᵢ` on the Virasoro supergroup
//! with `α₀`, `βᵢ` linear in the generators, and their translation into
//! stochastic differential equations for the superspace coordinate `(z', θ')`.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::grassmann::{GrassmannNumber, Parity};
use crate::ns_algebra::{
    apply, singular_vector_32, singular_vector_32_rational, virasoro_level2_rational, AlgebraElement, AlgebraKind,
    Half, Mode, ModuleParams, QuotientProjection, VermaVector,
};
use crate::scalar::{rational, Scalar};
use crate::superfield::{LaurentSuperfunction, SuperPoint};

/// The pair `(y_n, η_n)` multiplying `L_n` and `G_{n+1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkCoefficient<S> {
    pub y: GrassmannNumber<S>,
    pub eta: GrassmannNumber<S>,
}

impl<S: Scalar> WalkCoefficient<S> {
    pub fn new(y: GrassmannNumber<S>, eta: GrassmannNumber<S>) -> Self {
        Self { y, eta }
    }

    pub fn even(y: GrassmannNumber<S>) -> Self {
        let n = y.generators();
        Self { y, eta: GrassmannNumber::zero(n) }
    }

    pub fn odd(eta: GrassmannNumber<S>) -> Self {
        let n = eta.generators();
        Self { y: GrassmannNumber::zero(n), eta }
    }
}

/// Finitely supported series `Σ (y_n L_n + η_n G_{n+1/2})`.
pub type GeneratorSeries<S> = BTreeMap<i32, WalkCoefficient<S>>;

#[derive(Clone, Debug, PartialEq)]
pub struct WalkSpec<S> {
    generators: usize,
    alpha0: GeneratorSeries<S>,
    beta: Vec<GeneratorSeries<S>>,
}

fn sqrt_of<S: Scalar>(kappa: &BigRational) -> Result<S> {
    if kappa <= &BigRational::zero() {
        return Err(Error::InvalidKappa(kappa.to_string()));
    }
    S::sqrt_rational(kappa).ok_or_else(|| Error::NoSquareRoot(kappa.to_string()))
}

impl<S: Scalar> WalkSpec<S> {
    pub fn new(generators: usize, alpha0: GeneratorSeries<S>, beta: Vec<GeneratorSeries<S>>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::Invalid("at least one Brownian direction is required".into()));
        }
        for (n, c) in alpha0.iter().chain(beta.iter().flatten()) {
            for g in [&c.y, &c.eta] {
                if g.generators() != generators {
                    return Err(Error::GeneratorMismatch { left: generators, right: g.generators() });
                }
            }
            if !c.y.is_even() {
                return Err(Error::Parity(format!("y coefficient at n={n} must be even, got {}", c.y)));
            }
            if !c.eta.is_odd() {
                return Err(Error::Parity(format!("eta coefficient at n={n} must be odd, got {}", c.eta)));
            }
        }
        Ok(Self { generators, alpha0, beta })
    }

    /// `α₀ = −yη G_{-3/2}`, `β = √κ (y L_{-1} + η G_{-1/2})` with `y² = 0`.
    pub fn spec_32(kappa: &BigRational, y: &GrassmannNumber<S>, eta: &GrassmannNumber<S>) -> Result<Self> {
        if !(y * y).is_zero() {
            return Err(Error::Invalid("the one-direction walk needs y² = 0; use the two-direction walk".into()));
        }
        Self::one_direction(kappa, y, eta)
    }

    /// The one-direction walk without the `y² = 0` check.
    pub fn one_direction(kappa: &BigRational, y: &GrassmannNumber<S>, eta: &GrassmannNumber<S>) -> Result<Self> {
        let n = y.generators();
        let sk = sqrt_of::<S>(kappa)?;
        let alpha0 = BTreeMap::from([(-2, WalkCoefficient::odd(-(y * eta)))]);
        let beta = vec![BTreeMap::from([(-1, WalkCoefficient::new(y.scale(&sk), eta.scale(&sk)))])];
        Self::new(n, alpha0, beta)
    }

    /// [`WalkSpec::one_direction`] plus a second direction `β₂ = i√κ y L_{-1}`;
    /// `y` is unrestricted.
    pub fn spec_32alt(kappa: &BigRational, y: &GrassmannNumber<S>, eta: &GrassmannNumber<S>) -> Result<Self> {
        let mut spec = Self::one_direction(kappa, y, eta)?;
        let sk = sqrt_of::<S>(kappa)?;
        let iy = y.scale(&(S::imag_unit() * sk));
        spec.beta.push(BTreeMap::from([(-1, WalkCoefficient::even(iy))]));
        Self::new(spec.generators, spec.alpha0, spec.beta)
    }

    /// Ordinary chordal SLE: `α₀ = −2L_{-2}`, `β = √κ L_{-1}`.
    pub fn virasoro(kappa: &BigRational, generators: usize) -> Result<Self> {
        let sk = sqrt_of::<S>(kappa)?;
        let alpha0 = BTreeMap::from([(-2, WalkCoefficient::even(GrassmannNumber::scalar(generators, S::from_i64(-2))))]);
        let beta = vec![BTreeMap::from([(-1, WalkCoefficient::even(GrassmannNumber::scalar(generators, sk)))])];
        Self::new(generators, alpha0, beta)
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn brownian_dim(&self) -> usize {
        self.beta.len()
    }

    pub fn alpha0(&self) -> &GeneratorSeries<S> {
        &self.alpha0
    }

    pub fn beta(&self) -> &[GeneratorSeries<S>] {
        &self.beta
    }

    /// All modes with a nonzero coefficient.
    pub fn modes(&self) -> Vec<Mode> {
        let mut out = Vec::new();
        for series in std::iter::once(&self.alpha0).chain(&self.beta) {
            for (n, c) in series {
                if !c.y.is_zero() {
                    out.push(Mode::L(*n));
                }
                if !c.eta.is_zero() {
                    out.push(Mode::G(Half(2 * n + 1)));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> WalkSpec<T> {
        let map = |s: &GeneratorSeries<S>| -> GeneratorSeries<T> {
            s.iter().map(|(n, c)| (*n, WalkCoefficient::new(c.y.map_scalars(f), c.eta.map_scalars(f)))).collect()
        };
        WalkSpec { generators: self.generators, alpha0: map(&self.alpha0), beta: self.beta.iter().map(map).collect() }
    }

    pub fn to_json(&self) -> Value {
        let series = |s: &GeneratorSeries<S>| -> Value {
            Value::Object(
                s.iter()
                    .map(|(n, c)| {
                        let mut m = Map::new();
                        if !c.y.is_zero() {
                            m.insert("y".into(), Value::String(c.y.to_string()));
                        }
                        if !c.eta.is_zero() {
                            m.insert("eta".into(), Value::String(c.eta.to_string()));
                        }
                        (n.to_string(), Value::Object(m))
                    })
                    .collect(),
            )
        };
        serde_json::json!({
            "b": self.beta.len(),
            "generators": self.generators,
            "alpha0": series(&self.alpha0),
            "beta": self.beta.iter().map(series).collect::<Vec<_>>(),
        })
    }

    /// Parses `{"b", "alpha0", "beta", "generators"?, "init"?}`. Coefficients
    /// are Grassmann strings such as `"1/2*p0p1 + (0,1)*p2"`.
    pub fn from_json(value: &Value) -> Result<(Self, Option<SuperPoint<S>>)> {
        let obj = value.as_object().ok_or_else(|| Error::Parse("walk spec must be a JSON object".into()))?;
        let generators = match obj.get("generators") {
            Some(v) => v.as_u64().ok_or_else(|| Error::Parse("`generators` must be an integer".into()))? as usize,
            None => 4,
        };
        let parse_series = |v: &Value| -> Result<GeneratorSeries<S>> {
            let m = v.as_object().ok_or_else(|| Error::Parse("series must map n to {y, eta}".into()))?;
            let mut out = BTreeMap::new();
            for (k, entry) in m {
                let n: i32 = k.trim().parse().map_err(|_| Error::Parse(format!("invalid mode index `{k}`")))?;
                let field = |name: &str| -> Result<GrassmannNumber<S>> {
                    match entry.get(name) {
                        None => Ok(GrassmannNumber::zero(generators)),
                        Some(Value::String(s)) => GrassmannNumber::parse(s, generators),
                        Some(_) => Err(Error::Parse(format!("`{name}` at n={k} must be a string"))),
                    }
                };
                out.insert(n, WalkCoefficient::new(field("y")?, field("eta")?));
            }
            Ok(out)
        };
        let alpha0 = match obj.get("alpha0") {
            Some(v) => parse_series(v)?,
            None => BTreeMap::new(),
        };
        let beta = obj
            .get("beta")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("`beta` must be an array".into()))?
            .iter()
            .map(parse_series)
            .collect::<Result<Vec<_>>>()?;
        if let Some(b) = obj.get("b") {
            let b = b.as_u64().ok_or_else(|| Error::Parse("`b` must be an integer".into()))?;
            if b as usize != beta.len() {
                return Err(Error::Parse(format!("`b` = {b} but {} beta series given", beta.len())));
            }
        }
        let spec = Self::new(generators, alpha0, beta)?;
        let init = match obj.get("init") {
            None => None,
            Some(v) => {
                let get = |name: &str, default: &str| -> Result<GrassmannNumber<S>> {
                    match v.get(name) {
                        None => GrassmannNumber::parse(default, generators),
                        Some(Value::String(s)) => GrassmannNumber::parse(s, generators),
                        Some(_) => Err(Error::Parse(format!("init.{name} must be a string"))),
                    }
                };
                Some(SuperPoint::new(get("z", "1")?, get("theta", "0")?)?)
            }
        };
        Ok((spec, init))
    }
}

/// Generator allocation for the level-3/2 walk: `y = ψ₀ψ₁`, `η = ψ₂`, `θ = ψ₃`.
pub fn allocation_32<S: Scalar>() -> (GrassmannNumber<S>, GrassmannNumber<S>, GrassmannNumber<S>) {
    let p = |i| GrassmannNumber::<S>::generator(i, 4).expect("four generators");
    (&p(0) * &p(1), p(2), p(3))
}

/// Generator allocation for the two-direction walk: `y = 1`, `η = ψ₀`, `θ = ψ₁`.
pub fn allocation_32alt<S: Scalar>() -> (GrassmannNumber<S>, GrassmannNumber<S>, GrassmannNumber<S>) {
    let p = |i| GrassmannNumber::<S>::generator(i, 2).expect("two generators");
    (GrassmannNumber::one(2), p(0), p(1))
}

// ---------------------------------------------------------------------------

/// Coefficient functions of `dz' = z₀'dt + Σzᵢ'dBᵢ`, `dθ' = θ₀'dt + Σθᵢ'dBᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdeSystem<S> {
    pub diffusion: Vec<(LaurentSuperfunction<S>, LaurentSuperfunction<S>)>,
    pub drift: (LaurentSuperfunction<S>, LaurentSuperfunction<S>),
}

impl<S: Scalar> SdeSystem<S> {
    pub fn from_spec(spec: &WalkSpec<S>) -> Self {
        Self { diffusion: diffusion_from_spec(spec), drift: drift_from_spec(spec) }
    }

    pub fn generators(&self) -> usize {
        self.drift.0.generators()
    }

    pub fn brownian_dim(&self) -> usize {
        self.diffusion.len()
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> SdeSystem<T> {
        SdeSystem {
            diffusion: self.diffusion.iter().map(|(z, t)| (z.map_scalars(f), t.map_scalars(f))).collect(),
            drift: (self.drift.0.map_scalars(f), self.drift.1.map_scalars(f)),
        }
    }

    pub fn to_complex(&self) -> SdeSystem<num_complex::Complex64> {
        self.map_scalars(|c| c.to_complex())
    }
}

/// `z' = −Σ(y_n + θ'η_n) z'^{n+1}`, `θ' = −Σ(½(n+1)θ'y_n + z'η_n) z'^n`.
fn series_to_functions<S: Scalar>(
    series: &GeneratorSeries<S>,
    generators: usize,
) -> (LaurentSuperfunction<S>, LaurentSuperfunction<S>) {
    let mut zf = LaurentSuperfunction::zero(generators);
    let mut tf = LaurentSuperfunction::zero(generators);
    for (&n, c) in series {
        let half = S::from_rational(&rational(n as i64 + 1, 2));
        zf = &zf - &LaurentSuperfunction::z_power(n + 1, c.y.clone());
        zf = &zf - &LaurentSuperfunction::theta_z_power(n + 1, c.eta.clone());
        tf = &tf - &LaurentSuperfunction::theta_z_power(n, c.y.scale(&half));
        tf = &tf - &LaurentSuperfunction::z_power(n + 1, c.eta.clone());
    }
    (zf, tf)
}

pub fn diffusion_from_spec<S: Scalar>(spec: &WalkSpec<S>) -> Vec<(LaurentSuperfunction<S>, LaurentSuperfunction<S>)> {
    spec.beta.iter().map(|s| series_to_functions(s, spec.generators)).collect()
}

/// Drift including the Itô correction `½Σ(zᵢ'∂_{z'} + θᵢ'∂_{θ'})` acting on `zᵢ'`, `θᵢ'`.
pub fn drift_from_spec<S: Scalar>(spec: &WalkSpec<S>) -> (LaurentSuperfunction<S>, LaurentSuperfunction<S>) {
    let (mut z0, mut t0) = series_to_functions(&spec.alpha0, spec.generators);
    let half = S::from_rational(&rational(1, 2));
    for (zi, ti) in diffusion_from_spec(spec) {
        let corr = |f: &LaurentSuperfunction<S>| &(&zi * &f.d_z()) + &(&ti * &f.d_theta());
        z0 = &z0 + &corr(&zi).scale(&half);
        t0 = &t0 + &corr(&ti).scale(&half);
    }
    (z0, t0)
}

// ---------------------------------------------------------------------------

/// `Σ (y_n L_n + η_n G_{n+1/2})` as an algebra element.
pub fn series_element<S: Scalar>(series: &GeneratorSeries<S>, generators: usize) -> AlgebraElement<S> {
    let mut out = AlgebraElement::zero(generators);
    for (&n, c) in series {
        out = &out + &AlgebraElement::mode(Mode::L(n), c.y.clone());
        out = &out + &AlgebraElement::mode(Mode::G(Half(2 * n + 1)), c.eta.clone());
    }
    out
}

/// `α₀ + ½Σβᵢ²`.
pub fn drift_element<S: Scalar>(spec: &WalkSpec<S>) -> AlgebraElement<S> {
    let n = spec.generators;
    let half = AlgebraElement::scalar(GrassmannNumber::scalar(n, S::from_rational(&rational(1, 2))));
    let mut out = series_element(&spec.alpha0, n);
    for b in &spec.beta {
        let bi = series_element(b, n);
        out = &out + &(&half * &(&bi * &bi));
    }
    out
}

/// `(α₀ + ½Σβᵢ²)|Δ⟩` normal ordered.
pub fn drift_vector<S: Scalar>(spec: &WalkSpec<S>, params: &ModuleParams) -> Result<VermaVector<S>> {
    let hw = VermaVector::highest_weight(params.clone(), spec.generators);
    apply(&drift_element(spec), &hw)
}

#[derive(Clone, Debug)]
pub struct MatchReport<S> {
    /// `λ` with `drift = λ·χ` when the residual vanishes.
    pub proportionality: GrassmannNumber<S>,
    pub residual: VermaVector<S>,
    pub drift: VermaVector<S>,
    pub params: ModuleParams,
}

impl<S: Scalar> MatchReport<S> {
    pub fn matched(&self) -> bool {
        self.residual.is_zero()
    }
}

/// Matches the drift vector against the level-3/2 vector at `(c_κ, Δ_κ)`.
pub fn match_singular<S: Scalar>(spec: &WalkSpec<S>, kappa: &BigRational) -> Result<MatchReport<S>> {
    match_singular_with(spec, &crate::ns_algebra::params_from_kappa_ns(kappa)?)
}

pub fn match_singular_with<S: Scalar>(spec: &WalkSpec<S>, params: &ModuleParams) -> Result<MatchReport<S>> {
    let n = spec.generators;
    let drift = drift_vector(spec, params)?;
    let chi = singular_vector_32::<S>(params, n);
    let (mono, c) = chi.entries().iter().next().ok_or(Error::NotSingular)?;
    let lambda = &drift.coeff(mono) * &c.inverse()?;
    let residual = drift.checked_sub(&chi.scale_left(&lambda))?;
    Ok(MatchReport { proportionality: lambda, residual, drift, params: params.clone() })
}

/// Default quotient for `params`: the level-3/2 vector in the NS case, the
/// level-2 vector with `κ = 6/(2Δ+1)` in the Virasoro case. Singularity is
/// not checked so detuned parameters still yield a projector.
pub fn default_projection(params: &ModuleParams, cutoff: Half) -> Result<QuotientProjection> {
    let chi = match params.kind {
        AlgebraKind::NeveuSchwarz => singular_vector_32_rational(params),
        AlgebraKind::Virasoro => {
            let denom = &params.delta * BigRational::from_integer(2.into()) + BigRational::one();
            if denom.is_zero() {
                return Err(Error::Invalid("no level-2 vector for Δ = −1/2".into()));
            }
            virasoro_level2_rational(&(BigRational::from_integer(6.into()) / denom))
        }
    };
    Ok(QuotientProjection::unchecked(params, &chi, cutoff))
}

/// Drift vector projected to the quotient module; zero iff `G_t|Δ⟩` is a
/// martingale there.
pub fn martingale_drift<S: Scalar>(spec: &WalkSpec<S>, params: &ModuleParams, cutoff: Half) -> Result<VermaVector<S>> {
    let params = params.clone().with_cutoff(cutoff);
    let proj = default_projection(&params, cutoff)?;
    Ok(proj.apply(&drift_vector(spec, &params)?))
}

// ---------------------------------------------------------------------------

/// `[L_n, Φ]` for a primary superfield of weight `Δ`.
pub fn l_action<S: Scalar>(n: i32, delta: &S, phi: &LaurentSuperfunction<S>) -> LaurentSuperfunction<S> {
    let g = phi.generators();
    let one = GrassmannNumber::one(g);
    let zn1 = LaurentSuperfunction::z_power(n + 1, one.clone());
    let half = S::from_rational(&rational(n as i64 + 1, 2));
    let zn = LaurentSuperfunction::z_power(n, one);
    let t1 = &zn1 * &phi.d_z();
    let t2 = (&zn * &phi.d_theta().theta_times()).scale(&half);
    let t3 = (&zn * phi).scale(&(delta.clone() * S::from_i64(n as i64 + 1)));
    &(&t1 + &t2) + &t3
}

/// `[G_{n+1/2}, Φ]` for a primary superfield of weight `Δ`.
pub fn g_action<S: Scalar>(n: i32, delta: &S, phi: &LaurentSuperfunction<S>) -> LaurentSuperfunction<S> {
    let g = phi.generators();
    let one = GrassmannNumber::one(g);
    let zn1 = LaurentSuperfunction::z_power(n + 1, one.clone());
    let d = &phi.d_theta() - &phi.d_z().theta_times();
    let t1 = &zn1 * &d;
    let t2 = (&LaurentSuperfunction::theta_z_power(n, one) * phi).scale(&(delta.clone() * S::from_i64(2 * (n as i64 + 1))));
    &t1 - &t2
}

/// `[β, Φ]` through the primary-field commutators; coefficients act from the left.
pub fn primary_commutator<S: Scalar>(
    series: &GeneratorSeries<S>,
    delta: &S,
    phi: &LaurentSuperfunction<S>,
) -> LaurentSuperfunction<S> {
    let mut out = LaurentSuperfunction::zero(phi.generators());
    for (&n, c) in series {
        if !c.y.is_zero() {
            out = &out + &l_action(n, delta, phi).scale_left(&c.y);
        }
        if !c.eta.is_zero() {
            out = &out + &g_action(n, delta, phi).scale_left(&c.eta);
        }
    }
    out
}

/// `−(zᵢ'∂_{z'} + θᵢ'∂_{θ'} + 2Δ D'θᵢ') Φ`.
pub fn coefficient_commutator<S: Scalar>(
    zi: &LaurentSuperfunction<S>,
    ti: &LaurentSuperfunction<S>,
    delta: &S,
    phi: &LaurentSuperfunction<S>,
) -> LaurentSuperfunction<S> {
    let a = &(zi * &phi.d_z()) + &(ti * &phi.d_theta());
    let b = (&ti.superderivative() * phi).scale(&(delta.clone() * S::from_i64(2)));
    -&(&a + &b)
}

// ---------------------------------------------------------------------------

/// Itô differential `X_dt dt + Σ Xᵢ dBᵢ` with algebra-valued coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ItoDifferential<S> {
    pub dt: AlgebraElement<S>,
    pub db: Vec<AlgebraElement<S>>,
}

impl<S: Scalar> ItoDifferential<S> {
    /// `G⁻¹dG = (α₀ + ½Σβᵢ²)dt + Σβᵢ dBᵢ`.
    pub fn group(spec: &WalkSpec<S>) -> Self {
        let n = spec.generators;
        Self { dt: drift_element(spec), db: spec.beta.iter().map(|b| series_element(b, n)).collect() }
    }

    /// `d(G⁻¹)G = (−α + Σβᵢ²)dt − Σβᵢ dBᵢ`.
    pub fn inverse(spec: &WalkSpec<S>) -> Self {
        let g = Self::group(spec);
        let mut dt = -&g.dt;
        for b in &g.db {
            dt = &dt + &(b * b);
        }
        Self { dt, db: g.db.iter().map(|b| -b).collect() }
    }

    /// `X + Y + XY` under `dt² = dt dB = 0`, `dBᵢdBⱼ = δᵢⱼ dt`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut dt = &self.dt + &other.dt;
        for (x, y) in self.db.iter().zip(&other.db) {
            dt = &dt + &(x * y);
        }
        let db = self.db.iter().zip(&other.db).map(|(x, y)| x + y).collect();
        Self { dt, db }
    }

    pub fn is_zero(&self) -> bool {
        self.dt.is_zero() && self.db.iter().all(AlgebraElement::is_zero)
    }
}

/// Checks `d(G⁻¹G) = 0` to first order.
pub fn inverse_consistency<S: Scalar>(spec: &WalkSpec<S>) -> bool {
    ItoDifferential::inverse(spec).compose(&ItoDifferential::group(spec)).is_zero()
}

/// Overall parity of the drift vector.
pub fn drift_parity<S: Scalar>(spec: &WalkSpec<S>, params: &ModuleParams) -> Result<Parity> {
    Ok(drift_vector(spec, params)?.parity())
}
