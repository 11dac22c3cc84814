//! Numerical side: Brownian paths, explicit Euler–Maruyama for graded SDEs,
//! the closed-form solutions of the level-3/2 walks, Monte-Carlo martingale
//! estimates, and hull sampling for Loewner and supertrace evolutions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grassmann::{monomial_name, GrassmannNumber};
use crate::ns_algebra::{apply, AlgebraElement, BasisMonomial, Half, ModuleParams, Overflow, VermaVector};
use crate::scalar::{rational_to_f64, Scalar};
use crate::superfield::{LaurentPoly, LaurentSuperfunction, SuperPoint};
use crate::walk::{default_projection, drift_element, series_element, SdeSystem, WalkSpec};

pub type CGrassmann = GrassmannNumber<Complex64>;

/// Points closer than this to the pole at `z' = 0` halt the integrator.
pub const DEFAULT_SWALLOW_EPS: f64 = 1e-9;

/// Relative tolerance used when checking that `steps · dt` reproduces `T`.
const GRID_TOL: f64 = 1e-9;

/// Number of grid steps for horizon `t` at step `dt`; errors if they do not divide.
pub fn steps_for(t: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Invalid(format!("need dt > 0 and T >= 0, got dt={dt}, T={t}")));
    }
    let steps = (t / dt).round();
    if (steps * dt - t).abs() > GRID_TOL * t.max(dt) {
        return Err(Error::Invalid(format!("T={t} is not a multiple of dt={dt}")));
    }
    Ok(steps as usize)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    pub dim: usize,
    pub dt: f64,
    pub steps: usize,
    /// `increments[i][k]` is `B⁽ⁱ⁾_{(k+1)dt} − B⁽ⁱ⁾_{k dt}`.
    pub increments: Vec<Vec<f64>>,
    pub seed: u64,
    pub stream: u64,
}

impl BrownianPath {
    pub fn sample(dim: usize, dt: f64, steps: usize, seed: u64) -> Self {
        Self::sample_stream(dim, dt, steps, seed, 0)
    }

    /// Independent path number `stream` derived from a master seed.
    pub fn sample_stream(dim: usize, dt: f64, steps: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let sd = dt.sqrt();
        let mut increments = vec![Vec::with_capacity(steps); dim];
        for _ in 0..steps {
            for inc in increments.iter_mut() {
                let x: f64 = rng.sample(StandardNormal);
                inc.push(sd * x);
            }
        }
        Self { dim, dt, steps, increments, seed, stream }
    }

    pub fn zero(dim: usize, dt: f64, steps: usize) -> Self {
        Self { dim, dt, steps, increments: vec![vec![0.0; steps]; dim], seed: 0, stream: 0 }
    }

    /// Same path on a grid `k` times coarser.
    pub fn coarsen(&self, k: usize) -> Result<Self> {
        if k == 0 || self.steps % k != 0 {
            return Err(Error::Invalid(format!("cannot coarsen {} steps by {k}", self.steps)));
        }
        let increments = self.increments.iter().map(|inc| inc.chunks(k).map(|c| c.iter().sum()).collect()).collect();
        Ok(Self { dim: self.dim, dt: self.dt * k as f64, steps: self.steps / k, increments, seed: self.seed, stream: self.stream })
    }

    /// Leading segment of `steps` steps.
    pub fn prefix(&self, steps: usize) -> Self {
        let steps = steps.min(self.steps);
        Self {
            dim: self.dim,
            dt: self.dt,
            steps,
            increments: self.increments.iter().map(|v| v[..steps].to_vec()).collect(),
            seed: self.seed,
            stream: self.stream,
        }
    }

    /// `B⁽ⁱ⁾` at the grid times, starting from 0.
    pub fn values(&self, i: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut acc = 0.0;
        out.push(acc);
        for d in &self.increments[i] {
            acc += d;
            out.push(acc);
        }
        out
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| k as f64 * self.dt).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperPath {
    pub times: Vec<f64>,
    pub z: Vec<CGrassmann>,
    pub theta: Vec<CGrassmann>,
    pub driving: BrownianPath,
}

impl SuperPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> (&CGrassmann, &CGrassmann) {
        (self.z.last().expect("non-empty path"), self.theta.last().expect("non-empty path"))
    }
}

// ---------------------------------------------------------------------------

/// Powers `z^k` for `k` in `[lo, hi]`, shared across all coefficient functions.
struct PowerTable {
    lo: i32,
    powers: Vec<CGrassmann>,
}

impl PowerTable {
    fn new(z: &CGrassmann, lo: i32, hi: i32) -> Result<Self> {
        let n = z.generators();
        let lo = lo.min(0);
        let hi = hi.max(0);
        let mut powers = vec![GrassmannNumber::zero(n); (hi - lo + 1) as usize];
        powers[(-lo) as usize] = GrassmannNumber::one(n);
        for k in 1..=hi {
            powers[(k - lo) as usize] = &powers[(k - 1 - lo) as usize] * z;
        }
        if lo < 0 {
            let zinv = z.inverse()?;
            for k in 1..=(-lo) {
                powers[(-k - lo) as usize] = &powers[(-k + 1 - lo) as usize] * &zinv;
            }
        }
        Ok(Self { lo, powers })
    }

    fn poly(&self, p: &LaurentPoly<Complex64>) -> CGrassmann {
        let mut out = GrassmannNumber::zero(self.powers[0].generators());
        for (e, c) in p.coeffs() {
            out = &out + &(c * &self.powers[(e - self.lo) as usize]);
        }
        out
    }

    fn eval(&self, f: &LaurentSuperfunction<Complex64>, theta: &CGrassmann) -> CGrassmann {
        let a = self.poly(&f.a);
        if f.b.is_zero() {
            return a;
        }
        &a + &(theta * &self.poly(&f.b))
    }
}

fn exponent_range(system: &SdeSystem<Complex64>) -> (i32, i32) {
    let mut lo = 0;
    let mut hi = 0;
    let mut visit = |f: &LaurentSuperfunction<Complex64>| {
        for p in [&f.a, &f.b] {
            if let (Some(a), Some(b)) = (p.coeffs().keys().next(), p.coeffs().keys().next_back()) {
                lo = lo.min(*a);
                hi = hi.max(*b);
            }
        }
    };
    visit(&system.drift.0);
    visit(&system.drift.1);
    for (z, t) in &system.diffusion {
        visit(z);
        visit(t);
    }
    (lo, hi)
}

/// Integration that stopped early keeps the computed prefix.
#[derive(Clone, Debug)]
pub struct PartialPath {
    pub path: SuperPath,
    pub stopped: Option<Error>,
}

/// Explicit Euler–Maruyama; errors with `SwallowedPoint` near the pole.
pub fn euler_maruyama(system: &SdeSystem<Complex64>, init: &SuperPoint<Complex64>, path: &BrownianPath) -> Result<SuperPath> {
    let out = euler_maruyama_partial(system, init, path, DEFAULT_SWALLOW_EPS)?;
    match out.stopped {
        Some(e) => Err(e),
        None => Ok(out.path),
    }
}

pub fn euler_maruyama_partial(
    system: &SdeSystem<Complex64>,
    init: &SuperPoint<Complex64>,
    path: &BrownianPath,
    swallow_eps: f64,
) -> Result<PartialPath> {
    if system.brownian_dim() != path.dim {
        return Err(Error::Invalid(format!(
            "system has {} Brownian directions, path has {}",
            system.brownian_dim(),
            path.dim
        )));
    }
    if system.generators() != init.generators() {
        return Err(Error::GeneratorMismatch { left: system.generators(), right: init.generators() });
    }
    let (lo, hi) = exponent_range(system);
    let mut z = init.z.clone();
    let mut theta = init.theta.clone();
    let mut times = vec![0.0];
    let mut zs = vec![z.clone()];
    let mut thetas = vec![theta.clone()];
    let dt = Complex64::new(path.dt, 0.0);
    let mut stopped = None;
    for k in 0..path.steps {
        if lo < 0 && z.body().norm() < swallow_eps {
            stopped = Some(Error::SwallowedPoint { step: k, time: k as f64 * path.dt });
            break;
        }
        let table = PowerTable::new(&z, lo, hi)?;
        let mut dz = table.eval(&system.drift.0, &theta).scale(&dt);
        let mut dtheta = table.eval(&system.drift.1, &theta).scale(&dt);
        for (i, (zi, ti)) in system.diffusion.iter().enumerate() {
            let db = Complex64::new(path.increments[i][k], 0.0);
            dz = &dz + &table.eval(zi, &theta).scale(&db);
            dtheta = &dtheta + &table.eval(ti, &theta).scale(&db);
        }
        z = &z + &dz;
        theta = &theta + &dtheta;
        times.push((k + 1) as f64 * path.dt);
        zs.push(z.clone());
        thetas.push(theta.clone());
    }
    Ok(PartialPath { path: SuperPath { times, z: zs, theta: thetas, driving: path.clone() }, stopped })
}

// ---------------------------------------------------------------------------

/// `z'_t = z + (θyη/z)t − (y + θη)√κ B_t`, `θ'_t = θ + (yη/z)t − η√κ B_t`.
pub fn closed_form_32_at<S: Scalar>(
    init: &SuperPoint<S>,
    sqrt_kappa: &S,
    y: &GrassmannNumber<S>,
    eta: &GrassmannNumber<S>,
    t: &S,
    b: &S,
) -> Result<(GrassmannNumber<S>, GrassmannNumber<S>)> {
    let zinv = init.z.inverse()?;
    let ye_z = &(y * eta) * &zinv;
    let sb = sqrt_kappa.clone() * b.clone();
    let theta_eta = &init.theta * eta;
    let z = &(&init.z + &(&init.theta * &ye_z).scale(t)) - &(y + &theta_eta).scale(&sb);
    let theta = &(&init.theta + &ye_z.scale(t)) - &eta.scale(&sb);
    Ok((z, theta))
}

/// `μ_t w_t − θz − yηt` and the body of `w_t`, from a point of the solution.
pub fn conservation_32<S: Scalar>(
    init: &SuperPoint<S>,
    current: (&GrassmannNumber<S>, &GrassmannNumber<S>),
    sqrt_kappa: &S,
    y: &GrassmannNumber<S>,
    eta: &GrassmannNumber<S>,
    t: &S,
    b: &S,
) -> (GrassmannNumber<S>, S) {
    let (zp, tp) = current;
    let sb = sqrt_kappa.clone() * b.clone();
    let w = zp + &(y + &(tp * eta)).scale(&sb);
    let mu = tp + &eta.scale(&sb);
    let residual = &(&(&mu * &w) - &(&init.theta * &init.z)) - &(y * eta).scale(t);
    let body = w.body();
    (residual, body)
}

pub fn closed_form_32(
    init: &SuperPoint<Complex64>,
    path: &BrownianPath,
    kappa: f64,
    y: &CGrassmann,
    eta: &CGrassmann,
) -> Result<SuperPath> {
    let sk = Complex64::new(kappa.sqrt(), 0.0);
    let b = path.values(0);
    let times = path.times();
    let mut zs = Vec::with_capacity(times.len());
    let mut thetas = Vec::with_capacity(times.len());
    for (t, bt) in times.iter().zip(&b) {
        let (z, th) = closed_form_32_at(init, &sk, y, eta, &Complex64::new(*t, 0.0), &Complex64::new(*bt, 0.0))?;
        zs.push(z);
        thetas.push(th);
    }
    Ok(SuperPath { times, z: zs, theta: thetas, driving: path.clone() })
}

/// `z'_t = z − √κB⁺_t + θη(I_t − √κB⁽¹⁾_t)`, `θ'_t = θ + η(I_t − √κB⁽¹⁾_t)` with
/// `I_t = ∫₀ᵗ ds/(z − √κB⁺_s)` as a left Riemann sum on the path grid.
pub fn closed_form_32alt(init: &SuperPoint<Complex64>, path: &BrownianPath, kappa: f64, eta: &CGrassmann) -> Result<SuperPath> {
    closed_form_32alt_eps(init, path, kappa, eta, DEFAULT_SWALLOW_EPS)
}

pub fn closed_form_32alt_eps(
    init: &SuperPoint<Complex64>,
    path: &BrownianPath,
    kappa: f64,
    eta: &CGrassmann,
    eps: f64,
) -> Result<SuperPath> {
    if path.dim != 2 {
        return Err(Error::Invalid("the two-direction walk needs a 2-dimensional Brownian path".into()));
    }
    let sk = kappa.sqrt();
    let b1 = path.values(0);
    let b2 = path.values(1);
    let times = path.times();
    let theta_eta = &init.theta * eta;
    let mut integral = GrassmannNumber::zero(init.generators());
    let mut zs = Vec::with_capacity(times.len());
    let mut thetas = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let bplus = Complex64::new(sk * b1[k], sk * b2[k]);
        let j = &integral - &GrassmannNumber::scalar(init.generators(), Complex64::new(sk * b1[k], 0.0));
        let shift = GrassmannNumber::scalar(init.generators(), bplus);
        zs.push(&(&init.z - &shift) + &(&theta_eta * &j));
        thetas.push(&init.theta + &(eta * &j));
        if k + 1 < times.len() {
            let denom = &init.z - &shift;
            if denom.body().norm() < eps {
                return Err(Error::DenominatorVanishes { step: k, time: times[k] });
            }
            integral = &integral + &denom.inverse()?.scale(&Complex64::new(path.dt, 0.0));
        }
    }
    Ok(SuperPath { times, z: zs, theta: thetas, driving: path.clone() })
}

/// The level-3/2 closed form as a map `(z, θ) ↦ (z'_t, θ'_t)` for frozen `t`, `B`.
pub fn closed_form_32_map<S: Scalar>(
    generators: usize,
    sqrt_kappa: &S,
    y: &GrassmannNumber<S>,
    eta: &GrassmannNumber<S>,
    t: &S,
    b: &S,
) -> (LaurentSuperfunction<S>, LaurentSuperfunction<S>) {
    let sb = sqrt_kappa.clone() * b.clone();
    let ye = y * eta;
    let zp = &(&(&LaurentSuperfunction::z(generators) + &LaurentSuperfunction::theta_z_power(-1, ye.scale(t)))
        - &LaurentSuperfunction::constant(y.scale(&sb)))
        - &LaurentSuperfunction::theta_z_power(0, eta.scale(&sb));
    let tp = &(&LaurentSuperfunction::theta(generators) + &LaurentSuperfunction::z_power(-1, ye.scale(t)))
        - &LaurentSuperfunction::constant(eta.scale(&sb));
    (zp, tp)
}

/// The two-direction closed form as a map, with `J(z) = I_t(z) − √κB⁽¹⁾_t`
/// supplied as a Laurent polynomial.
pub fn closed_form_32alt_map<S: Scalar>(
    generators: usize,
    shift: &S,
    eta: &GrassmannNumber<S>,
    j: &LaurentPoly<S>,
) -> (LaurentSuperfunction<S>, LaurentSuperfunction<S>) {
    let one = GrassmannNumber::one(generators);
    let ej = LaurentSuperfunction::from_a(j.scale_left(eta));
    let zp = &(&LaurentSuperfunction::z(generators) - &LaurentSuperfunction::constant(one.scale(shift))) + &ej.theta_times();
    let tp = &LaurentSuperfunction::theta(generators) + &ej;
    (zp, tp)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ConvergenceStudy {
    pub dts: Vec<f64>,
    pub mean_errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log dt`; `None` when every
    /// error is at roundoff level.
    pub order: Option<f64>,
    pub paths: usize,
    pub seed: u64,
    pub horizon: f64,
    /// Reference grid is this many times finer than the smallest `dt`.
    pub refinement: usize,
}

/// Errors at or below this are treated as exact agreement.
pub const ROUNDOFF: f64 = 1e-12;

impl ConvergenceStudy {
    pub fn strictly_decreasing(&self) -> bool {
        self.mean_errors.windows(2).all(|w| w[1] < w[0])
    }

    pub fn exact(&self) -> bool {
        self.mean_errors.iter().all(|e| *e <= ROUNDOFF)
    }
}

/// Largest coefficient difference over all grades of both components.
pub fn grade_error(a: (&CGrassmann, &CGrassmann), b: (&CGrassmann, &CGrassmann)) -> f64 {
    (a.0 - b.0).max_abs().max((a.1 - b.1).max_abs())
}

/// Compares Euler–Maruyama on nested coarsenings of one fine path against a
/// closed form evaluated on the fine path. Paths are independent streams of
/// `seed` and processed in parallel.
#[allow(clippy::too_many_arguments)]
pub fn pathwise_convergence<C>(
    system: &SdeSystem<Complex64>,
    closed_form: C,
    init: &SuperPoint<Complex64>,
    horizon: f64,
    dt_list: &[f64],
    n_paths: usize,
    seed: u64,
    refinement: usize,
) -> Result<ConvergenceStudy>
where
    C: Fn(&SuperPoint<Complex64>, &BrownianPath) -> Result<(CGrassmann, CGrassmann)> + Sync,
{
    if dt_list.is_empty() || n_paths == 0 || refinement == 0 {
        return Err(Error::Invalid("need at least one dt, one path and refinement >= 1".into()));
    }
    if dt_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid("dt list must be strictly decreasing".into()));
    }
    let fine_dt = dt_list[dt_list.len() - 1] / refinement as f64;
    let fine_steps = steps_for(horizon, fine_dt)?;
    let factors = dt_list
        .iter()
        .map(|dt| {
            let k = (dt / fine_dt).round();
            if ((k * fine_dt) - dt).abs() > GRID_TOL * dt {
                Err(Error::Invalid(format!("dt={dt} is not a multiple of the reference step")))
            } else {
                Ok(k as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let per_path: Vec<Result<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let fine = BrownianPath::sample_stream(system.brownian_dim(), fine_dt, fine_steps, seed, p as u64);
            let reference = closed_form(init, &fine)?;
            factors
                .iter()
                .map(|&k| {
                    let coarse = fine.coarsen(k)?;
                    let em = euler_maruyama(system, init, &coarse)?;
                    Ok(grade_error(em.terminal(), (&reference.0, &reference.1)))
                })
                .collect()
        })
        .collect();
    let mut sums = vec![0.0; dt_list.len()];
    for errs in per_path {
        for (s, e) in sums.iter_mut().zip(errs?) {
            *s += e;
        }
    }
    let mean_errors: Vec<f64> = sums.iter().map(|s| s / n_paths as f64).collect();
    let order = if mean_errors.iter().all(|e| *e <= ROUNDOFF) {
        None
    } else {
        log_slope(dt_list, &mean_errors)
    };
    Ok(ConvergenceStudy { dts: dt_list.to_vec(), mean_errors, order, paths: n_paths, seed, horizon, refinement })
}

fn log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

// ---------------------------------------------------------------------------

/// Sparse operator on the space of (basis monomial, Grassmann mask) coefficients.
struct SparseOperator {
    columns: Vec<Vec<(u32, Complex64)>>,
}

impl SparseOperator {
    fn build<S: Scalar>(e: &AlgebraElement<S>, params: &ModuleParams, basis: &[BasisMonomial], generators: usize) -> Result<Self> {
        let masks = 1usize << generators;
        let index: std::collections::HashMap<&BasisMonomial, usize> = basis.iter().enumerate().map(|(i, b)| (b, i)).collect();
        let mut columns = Vec::with_capacity(basis.len() * masks);
        for b in basis {
            for m in 0..masks {
                let mut v = VermaVector::zero(params.clone(), generators);
                v.add_entry(b.clone(), GrassmannNumber::monomial(generators, m as u16, S::one())?);
                let image = apply(e, &v)?;
                let mut col = Vec::new();
                for (mono, g) in image.entries() {
                    let row = index[mono];
                    for (mask, c) in g.terms() {
                        col.push(((row * masks + *mask as usize) as u32, c.to_complex()));
                    }
                }
                columns.push(col);
            }
        }
        Ok(Self { columns })
    }

    fn apply_into(&self, x: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        for (j, xj) in x.iter().enumerate() {
            if *xj == Complex64::new(0.0, 0.0) {
                continue;
            }
            let s = xj * scale;
            for (i, c) in &self.columns[j] {
                out[*i as usize] += c * s;
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CoefficientDrift {
    pub basis: String,
    pub grade: String,
    pub mean_re: f64,
    pub mean_im: f64,
    pub drift_re: f64,
    pub drift_im: f64,
    pub se: f64,
    /// `|drift| / se`, zero when both vanish.
    pub z_score: f64,
}

impl CoefficientDrift {
    pub fn drift_abs(&self) -> f64 {
        self.drift_re.hypot(self.drift_im)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MartingaleReport {
    pub c: String,
    pub delta: String,
    pub cutoff: String,
    pub paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub coefficients: Vec<CoefficientDrift>,
}

/// Absolute slack added to SE comparisons so identically-zero coefficients pass.
pub const DRIFT_FLOOR: f64 = 1e-12;

impl MartingaleReport {
    /// Every projected drift within `k` standard errors of zero.
    pub fn within(&self, k: f64) -> bool {
        self.coefficients.iter().all(|c| c.drift_abs() <= k * c.se + DRIFT_FLOOR)
    }

    /// Some projected drift beyond `k` standard errors.
    pub fn exceeds(&self, k: f64) -> bool {
        self.coefficients.iter().any(|c| c.drift_abs() > k * c.se + DRIFT_FLOOR)
    }

    pub fn max_z(&self) -> f64 {
        self.coefficients.iter().map(|c| c.z_score).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloConfig {
    pub paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub cutoff: Half,
}

const CHUNK: usize = 64;

/// Estimates `∂_t E[P G_t|Δ⟩]` with `G_{k+1} = G_k (1 + (α₀ + ½Σβ²)dt + ΣβΔB)`.
///
/// Each path's vector `G_T|Δ⟩` is built by applying the step factors right to
/// left, then projected to the quotient. Sums are formed per fixed chunk and
/// reduced in chunk order, so results do not depend on the thread count.
pub fn mc_martingale<S: Scalar>(spec: &WalkSpec<S>, params: &ModuleParams, cfg: &MonteCarloConfig) -> Result<MartingaleReport> {
    if cfg.paths == 0 {
        return Err(Error::Invalid("need at least one path".into()));
    }
    let steps = steps_for(cfg.horizon, cfg.dt)?;
    for m in spec.modes() {
        if m.level() > cfg.cutoff {
            return Err(Error::CutoffOverflow { level: m.level().to_string(), cutoff: cfg.cutoff.to_string() });
        }
    }
    let params = params.clone().with_cutoff(cfg.cutoff).with_overflow(Overflow::Trim);
    let proj = default_projection(&params, cfg.cutoff)?;
    let basis = proj.basis().to_vec();
    let n = spec.generators();
    let masks = 1usize << n;
    let dim = basis.len() * masks;
    let drift_op = SparseOperator::build(&drift_element(spec), &params, &basis, n)?;
    let beta_ops = spec
        .beta()
        .iter()
        .map(|b| SparseOperator::build(&series_element(b, n), &params, &basis, n))
        .collect::<Result<Vec<_>>>()?;
    let pmat: Vec<Vec<f64>> = proj.matrix().iter().map(|row| row.iter().map(rational_to_f64).collect()).collect();
    let project = |v: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (i, row) in pmat.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                for m in 0..masks {
                    out[i * masks + m] += v[j * masks + m] * p;
                }
            }
        }
        out
    };
    let mut v0 = vec![Complex64::new(0.0, 0.0); dim];
    v0[0] = Complex64::new(1.0, 0.0);
    let pv0 = project(&v0);
    let bdim = spec.brownian_dim();

    let run_path = |p: usize| -> Vec<Complex64> {
        let path = BrownianPath::sample_stream(bdim, cfg.dt, steps, cfg.seed, p as u64);
        let mut v = v0.clone();
        let mut next = vec![Complex64::new(0.0, 0.0); dim];
        for k in (0..steps).rev() {
            next.copy_from_slice(&v);
            drift_op.apply_into(&v, Complex64::new(cfg.dt, 0.0), &mut next);
            for (i, op) in beta_ops.iter().enumerate() {
                op.apply_into(&v, Complex64::new(path.increments[i][k], 0.0), &mut next);
            }
            std::mem::swap(&mut v, &mut next);
        }
        project(&v)
    };

    let chunks: Vec<(Vec<Complex64>, Vec<f64>, Vec<f64>)> = (0..cfg.paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![Complex64::new(0.0, 0.0); dim];
            let mut sq_re = vec![0.0; dim];
            let mut sq_im = vec![0.0; dim];
            for p in (c * CHUNK)..((c + 1) * CHUNK).min(cfg.paths) {
                let v = run_path(p);
                for i in 0..dim {
                    sum[i] += v[i];
                    sq_re[i] += v[i].re * v[i].re;
                    sq_im[i] += v[i].im * v[i].im;
                }
            }
            (sum, sq_re, sq_im)
        })
        .collect();
    let mut sum = vec![Complex64::new(0.0, 0.0); dim];
    let mut sq_re = vec![0.0; dim];
    let mut sq_im = vec![0.0; dim];
    for (s, r, i) in chunks {
        for k in 0..dim {
            sum[k] += s[k];
            sq_re[k] += r[k];
            sq_im[k] += i[k];
        }
    }

    let np = cfg.paths as f64;
    let mut coefficients = Vec::new();
    for (bi, b) in basis.iter().enumerate() {
        for m in 0..masks {
            let k = bi * masks + m;
            let mean = sum[k] / np;
            let var = if cfg.paths > 1 {
                ((sq_re[k] - np * mean.re * mean.re) + (sq_im[k] - np * mean.im * mean.im)).max(0.0) / (np - 1.0)
            } else {
                0.0
            };
            let (drift, se) = if cfg.horizon > 0.0 {
                ((mean - pv0[k]) / cfg.horizon, (var / np).sqrt() / cfg.horizon)
            } else {
                (Complex64::new(0.0, 0.0), 0.0)
            };
            if mean.norm() == 0.0 && se == 0.0 && drift.norm() == 0.0 {
                continue;
            }
            let z_score = if se > 0.0 { drift.norm() / se } else if drift.norm() > DRIFT_FLOOR { f64::INFINITY } else { 0.0 };
            coefficients.push(CoefficientDrift {
                basis: b.to_string(),
                grade: monomial_name(m as u16),
                mean_re: mean.re,
                mean_im: mean.im,
                drift_re: drift.re,
                drift_im: drift.im,
                se,
                z_score,
            });
        }
    }
    Ok(MartingaleReport {
        c: params.c.to_string(),
        delta: params.delta.to_string(),
        cutoff: cfg.cutoff.to_string(),
        paths: cfg.paths,
        horizon: cfg.horizon,
        dt: cfg.dt,
        seed: cfg.seed,
        coefficients,
    })
}

// ---------------------------------------------------------------------------

/// Rectangular cell grid; cell `(i, j)` has centre `x_min + (i + ½)dx`, `y_min + (j + ½)dy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::Invalid("grid needs positive extent and resolution".into()));
        }
        Ok(Self { x_min, x_max, y_min, y_max, nx, ny })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x_min + (i as f64 + 0.5) * self.dx(), self.y_min + (j as f64 + 0.5) * self.dy())
    }

    pub fn cell_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let fx = (z.re - self.x_min) / self.dx();
        let fy = (z.im - self.y_min) / self.dy();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Square grid of `n × n` cells around the points with a relative margin.
    pub fn enclosing(points: &[Complex64], n: usize, margin: f64) -> Result<Self> {
        let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for p in points {
            x0 = x0.min(p.re);
            x1 = x1.max(p.re);
            y0 = y0.min(p.im);
            y1 = y1.max(p.im);
        }
        let half = ((x1 - x0).max(y1 - y0) / 2.0 * (1.0 + margin)).max(1.0);
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        Self::new(cx - half, cx + half, cy - half, cy + half, n, n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HullRaster {
    pub grid: GridSpec,
    /// Row-major, `occupied[j * nx + i]`, row 0 at `y_min`.
    pub occupied: Vec<bool>,
    pub horizon: f64,
}

impl HullRaster {
    pub fn empty(grid: GridSpec, horizon: f64) -> Self {
        Self { grid, occupied: vec![false; grid.nx * grid.ny], horizon }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.occupied[j * self.grid.nx + i]
    }

    fn set(&mut self, i: usize, j: usize) {
        self.occupied[j * self.grid.nx + i] = true;
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|b| **b).count()
    }

    pub fn contains_point(&self, z: Complex64) -> bool {
        self.grid.cell_of(z).is_some_and(|(i, j)| self.get(i, j))
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.grid == other.grid && self.occupied.iter().zip(&other.occupied).all(|(a, b)| !a || *b)
    }

    /// Binary PGM (P2, ASCII) with hull cells white; the top row is `y_max`.
    pub fn to_pgm(&self, header: &str) -> String {
        let mut s = format!("P2\n# {}\n{} {}\n1\n", header.replace('\n', " "), self.grid.nx, self.grid.ny);
        for j in (0..self.grid.ny).rev() {
            let row: Vec<&str> = (0..self.grid.nx).map(|i| if self.get(i, j) { "1" } else { "0" }).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Rows of 0/1, top row `y_max`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for j in (0..self.grid.ny).rev() {
            let row: Vec<&str> = (0..self.grid.nx).map(|i| if self.get(i, j) { "1" } else { "0" }).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Marks the polyline and every cell not reachable from the border.
    pub fn fill_polyline(grid: GridSpec, points: &[Complex64], horizon: f64) -> Self {
        let mut r = Self::empty(grid, horizon);
        let step = grid.dx().min(grid.dy()) / 4.0;
        let mark = |z: Complex64, r: &mut Self| {
            if let Some((i, j)) = grid.cell_of(z) {
                r.set(i, j);
            }
        };
        if let Some(first) = points.first() {
            mark(*first, &mut r);
        }
        for w in points.windows(2) {
            let d = w[1] - w[0];
            let n = (d.norm() / step).ceil().max(1.0) as usize;
            for k in 1..=n {
                mark(w[0] + d * (k as f64 / n as f64), &mut r);
            }
        }
        // flood the unbounded component from the border (4-connectivity)
        let (nx, ny) = (grid.nx, grid.ny);
        let mut outside = vec![false; nx * ny];
        let mut stack = Vec::new();
        for i in 0..nx {
            stack.push((i, 0));
            stack.push((i, ny - 1));
        }
        for j in 0..ny {
            stack.push((0, j));
            stack.push((nx - 1, j));
        }
        while let Some((i, j)) = stack.pop() {
            let k = j * nx + i;
            if outside[k] || r.occupied[k] {
                continue;
            }
            outside[k] = true;
            if i > 0 {
                stack.push((i - 1, j));
            }
            if i + 1 < nx {
                stack.push((i + 1, j));
            }
            if j > 0 {
                stack.push((i, j - 1));
            }
            if j + 1 < ny {
                stack.push((i, j + 1));
            }
        }
        for k in 0..nx * ny {
            r.occupied[k] = !outside[k];
        }
        r
    }
}

#[derive(Clone, Debug)]
pub struct SupertraceHull {
    pub times: Vec<f64>,
    /// `Γ(t) = √κ B⁺_t` at the grid times.
    pub trace: Vec<Complex64>,
    pub raster: HullRaster,
}

/// Samples the supertrace on `[0, T]` and rasterises its hull. With no grid
/// given, the grid encloses the whole trace with a 10% margin.
pub fn supertrace_hull(kappa: f64, horizon: f64, dt: f64, seed: u64, resolution: usize, grid: Option<GridSpec>) -> Result<SupertraceHull> {
    if kappa < 0.0 {
        return Err(Error::Invalid("κ must be non-negative".into()));
    }
    if resolution == 0 {
        return Err(Error::Invalid("grid resolution must be positive".into()));
    }
    let steps = steps_for(horizon, dt)?;
    let path = BrownianPath::sample(2, dt, steps, seed);
    let sk = kappa.sqrt();
    let trace: Vec<Complex64> =
        path.values(0).iter().zip(path.values(1)).map(|(a, b)| Complex64::new(sk * a, sk * b)).collect();
    let grid = match grid {
        Some(g) => g,
        None => GridSpec::enclosing(&trace, resolution, 0.1)?,
    };
    let raster = HullRaster::fill_polyline(grid, &trace, horizon);
    Ok(SupertraceHull { times: path.times(), trace, raster })
}

impl SupertraceHull {
    /// Hull of the leading part of the trace up to time `t`, on the same grid.
    pub fn hull_at(&self, t: f64) -> HullRaster {
        let k = self.times.partition_point(|s| *s <= t + 1e-12);
        HullRaster::fill_polyline(self.raster.grid, &self.trace[..k.max(1)], t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoewnerPoint {
    pub z_re: f64,
    pub z_im: f64,
    pub swallowed_at: Option<f64>,
    pub g_re: f64,
    pub g_im: f64,
}

#[derive(Clone, Debug)]
pub struct LoewnerFlow {
    pub points: Vec<LoewnerPoint>,
    pub raster: HullRaster,
    pub driving: Vec<f64>,
}

/// Explicit Euler for `∂_t g = 2/(g − √κB_t)` at every cell centre. A point
/// is swallowed when `|g − √κB| < 10⁻³√dt` or when a step leaves the upper
/// half plane.
pub fn loewner_flow(kappa: f64, grid: &GridSpec, horizon: f64, dt: f64, seed: u64) -> Result<LoewnerFlow> {
    if kappa < 0.0 {
        return Err(Error::Invalid("κ must be non-negative".into()));
    }
    if grid.y_min < 0.0 {
        return Err(Error::Invalid("Loewner grid must lie in the upper half plane".into()));
    }
    let steps = steps_for(horizon, dt)?;
    let path = BrownianPath::sample(1, dt, steps, seed);
    let sk = kappa.sqrt();
    let drive: Vec<f64> = path.values(0).iter().map(|b| sk * b).collect();
    let eps = 1e-3 * dt.sqrt();
    let cells: Vec<(usize, usize)> = (0..grid.ny).flat_map(|j| (0..grid.nx).map(move |i| (i, j))).collect();
    let points: Vec<LoewnerPoint> = cells
        .par_iter()
        .map(|&(i, j)| {
            let z = grid.center(i, j);
            let mut g = z;
            let mut swallowed_at = None;
            for (k, u) in drive.iter().take(steps).enumerate() {
                let f = g - u;
                if f.norm() < eps {
                    swallowed_at = Some(k as f64 * dt);
                    break;
                }
                g += 2.0 * dt / f;
                if g.im <= 0.0 {
                    swallowed_at = Some((k + 1) as f64 * dt);
                    break;
                }
            }
            LoewnerPoint { z_re: z.re, z_im: z.im, swallowed_at, g_re: g.re, g_im: g.im }
        })
        .collect();
    let mut raster = HullRaster::empty(*grid, horizon);
    for (p, &(i, j)) in points.iter().zip(&cells) {
        if p.swallowed_at.is_some() {
            raster.set(i, j);
        }
    }
    Ok(LoewnerFlow { points, raster, driving: drive })
}
