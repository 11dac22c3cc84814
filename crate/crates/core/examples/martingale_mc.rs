//! Monte-Carlo drift of G_t|Δ⟩ in the quotient module, matched and detuned.

use supersle::ns_algebra::{params_from_kappa_ns, Half};
use supersle::scalar::rational;
use supersle::sde::{mc_martingale, MonteCarloConfig};
use supersle::walk::{allocation_32, WalkSpec};
use supersle::Surd;

fn main() -> supersle::Result<()> {
    let k = rational(2, 1);
    let (y, eta, _) = allocation_32::<Surd>();
    let spec = WalkSpec::spec_32(&k, &y, &eta)?;
    let params = params_from_kappa_ns(&k)?;
    let cfg = MonteCarloConfig { paths: 2000, horizon: 0.25, dt: 1e-3, seed: 1, cutoff: Half(7) };

    for (label, p) in [("matched", params.clone()), ("Δ + 1/2", params.clone().with_delta(&params.delta + rational(1, 2)))] {
        let report = mc_martingale(&spec, &p, &cfg)?;
        println!("{label}: max |drift|/SE = {:.2}", report.max_z());
        for c in &report.coefficients {
            println!("  {:<18} {:<8} drift {:+.4} ± {:.4}", c.basis, c.grade, c.drift_re, c.se);
        }
    }
    Ok(())
}
