//! From a walk (α₀, β) to superspace SDE coefficients and its drift vector.

use supersle::ns_algebra::{params_from_kappa_ns, DEFAULT_CUTOFF};
use supersle::scalar::rational;
use supersle::walk::{
    allocation_32alt, diffusion_from_spec, drift_from_spec, martingale_drift, match_singular, WalkSpec,
};
use supersle::Surd;

fn main() -> supersle::Result<()> {
    let k = rational(3, 1);
    let (y, eta, _) = allocation_32alt::<Surd>();
    let spec = WalkSpec::spec_32alt(&k, &y, &eta)?;
    println!("{}", serde_json::to_string_pretty(&spec.to_json()).unwrap());

    let (z0, t0) = drift_from_spec(&spec);
    println!("dz' drift: {z0}");
    println!("dθ' drift: {t0}");
    for (i, (zi, ti)) in diffusion_from_spec(&spec).iter().enumerate() {
        println!("dB{}: z {zi}, θ {ti}", i + 1);
    }

    let report = match_singular(&spec, &k)?;
    println!("drift vector = {}", report.drift);
    println!("proportional to χ: {} (factor {})", report.matched(), report.proportionality);
    let params = params_from_kappa_ns(&k)?;
    println!("projected drift in the quotient: {}", martingale_drift(&spec, &params, DEFAULT_CUTOFF)?);
    Ok(())
}
