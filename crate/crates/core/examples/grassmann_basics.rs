//! Supernumber arithmetic in a four-generator Grassmann algebra.

use supersle::{GaussianRational as Q, GrassmannNumber};

fn main() -> supersle::Result<()> {
    let n = 4;
    let p0 = GrassmannNumber::<Q>::generator(0, n)?;
    let p1 = GrassmannNumber::<Q>::generator(1, n)?;
    println!("p0 p1 = {}", &p0 * &p1);
    println!("p1 p0 = {}", &p1 * &p0);
    println!("p0 p0 = {}", &p0 * &p0);

    let x = GrassmannNumber::<Q>::parse("2 + p0p1 - 1/2*p2p3 + (0,1)*p0", n)?;
    println!("x        = {x}  ({:?})", x.parity());
    println!("body     = {}", x.body());
    println!("soul     = {}", x.soul());
    let inv = x.inverse()?;
    println!("x^-1     = {inv}");
    println!("x x^-1   = {}", &x * &inv);
    println!("d/dp0 x  = {}", x.derive(0));
    println!("x̂        = {}", x.involute());

    println!("x / 2    = {}", x.scale(&Q::ratio(1, 2)));
    println!("|x|_max  = {}", x.to_complex().max_abs());
    Ok(())
}
