//! Fixed-step classical Runge-Kutta.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// One fourth-order step of `ẋ = f(t, x)`. Any non-finite stage derivative
/// or result aborts with the offending stage and component.
pub fn rk4_step<F>(t: f64, x: &DVector<f64>, dt: f64, f: &F) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::contract(format!("step size must be positive, got {dt}")));
    }
    let half = 0.5 * dt;
    let k1 = checked(f(t, x)?, t, 1)?;
    let k2 = checked(f(t + half, &(x + &k1 * half))?, t, 2)?;
    let k3 = checked(f(t + half, &(x + &k2 * half))?, t, 3)?;
    let k4 = checked(f(t + dt, &(x + &k3 * dt))?, t, 4)?;
    let next = x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
    checked(next, t, 0)
}

fn checked(v: DVector<f64>, t: f64, stage: usize) -> Result<DVector<f64>> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        let what = if stage == 0 { "state after step".to_string() } else { format!("stage {stage} derivative") };
        return Err(Error::NonFinite(format!("{what} component {i} at t = {t} is {}", v[i])));
    }
    Ok(v)
}
