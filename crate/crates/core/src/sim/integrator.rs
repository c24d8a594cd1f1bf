use nalgebra::DVector;

/// One classical fourth-order Runge–Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<F, E>(x: &DVector<f64>, t: f64, dt: f64, mut f: F) -> Result<DVector<f64>, E>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
{
    let half = 0.5 * dt;
    let k1 = f(t, x)?;
    let k2 = f(t + half, &(x + &k1 * half))?;
    let k3 = f(t + half, &(x + &k2 * half))?;
    let k4 = f(t + dt, &(x + &k3 * dt))?;
    Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}
