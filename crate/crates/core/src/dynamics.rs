//! Acceleration models for the ground and orbital environments, a fixed-step
//! RK4 integrator, and closed-form propagators used as verification oracles.
//!
//! Ground quantities are in meters, m/s and newtons. Orbital quantities are in
//! kilometers and km/s; forces stay in newtons and masses in kilograms, so a
//! force over a mass is scaled by [`KM_PER_M`] to land in km/s².

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// Converts an acceleration in m/s² to km/s².
pub const KM_PER_M: f64 = 1e-3;

/// Earth J2 zonal harmonic coefficient.
pub const EARTH_J2: f64 = 1.08263e-3;
/// Earth equatorial radius, km.
pub const EARTH_RADIUS_KM: f64 = 6378.137;
/// Earth gravitational parameter, km³/s².
pub const EARTH_MU: f64 = 398_600.4418;
/// Default target orbit radius (500 km altitude), km.
pub const DEFAULT_ORBIT_RADIUS_KM: f64 = 6878.137;

/// Inclination at which the J2-perturbed in-plane model reduces to plain CW:
/// `1 + 3cos(2φ) = 0`.
pub fn critical_inclination() -> f64 {
    0.5 * (-1.0f64 / 3.0).acos()
}

/// Circular-orbit mean motion `sqrt(μ/r³)` in rad/s.
pub fn mean_motion(mu: f64, orbit_radius: f64) -> f64 {
    (mu / (orbit_radius * orbit_radius * orbit_radius)).sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid dynamics parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

fn require(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<(), DynamicsError> {
    if cond {
        Ok(())
    } else {
        Err(DynamicsError::InvalidParam {
            name,
            reason: reason.into(),
        })
    }
}

/// In-plane position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State2D {
    pub position: Vec2,
    pub velocity: Vec2,
}

impl State2D {
    pub fn new(position: Vec2, velocity: Vec2) -> Self {
        Self { position, velocity }
    }

    pub fn at_rest(position: Vec2) -> Self {
        Self {
            position,
            velocity: Vec2::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite())
    }
}

/// Cross-track position and velocity. The environment never controls this
/// axis; it is propagated only for completeness.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateZ {
    pub z: f64,
    pub z_dot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundParams {
    pub mass: f64,
    pub damping: f64,
}

impl GroundParams {
    pub fn new(mass: f64, damping: f64) -> Result<Self, DynamicsError> {
        require(mass > 0.0 && mass.is_finite(), "mass", "must be positive")?;
        require(damping >= 0.0 && damping.is_finite(), "damping", "must be non-negative")?;
        Ok(Self { mass, damping })
    }
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            damping: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwParams {
    /// Mean motion of the target orbit, rad/s.
    pub omega_n: f64,
    pub mass: f64,
}

impl CwParams {
    pub fn new(omega_n: f64, mass: f64) -> Result<Self, DynamicsError> {
        require(omega_n > 0.0 && omega_n.is_finite(), "omega_n", "must be positive")?;
        require(mass > 0.0 && mass.is_finite(), "mass", "must be positive")?;
        Ok(Self { omega_n, mass })
    }
}

/// J2-perturbed relative-motion parameters. `c` is derived from the
/// inclination and orbit geometry through [`c_param`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct J2Params {
    pub omega_n: f64,
    pub mass: f64,
    pub c: f64,
    pub s: f64,
    pub j2: f64,
    pub earth_radius: f64,
    pub orbit_radius: f64,
    /// Radians.
    pub inclination: f64,
}

impl J2Params {
    pub fn new(
        omega_n: f64,
        mass: f64,
        inclination: f64,
        j2: f64,
        earth_radius: f64,
        orbit_radius: f64,
    ) -> Result<Self, DynamicsError> {
        CwParams::new(omega_n, mass)?;
        let (s, c) = c_param(inclination, j2, earth_radius, orbit_radius)?;
        Ok(Self {
            omega_n,
            mass,
            c,
            s,
            j2,
            earth_radius,
            orbit_radius,
            inclination,
        })
    }

    /// Builds parameters with an explicit `c`, bypassing the geometry. Used to
    /// probe the model directly (e.g. `c = 1`).
    pub fn with_c(omega_n: f64, mass: f64, c: f64) -> Result<Self, DynamicsError> {
        CwParams::new(omega_n, mass)?;
        require(c > 0.0 && c.is_finite(), "c", "must be positive and finite")?;
        Ok(Self {
            omega_n,
            mass,
            c,
            s: c * c - 1.0,
            j2: EARTH_J2,
            earth_radius: EARTH_RADIUS_KM,
            orbit_radius: DEFAULT_ORBIT_RADIUS_KM,
            inclination: f64::NAN,
        })
    }

    pub fn as_cw(&self) -> CwParams {
        CwParams {
            omega_n: self.omega_n,
            mass: self.mass,
        }
    }
}

/// Returns `(s, c)` with `s = 3 J2 Re² / (8 r²) · (1 + 3 cos 2φ)` and
/// `c = sqrt(1 + s)`.
pub fn c_param(
    inclination: f64,
    j2: f64,
    earth_radius: f64,
    orbit_radius: f64,
) -> Result<(f64, f64), DynamicsError> {
    require(earth_radius > 0.0, "earth_radius", "must be positive")?;
    require(
        orbit_radius > earth_radius,
        "orbit_radius",
        format!("must exceed the Earth radius {earth_radius} km"),
    )?;
    let s = 3.0 * j2 * earth_radius * earth_radius / (8.0 * orbit_radius * orbit_radius)
        * (1.0 + 3.0 * (2.0 * inclination).cos());
    require(
        (1.0 + s) > 0.0 && s.is_finite(),
        "j2",
        format!("1 + s must be positive (s = {s})"),
    )?;
    Ok((s, (1.0 + s).sqrt()))
}

/// Damped double integrator: `a = -(γ/m) v + (f_control + f_contact)/m`.
pub fn ground_accel(state: &State2D, control_force: Vec2, contact_force: Vec2, params: &GroundParams) -> Vec2 {
    let f = control_force + contact_force;
    let k = params.damping / params.mass;
    Vec2::new(
        -k * state.velocity.x + f.x / params.mass,
        -k * state.velocity.y + f.y / params.mass,
    )
}

/// Clohessy-Wiltshire in-plane acceleration, x radial and y in-track.
pub fn cw_accel(state: &State2D, total_force: Vec2, params: &CwParams) -> Vec2 {
    let w = params.omega_n;
    let p = state.position;
    let v = state.velocity;
    let fx = total_force.x / params.mass * KM_PER_M;
    let fy = total_force.y / params.mass * KM_PER_M;
    Vec2::new(
        3.0 * w * w * p.x + 2.0 * w * v.y + fx,
        -2.0 * w * v.x + fy,
    )
}

/// J2-perturbed in-plane acceleration. The in-track equation couples to the
/// radial *velocity*, so that `c = 1` recovers [`cw_accel`] bit for bit.
pub fn j2_accel(state: &State2D, total_force: Vec2, params: &J2Params) -> Vec2 {
    let w = params.omega_n;
    let c = params.c;
    let p = state.position;
    let v = state.velocity;
    let fx = total_force.x / params.mass * KM_PER_M;
    let fy = total_force.y / params.mass * KM_PER_M;
    Vec2::new(
        (5.0 * c * c - 2.0) * w * w * p.x + 2.0 * w * c * v.y + fx,
        -2.0 * w * c * v.x + fy,
    )
}

/// Cross-track parameters for [`z_accel`].
#[derive(Debug, Clone, Copy)]
pub enum ZModel<'a> {
    Cw(&'a CwParams),
    J2(&'a J2Params),
}

pub fn z_accel(state: &StateZ, model: ZModel<'_>) -> f64 {
    match model {
        ZModel::Cw(p) => -p.omega_n * p.omega_n * state.z,
        ZModel::J2(p) => (2.0 - 3.0 * p.c * p.c) * p.omega_n * p.omega_n * state.z,
    }
}

/// Classical RK4 for the cross-track oscillator.
pub fn rk4_step_z(state: &StateZ, model: ZModel<'_>, dt: f64) -> StateZ {
    let f = |s: &StateZ| (s.z_dot, z_accel(s, model));
    let (k1x, k1v) = f(state);
    let s2 = StateZ {
        z: state.z + 0.5 * dt * k1x,
        z_dot: state.z_dot + 0.5 * dt * k1v,
    };
    let (k2x, k2v) = f(&s2);
    let s3 = StateZ {
        z: state.z + 0.5 * dt * k2x,
        z_dot: state.z_dot + 0.5 * dt * k2v,
    };
    let (k3x, k3v) = f(&s3);
    let s4 = StateZ {
        z: state.z + dt * k3x,
        z_dot: state.z_dot + dt * k3v,
    };
    let (k4x, k4v) = f(&s4);
    StateZ {
        z: state.z + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        z_dot: state.z_dot + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    }
}

/// One of the three in-plane models with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dynamics {
    Ground(GroundParams),
    Cw(CwParams),
    CwJ2(J2Params),
}

impl Dynamics {
    /// Acceleration under a total force (control plus contact).
    pub fn accel(&self, state: &State2D, total_force: Vec2) -> Vec2 {
        match self {
            Dynamics::Ground(p) => ground_accel(state, total_force, Vec2::zeros(), p),
            Dynamics::Cw(p) => cw_accel(state, total_force, p),
            Dynamics::CwJ2(p) => j2_accel(state, total_force, p),
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Dynamics::Ground(p) => p.mass,
            Dynamics::Cw(p) => p.mass,
            Dynamics::CwJ2(p) => p.mass,
        }
    }

    /// Factor taking force/mass (m/s²) to environment acceleration units.
    pub fn accel_scale(&self) -> f64 {
        match self {
            Dynamics::Ground(_) => 1.0,
            Dynamics::Cw(_) | Dynamics::CwJ2(_) => KM_PER_M,
        }
    }

    /// Advances one step with the force held constant.
    pub fn step(&self, state: &State2D, total_force: Vec2, dt: f64) -> State2D {
        rk4_step(|s, f| self.accel(s, f), state, total_force, dt)
    }
}

/// Classical fourth-order Runge-Kutta step with zero-order-hold force.
pub fn rk4_step<F>(accel_fn: F, state: &State2D, total_force: Vec2, dt: f64) -> State2D
where
    F: Fn(&State2D, Vec2) -> Vec2,
{
    let half = 0.5 * dt;
    let k1p = state.velocity;
    let k1v = accel_fn(state, total_force);

    let s2 = State2D::new(state.position + k1p * half, state.velocity + k1v * half);
    let k2p = s2.velocity;
    let k2v = accel_fn(&s2, total_force);

    let s3 = State2D::new(state.position + k2p * half, state.velocity + k2v * half);
    let k3p = s3.velocity;
    let k3v = accel_fn(&s3, total_force);

    let s4 = State2D::new(state.position + k3p * dt, state.velocity + k3v * dt);
    let k4p = s4.velocity;
    let k4v = accel_fn(&s4, total_force);

    let sixth = dt / 6.0;
    State2D::new(
        state.position + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * sixth,
        state.velocity + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * sixth,
    )
}

/// Force-free CW state-transition solution.
pub fn cw_closed_form(initial: &State2D, omega_n: f64, t: f64) -> State2D {
    let w = omega_n;
    let (x0, y0) = (initial.position.x, initial.position.y);
    let (vx0, vy0) = (initial.velocity.x, initial.velocity.y);
    let wt = w * t;
    let (s, c) = wt.sin_cos();

    let x = (4.0 - 3.0 * c) * x0 + s / w * vx0 + 2.0 / w * (1.0 - c) * vy0;
    let y = 6.0 * (s - wt) * x0 + y0 - 2.0 / w * (1.0 - c) * vx0 + (4.0 * s - 3.0 * wt) / w * vy0;
    let vx = 3.0 * w * s * x0 + c * vx0 + 2.0 * s * vy0;
    let vy = 6.0 * w * (c - 1.0) * x0 - 2.0 * s * vx0 + (4.0 * c - 3.0) * vy0;
    State2D::new(Vec2::new(x, y), Vec2::new(vx, vy))
}

/// Exact solution of the damped double integrator under a constant force.
/// Falls back to ballistic motion when `γ = 0`.
pub fn ground_closed_form(initial: &State2D, constant_force: Vec2, params: &GroundParams, t: f64) -> State2D {
    let m = params.mass;
    let g = params.damping;
    if g == 0.0 {
        let a = constant_force / m;
        return State2D::new(
            initial.position + initial.velocity * t + a * (0.5 * t * t),
            initial.velocity + a * t,
        );
    }
    let v_inf = constant_force / g;
    let tau = m / g;
    let decay = (-t / tau).exp();
    let dv = initial.velocity - v_inf;
    State2D::new(
        initial.position + v_inf * t + dv * (tau * (1.0 - decay)),
        v_inf + dv * decay,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const W: f64 = 1e-3;

    fn cw() -> CwParams {
        CwParams::new(W, 100.0).unwrap()
    }

    #[test]
    fn ground_rest_without_force() {
        let a = ground_accel(&State2D::default(), Vec2::zeros(), Vec2::zeros(), &GroundParams::default());
        assert_eq!(a, Vec2::zeros());
    }

    #[test]
    fn ground_damping_substitution() {
        let s = State2D::new(Vec2::zeros(), Vec2::new(1.0, 0.0));
        let a = ground_accel(&s, Vec2::zeros(), Vec2::zeros(), &GroundParams::new(1.0, 0.25).unwrap());
        assert_eq!(a, Vec2::new(-0.25, 0.0));
    }

    #[test]
    fn ground_sums_control_and_contact() {
        let p = GroundParams::new(2.0, 0.0).unwrap();
        let a = ground_accel(&State2D::default(), Vec2::new(1.0, 0.0), Vec2::new(0.0, 4.0), &p);
        assert_eq!(a, Vec2::new(0.5, 2.0));
    }

    #[test]
    fn ground_terminal_velocity() {
        let p = GroundParams::new(1.0, 0.25).unwrap();
        let s = ground_closed_form(&State2D::default(), Vec2::new(1.0, 0.0), &p, 200.0);
        assert_relative_eq!(s.velocity.x, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn ground_closed_form_identity_and_decay() {
        let p = GroundParams::new(1.0, 0.25).unwrap();
        let s0 = State2D::new(Vec2::new(0.3, -0.2), Vec2::new(1.0, 0.0));
        assert_eq!(ground_closed_form(&s0, Vec2::zeros(), &p, 0.0), s0);
        let late = ground_closed_form(&s0, Vec2::zeros(), &p, 400.0);
        assert!(late.velocity.norm() < 1e-40);
        // x(∞) = x0 + v0 m/γ
        assert_relative_eq!(late.position.x, 0.3 + 4.0, max_relative = 1e-12);
    }

    #[test]
    fn ground_closed_form_zero_damping_is_ballistic() {
        let p = GroundParams::new(2.0, 0.0).unwrap();
        let s0 = State2D::new(Vec2::zeros(), Vec2::new(1.0, 0.0));
        let s = ground_closed_form(&s0, Vec2::new(0.0, 2.0), &p, 3.0);
        assert_eq!(s.position, Vec2::new(3.0, 4.5));
        assert_eq!(s.velocity, Vec2::new(1.0, 3.0));
    }

    #[test]
    fn cw_equilibrium_on_in_track_axis() {
        let s = State2D::new(Vec2::new(0.0, 0.7), Vec2::zeros());
        assert_eq!(cw_accel(&s, Vec2::zeros(), &cw()), Vec2::zeros());
    }

    #[test]
    fn cw_substitution() {
        let s = State2D::at_rest(Vec2::new(1.0, 0.0));
        let a = cw_accel(&s, Vec2::zeros(), &cw());
        assert_relative_eq!(a.x, 3e-6, max_relative = 1e-15);
        assert_eq!(a.y, 0.0);
    }

    #[test]
    fn cw_force_unit_conversion() {
        let a = cw_accel(&State2D::default(), Vec2::new(1.0, -2.0), &cw());
        assert_relative_eq!(a.x, 1e-5, max_relative = 1e-15);
        assert_relative_eq!(a.y, -2e-5, max_relative = 1e-15);
    }

    #[test]
    fn j2_with_unit_c_is_cw() {
        let p = J2Params::with_c(W, 100.0, 1.0).unwrap();
        let s = State2D::new(Vec2::new(0.3, -0.8), Vec2::new(1e-4, -3e-4));
        let f = Vec2::new(0.7, -0.1);
        assert_eq!(j2_accel(&s, f, &p), cw_accel(&s, f, &cw()));
    }

    #[test]
    fn j2_substitution() {
        let p = J2Params::with_c(W, 100.0, 1.1).unwrap();
        let a = j2_accel(&State2D::at_rest(Vec2::new(1.0, 0.0)), Vec2::zeros(), &p);
        assert_relative_eq!(a.x, 4.05e-6, max_relative = 1e-12);
        assert_eq!(a.y, 0.0);
    }

    #[test]
    fn j2_origin_is_equilibrium() {
        for c in [0.5, 1.0, 1.3] {
            let p = J2Params::with_c(W, 100.0, c).unwrap();
            assert_eq!(j2_accel(&State2D::default(), Vec2::zeros(), &p), Vec2::zeros());
        }
    }

    #[test]
    fn z_accel_models() {
        let cwp = cw();
        assert_eq!(z_accel(&StateZ::default(), ZModel::Cw(&cwp)), 0.0);
        let s = StateZ { z: 1.0, z_dot: 0.0 };
        assert_relative_eq!(z_accel(&s, ZModel::Cw(&cwp)), -1e-6, max_relative = 1e-15);
        let j = J2Params::with_c(W, 100.0, 1.0).unwrap();
        assert_eq!(z_accel(&s, ZModel::J2(&j)), z_accel(&s, ZModel::Cw(&cwp)));
    }

    #[test]
    fn z_oscillator_returns_after_period() {
        let p = cw();
        let mut s = StateZ { z: 0.5, z_dot: 0.0 };
        let n = 6000;
        let dt = 2.0 * std::f64::consts::PI / W / n as f64;
        for _ in 0..n {
            s = rk4_step_z(&s, ZModel::Cw(&p), dt);
        }
        assert_relative_eq!(s.z, 0.5, max_relative = 1e-9);
    }

    #[test]
    fn c_param_critical_inclination() {
        let (s, c) = c_param(critical_inclination(), EARTH_J2, EARTH_RADIUS_KM, DEFAULT_ORBIT_RADIUS_KM).unwrap();
        assert!(s.abs() < 1e-18);
        assert_eq!(c, 1.0);
    }

    #[test]
    fn c_param_golden_values() {
        // Independent double-precision evaluation of the c formula.
        let (s0, c0) = c_param(0.0, EARTH_J2, EARTH_RADIUS_KM, DEFAULT_ORBIT_RADIUS_KM).unwrap();
        assert_relative_eq!(s0, 0.0013964241775162533, max_relative = 1e-14);
        assert_relative_eq!(c0, 1.0006979685087385, max_relative = 1e-14);
        let (s90, c90) = c_param(
            std::f64::consts::FRAC_PI_2,
            EARTH_J2,
            EARTH_RADIUS_KM,
            DEFAULT_ORBIT_RADIUS_KM,
        )
        .unwrap();
        assert_relative_eq!(s90, -0.0006982120887581266, max_relative = 1e-12);
        assert_relative_eq!(c90, 0.9996508329968229, max_relative = 1e-14);
        assert!(c90 < 1.0);
    }

    #[test]
    fn c_param_rejects_bad_geometry() {
        assert!(c_param(0.0, EARTH_J2, 7000.0, 6000.0).is_err());
        // Huge J2 at a polar orbit drives 1 + s negative.
        assert!(c_param(std::f64::consts::FRAC_PI_2, 10.0, 6378.0, 6400.0).is_err());
    }

    #[test]
    fn params_validate() {
        assert!(GroundParams::new(0.0, 0.1).is_err());
        assert!(GroundParams::new(1.0, -0.1).is_err());
        assert!(CwParams::new(0.0, 1.0).is_err());
        assert!(CwParams::new(1e-3, -1.0).is_err());
        assert!(J2Params::with_c(1e-3, 1.0, 0.0).is_err());
    }

    #[test]
    fn default_mean_motion() {
        assert_relative_eq!(
            mean_motion(EARTH_MU, DEFAULT_ORBIT_RADIUS_KM),
            0.0011067834463349407,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rk4_exact_for_linear_motion() {
        let s = State2D::new(Vec2::zeros(), Vec2::new(1.0, 0.0));
        let out = rk4_step(|_, _| Vec2::zeros(), &s, Vec2::zeros(), 1.0);
        assert_eq!(out.position, Vec2::new(1.0, 0.0));
        assert_eq!(out.velocity, Vec2::new(1.0, 0.0));
    }

    #[test]
    fn cw_closed_form_identity_and_equilibrium() {
        let s0 = State2D::new(Vec2::new(0.2, 0.4), Vec2::new(1e-4, 2e-4));
        assert_eq!(cw_closed_form(&s0, W, 0.0), s0);
        let still = State2D::at_rest(Vec2::new(0.0, 0.9));
        for t in [10.0, 1000.0, 12345.0] {
            assert_eq!(cw_closed_form(&still, W, t).position, still.position);
        }
    }

    #[test]
    fn cw_closed_form_closed_ellipse() {
        let x0 = 1.0;
        let s0 = State2D::new(Vec2::new(x0, 0.0), Vec2::new(0.0, -2.0 * W * x0));
        let s = cw_closed_form(&s0, W, 2.0 * std::f64::consts::PI / W);
        assert_relative_eq!(s.position.x, x0, epsilon = 1e-12);
        assert!(s.position.y.abs() < 1e-12);
        assert!(s.velocity.x.abs() < 1e-15);
        assert_relative_eq!(s.velocity.y, -2.0 * W * x0, max_relative = 1e-12);
    }

    #[test]
    fn cw_closed_form_satisfies_the_ode() {
        // Central finite differences of the closed form against cw_accel.
        let p = cw();
        let s0 = State2D::new(Vec2::new(0.3, -0.2), Vec2::new(2e-4, -1e-4));
        let t = 777.0;
        let h = 1e-2;
        let a = (cw_closed_form(&s0, W, t + h).velocity - cw_closed_form(&s0, W, t - h).velocity) / (2.0 * h);
        let v = (cw_closed_form(&s0, W, t + h).position - cw_closed_form(&s0, W, t - h).position) / (2.0 * h);
        let here = cw_closed_form(&s0, W, t);
        let expect = cw_accel(&here, Vec2::zeros(), &p);
        assert_relative_eq!(a.x, expect.x, max_relative = 1e-6);
        assert_relative_eq!(a.y, expect.y, max_relative = 1e-6);
        assert_relative_eq!(v.x, here.velocity.x, max_relative = 1e-8);
        assert_relative_eq!(v.y, here.velocity.y, max_relative = 1e-8);
    }
}
