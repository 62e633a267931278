//! Analytic-oracle checks for the integrators, run by `validate-dynamics`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    cw_accel, cw_closed_form, ground_closed_form, j2_accel, mean_motion, rk4_step, CwParams, GroundParams, J2Params,
    State2D, Vec2, DEFAULT_ORBIT_RADIUS_KM, EARTH_MU,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value < self.tolerance
    }
}

/// Relative error of `got` against `want`, with position scaled by the
/// orbit size `max(|r0|, |v0|/ω)` and velocity by `ω` times that.
pub fn cw_relative_error(got: &State2D, want: &State2D, initial: &State2D, omega: f64) -> f64 {
    let scale_pos = initial.position.norm().max(initial.velocity.norm() / omega);
    let scale_vel = omega * scale_pos;
    let ep = (got.position - want.position).norm() / scale_pos;
    let ev = (got.velocity - want.velocity).norm() / scale_vel;
    ep.max(ev)
}

/// Integrates force-free CW motion for `steps` steps of `dt` and returns the
/// worst relative error against the closed form over the trajectory.
pub fn cw_trajectory_error(initial: &State2D, omega: f64, dt: f64, steps: usize) -> f64 {
    let params = CwParams { omega_n: omega, mass: 1.0 };
    let mut s = *initial;
    let mut worst = 0.0f64;
    for k in 1..=steps {
        s = rk4_step(|x, f| cw_accel(x, f, &params), &s, Vec2::zeros(), dt);
        let want = cw_closed_form(initial, omega, k as f64 * dt);
        worst = worst.max(cw_relative_error(&s, &want, initial, omega));
    }
    worst
}

fn random_cw_state(rng: &mut ChaCha8Rng, omega: f64) -> State2D {
    let p = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let v = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * omega;
    State2D::new(p, v)
}

pub fn run_oracle_suite(seed: u64) -> Vec<Check> {
    let omega = mean_motion(EARTH_MU, DEFAULT_ORBIT_RADIUS_KM);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let cw = (0..5)
        .map(|_| cw_trajectory_error(&random_cw_state(&mut rng, omega), omega, 1.0, 3600))
        .fold(0.0, f64::max);

    // Drift-free initial condition: vy0 = -2 ω x0 gives a closed ellipse.
    let x0 = 0.3;
    let ellipse0 = State2D::new(Vec2::new(x0, 0.1), Vec2::new(0.05 * omega, -2.0 * omega * x0));
    let period = TAU / omega;
    let steps = 10_000;
    let dt = period / steps as f64;
    let params = CwParams { omega_n: omega, mass: 1.0 };
    let mut s = ellipse0;
    for _ in 0..steps {
        s = rk4_step(|x, f| cw_accel(x, f, &params), &s, Vec2::zeros(), dt);
    }
    let ellipse = (s.position - ellipse0.position).norm() / ellipse0.position.norm();

    let ground_params = GroundParams::default();
    let g0 = State2D::new(Vec2::new(0.2, -0.1), Vec2::new(0.3, 0.0));
    let force = Vec2::new(0.5, -0.25);
    let mut g = g0;
    let mut ground = 0.0f64;
    for k in 1..=1000 {
        g = rk4_step(
            |x, f| crate::dynamics::ground_accel(x, f, Vec2::zeros(), &ground_params),
            &g,
            force,
            0.1,
        );
        let want = ground_closed_form(&g0, force, &ground_params, k as f64 * 0.1);
        let ep = (g.position - want.position).norm() / want.position.norm();
        let ev = (g.velocity - want.velocity).norm() / want.velocity.norm();
        ground = ground.max(ep).max(ev);
    }

    let j2 = J2Params::with_c(omega, 1.0, 1.0).expect("valid parameters");
    let mut j2_diff = 0.0f64;
    for _ in 0..10_000 {
        let st = random_cw_state(&mut rng, omega);
        let f = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let a = j2_accel(&st, f, &j2);
        let b = cw_accel(&st, f, &j2.as_cw());
        j2_diff = j2_diff.max((a - b).abs().max());
    }

    vec![
        Check {
            name: "cw_oracle_max_rel_error",
            value: cw,
            tolerance: 1e-6,
        },
        Check {
            name: "cw_ellipse_return_rel_error",
            value: ellipse,
            tolerance: 1e-6,
        },
        Check {
            name: "ground_oracle_max_rel_error",
            value: ground,
            tolerance: 1e-6,
        },
        Check {
            name: "j2_at_c1_minus_cw_max_abs",
            value: j2_diff,
            tolerance: f64::MIN_POSITIVE,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_oracle_suite(0) {
            assert!(c.passed(), "{} = {:e}", c.name, c.value);
        }
    }
}
