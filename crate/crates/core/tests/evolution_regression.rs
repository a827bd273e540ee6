//! Propagator invariants: reversibility, mode-wise unitarity,
//! log-convexity of the stretched-exponential weight, and the
//! localized annular lower-bound chain end to end.

use ndarray::Dimension;
use num::complex::Complex64;
use quartic_carleman::evolve::{
    evolve, gamma_profile, logconvexity_check, lower_bound_demo, EvolutionSpec, State, Trajectory,
};

fn wide_gaussian(spec: &EvolutionSpec, amp: f64) -> State {
    spec.sample(|x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new(amp * (-r2 / (5.5f64 * 5.5)).exp(), 0.0)
    })
}

fn rel_l2_diff(a: &State, b: &State) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

// V is real, so t -> conj u(T - t) solves the same equation; running the
// propagator on the conjugate of the final state must return the start.
#[test]
fn time_reversal_recovers_initial_state() {
    // wide, weak potential: scattered mass reaching the box margin
    // within t = 1 scales superlinearly in the amplitude, and 0.005
    // keeps the worst edge value an order of magnitude under the
    // decay threshold while still exercising the coupled propagator
    let spec = EvolutionSpec::new(1, 48.0, 192, 1e-2, |x| {
        0.005 * (-(x[0] / 6.0) * (x[0] / 6.0)).exp()
    })
    .unwrap();
    let u0 = wide_gaussian(&spec, 1.0);
    let fwd = evolve(&u0, &spec, 1.0, 2).unwrap();
    let v0 = fwd.states.last().unwrap().mapv(|z| z.conj());
    let bwd = evolve(&v0, &spec, 1.0, 2).unwrap();
    let back = bwd.states.last().unwrap().mapv(|z| z.conj());
    let err = rel_l2_diff(&back, &u0);
    assert!(err <= 1e-8, "round trip error {err:.3e}");
    assert!(fwd.l2_drift <= 1e-8 && bwd.l2_drift <= 1e-8);
}

// the free propagator is diagonal in frequency: every Fourier magnitude
// is conserved exactly, not just the total norm
#[test]
fn free_evolution_preserves_fourier_magnitudes() {
    let spec = EvolutionSpec::free(1, 40.0, 160, 1e-2).unwrap();
    let u0 = wide_gaussian(&spec, 1.0);
    let traj = evolve(&u0, &spec, 1.0, 2).unwrap();
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(spec.count);
    let mut hat0: Vec<Complex64> = u0.iter().copied().collect();
    let mut hat1: Vec<Complex64> = traj.states[1].iter().copied().collect();
    fft.process(&mut hat0);
    fft.process(&mut hat1);
    let scale: f64 = hat0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let worst = hat0
        .iter()
        .zip(&hat1)
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0, f64::max)
        / scale;
    assert!(worst <= 1e-12, "mode magnitude drift {worst:.3e}");
}

#[test]
fn free_gaussian_log_convexity_constant_is_small() {
    let spec = EvolutionSpec::free(1, 40.0, 160, 1e-2).unwrap();
    let u0 = wide_gaussian(&spec, 1.0);
    let traj = evolve(&u0, &spec, 1.0, 9).unwrap();
    let report = logconvexity_check(&traj, 0.05, None, 10.0).unwrap();
    assert!(!report.violated, "c = {}", report.c);
    assert!(report.c <= 10.0 && report.c >= 1.0 - 1e-12, "c = {}", report.c);
    assert_eq!(report.m_forcing, 0.0);
}

// closed form for a single box mode held constant in time: every spatial
// derivative has magnitude k^order, so the annular energy is the mode
// density times the covered cell count
#[test]
fn annular_energy_matches_plane_wave_density() {
    let spec = EvolutionSpec::free(1, 40.0, 256, 1e-2).unwrap();
    let k = std::f64::consts::PI * 4.0 / 40.0;
    let u = spec.sample(|x| Complex64::new(0.0, k * x[0]).exp());
    let traj = Trajectory {
        times: vec![0.0, 1.0],
        states: vec![u.clone(), u],
        l2_drift: 0.0,
        spec: EvolutionSpec::free(1, 40.0, 256, 1e-2).unwrap(),
    };
    let r = 4.0;
    let axis = traj.spec.x_axis();
    let cells = axis
        .iter()
        .filter(|x| x.abs() > r - 1.0 && x.abs() < r)
        .count() as f64;
    let density = 1.0 + k.powi(2) + k.powi(4) + k.powi(6);
    let expect = (density * cells * traj.spec.cell_volume()).sqrt();
    let got = gamma_profile(&traj, r).unwrap();
    assert!(
        (got - expect).abs() <= 1e-10 * expect,
        "gamma {got} vs {expect}"
    );
}

#[test]
fn localized_lower_bound_chain_holds() {
    let spec = EvolutionSpec::free(1, 40.0, 320, 1e-2).unwrap();
    let u0 = wide_gaussian(&spec, 2.0);
    let traj = evolve(&u0, &spec, 1.0, 17).unwrap();
    for r in [4.0, 8.0] {
        let report = lower_bound_demo(&traj, r, 4.0, 1024.0).unwrap();
        assert!(!report.phi_flagged);
        assert!((report.alpha - 4.0 * r.powf(4.0 / 3.0)).abs() < 1e-12);
        assert!(report.gamma > 0.0);
        for rec in &report.records {
            assert!(
                rec.holds,
                "R = {r}: {} fails, log lhs {} > log rhs {}",
                rec.name, rec.lhs_log, rec.rhs_log
            );
        }
    }
}

// refusing the demo when the trajectory cannot satisfy the hypotheses
#[test]
fn demo_rejects_short_time_span() {
    let spec = EvolutionSpec::free(1, 40.0, 64, 1e-2).unwrap();
    let u0 = wide_gaussian(&spec, 2.0);
    let traj = evolve(&u0, &spec, 0.5, 3).unwrap();
    assert!(matches!(
        lower_bound_demo(&traj, 4.0, 4.0, 1024.0),
        Err(quartic_carleman::Error::HypothesisUnmet(_))
    ));
    let _ = u0.raw_dim().ndim();
}
