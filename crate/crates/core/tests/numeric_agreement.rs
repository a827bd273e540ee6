//! Two independent code paths must agree: operator application plus
//! quadrature versus evaluation of the normalized quadratic form, and
//! the discrete Carleman quantities must respect the certified bound.

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quartic_carleman::certify::{certify_commutator, CertifyOutcome, RegionSpec};
use quartic_carleman::conjugate::build_carleman_operator;
use quartic_carleman::ibp::{form_from_operator, reference_commutator_form};
use quartic_carleman::numgrid::{
    apply_op, carleman_ratio, form_eval_numeric, rayleigh_min, Bindings, Field, GridSpec,
    Scheme, TimeProfile,
};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn sine_profile(t_count: usize, amp: f64) -> TimeProfile {
    TimeProfile::sample(t_count, |t| {
        [
            amp * (TWO_PI * t).sin(),
            amp * TWO_PI * (TWO_PI * t).cos(),
            -amp * TWO_PI * TWO_PI * (TWO_PI * t).sin(),
            -amp * TWO_PI * TWO_PI * TWO_PI * (TWO_PI * t).cos(),
        ]
    })
}

/// Smooth random bump: Gaussian envelope times a random integer Fourier
/// mode, compactly supported inside the box and the time interval.
fn random_bump(spec: &GridSpec, rng: &mut ChaCha8Rng) -> Field {
    let d = spec.d;
    let centers: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let sigmas: Vec<f64> = (0..d).map(|_| rng.gen_range(0.25..0.4)).collect();
    let modes: Vec<f64> = (0..d).map(|_| rng.gen_range(-3i32..=3) as f64).collect();
    let amp_re: f64 = rng.gen_range(0.5..1.5);
    let amp_im: f64 = rng.gen_range(-0.5..0.5);
    Field::from_fn(spec.clone(), move |t, x| {
        let mut e = -((t - 0.5) / 0.05).powi(2);
        let mut phase = 0.0;
        for j in 0..d {
            e -= ((x[j] - centers[j]) / sigmas[j]).powi(2);
            phase += modes[j] * x[j];
        }
        Complex64::new(amp_re, amp_im) * Complex64::new(0.0, phase).exp() * e.exp()
    })
    .unwrap()
}

#[test]
fn operator_quadrature_matches_form_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2023);
    for d in [1usize, 2] {
        let (_, s, a) = build_carleman_operator(d).unwrap();
        let comm = s.commutator(&a).unwrap();
        let form = form_from_operator(&comm).unwrap();
        let spec = GridSpec::new(d, std::f64::consts::PI, 128, 32, Scheme::Spectral);
        for trial in 0..10 {
            let f = random_bump(&spec, &mut rng);
            let mut b = Bindings::new(
                rng.gen_range(0.5..3.0),
                rng.gen_range(1.0..4.0),
                sine_profile(32, 0.2),
            );
            b.omega = 1.0;
            b.rho = 1.0;
            let direct = f.inner(&apply_op(&comm, &f, &b).unwrap());
            let via_form = form_eval_numeric(&form, &f, &b).unwrap();
            assert!(
                direct.im.abs() <= 1e-6 * direct.re.abs().max(1.0),
                "d={d} trial={trial}: form value not real: {direct}"
            );
            let rel = (direct.re - via_form).abs() / via_form.abs().max(1e-12);
            assert!(
                rel <= 1e-6,
                "d={d} trial={trial}: direct {} vs form {} (rel {rel:.3e})",
                direct.re,
                via_form
            );
        }
    }
}

#[test]
fn transcribed_form_agrees_with_operator_application() {
    // same check against the transcription rather than the engine form
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [1usize, 2] {
        let (_, s, a) = build_carleman_operator(d).unwrap();
        let comm = s.commutator(&a).unwrap();
        let reference = reference_commutator_form(d).unwrap();
        let spec = GridSpec::new(d, std::f64::consts::PI, 128, 32, Scheme::Spectral);
        let f = random_bump(&spec, &mut rng);
        let b = Bindings::new(1.3, 2.0, sine_profile(32, 0.15));
        let direct = f.inner(&apply_op(&comm, &f, &b).unwrap()).re;
        let via_form = form_eval_numeric(&reference, &f, &b).unwrap();
        let rel = (direct - via_form).abs() / via_form.abs().max(1e-12);
        assert!(rel <= 1e-6, "d={d}: rel {rel:.3e}");
    }
}

#[test]
fn operator_application_respects_adjoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let d = 1usize;
    let (l, s, a) = build_carleman_operator(d).unwrap();
    let spec = GridSpec::new(d, std::f64::consts::PI, 128, 32, Scheme::Spectral);
    let b = Bindings::new(1.1, 2.5, sine_profile(32, 0.2));
    for op in [&l, &s, &a] {
        let adj = op.adjoint().unwrap();
        let f = random_bump(&spec, &mut rng);
        let g = random_bump(&spec, &mut rng);
        let lhs = apply_op(op, &f, &b).unwrap().inner(&g);
        let rhs = f.inner(&apply_op(&adj, &g, &b).unwrap());
        let rel = (lhs - rhs).norm() / lhs.norm().max(1e-12);
        assert!(rel <= 1e-8, "adjoint mismatch: {lhs} vs {rhs} (rel {rel:.3e})");
    }
}

#[test]
fn split_form_underestimates_original() {
    use quartic_carleman::certify::{cs_split, extend_form};
    use quartic_carleman::symcore::{Alphabet, DiffPoly, Generator};

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 1usize;
    let (_, s, a) = build_carleman_operator(d).unwrap();
    let comm = s.commutator(&a).unwrap();
    let form = form_from_operator(&comm).unwrap();
    let alph = Alphabet::with_splitters(d);
    let form_s = extend_form(&form, &alph).unwrap();
    let region = RegionSpec::standard(d);
    let omega = DiffPoly::generator(&alph, Generator::SplitOmega);
    let rho = DiffPoly::generator(&alph, Generator::SplitRho);
    let split = cs_split(&form_s, &omega, &rho, &region).unwrap();

    let spec = GridSpec::new(d, std::f64::consts::PI, 128, 32, Scheme::Spectral);
    for trial in 0..5 {
        let f = random_bump(&spec, &mut rng);
        let mut b = Bindings::new(
            rng.gen_range(0.5..2.0),
            rng.gen_range(1.0..3.0),
            sine_profile(32, 0.2), // |phi'| <= 0.2*2pi < 3, inside the bound
        );
        b.omega = rng.gen_range(0.5..2.0);
        b.rho = rng.gen_range(0.5..2.0);
        let original = form_eval_numeric(&form_s, &f, &b).unwrap();
        let lower = form_eval_numeric(&split, &f, &b).unwrap();
        assert!(
            lower <= original + 1e-9 * original.abs().max(1.0),
            "trial {trial}: split {lower} exceeds original {original}"
        );
    }
}

#[test]
fn carleman_ratio_clears_certified_floor() {
    let d = 1usize;
    let region = RegionSpec::standard(d);
    let cert = match certify_commutator(d, &region).unwrap() {
        CertifyOutcome::Certified(c) => c,
        other => panic!("expected certificate, got {other:?}"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut ratios = std::collections::BTreeMap::new();
    for &r in &[4.0f64, 8.0] {
        let alpha = cert.c_alpha * r.powf(4.0 / 3.0);
        let x_half = 4.0 * r;
        let nx = 256;
        let spec = GridSpec::new(d, x_half, nx, 32, Scheme::Spectral);
        let profile = TimeProfile::zero(32);
        let mut worst = f64::INFINITY;
        for _ in 0..5 {
            let center = rng.gen_range(2.2..2.8) * r;
            let sigma = 0.18 * r + rng.gen_range(0.0..0.04) * r;
            let g = Field::from_fn(spec.clone(), |t, x| {
                Complex64::new(
                    (-((x[0] - center) / sigma).powi(2) - ((t - 0.5) / 0.07).powi(2)).exp(),
                    0.0,
                )
            })
            .unwrap();
            let (_lhs, _rhs, ratio) = carleman_ratio(&g, alpha, r, &profile).unwrap();
            assert!(
                ratio >= cert.c,
                "R={r}: ratio {ratio} below certified floor {}",
                cert.c
            );
            worst = worst.min(ratio);
        }
        ratios.insert(r as u64, worst);
    }
    // alpha^7/R^8-normalized ratios at R = 4 and R = 8 within a factor 4
    let r4 = ratios[&4];
    let r8 = ratios[&8];
    let q = (r4 / r8).max(r8 / r4);
    assert!(q <= 4.0, "scaling mismatch: R=4 gives {r4}, R=8 gives {r8}");
}

#[test]
fn rayleigh_minimum_positive_and_alpha_scaling() {
    let d = 1usize;
    let r = 4.0f64;
    let grid = GridSpec::new(d, 4.0 * r, 64, 16, Scheme::Spectral);
    let profile = TimeProfile::zero(16);
    let alpha = 8.0 * r.powf(4.0 / 3.0);
    let m1 = rayleigh_min(d, alpha, r, &profile, &grid).unwrap();
    assert!(m1 > 0.0, "discrete minimum {m1} not positive");
    let m2 = rayleigh_min(d, 2.0 * alpha, r, &profile, &grid).unwrap();
    // normalized by alpha^7/R^8 in both runs: leading-order dominance
    let rel = (m2 - m1).abs() / m1;
    assert!(rel <= 0.15, "normalized minima {m1} vs {m2} differ by {rel:.3}");
}

#[test]
fn rayleigh_minimum_dominates_certified_floor() {
    let d = 1usize;
    let region = RegionSpec::standard(d);
    let cert = match certify_commutator(d, &region).unwrap() {
        CertifyOutcome::Certified(c) => c,
        other => panic!("expected certificate, got {other:?}"),
    };
    let r = 4.0f64;
    let alpha = cert.c_alpha * r.powf(4.0 / 3.0);
    let grid = GridSpec::new(d, 4.0 * r, 64, 16, Scheme::Spectral);
    let profile = TimeProfile::zero(16);
    let m = rayleigh_min(d, alpha, r, &profile, &grid).unwrap();
    assert!(
        m >= 0.9 * cert.c,
        "discrete minimum {m} under the certified floor {}",
        cert.c
    );
    // Masked collocation spaces are not nested, so refinement converges
    // from below: the coarse spectrum misses the derivative cost of
    // vectors hugging the mask edge. Check monotone convergence upward,
    // capped by the quotient of an explicit smooth admissible function.
    let fine = GridSpec::new(d, 4.0 * r, 128, 16, Scheme::Spectral);
    let mf = rayleigh_min(d, alpha, r, &profile, &fine).unwrap();
    assert!(
        m <= mf * (1.0 + 1e-6),
        "coarse minimum {m} exceeds refined {mf}"
    );
    let (_, s, a) = build_carleman_operator(d).unwrap();
    let comm = s.commutator(&a).unwrap();
    let b = Bindings::new(alpha, r, profile.clone());
    // smooth, identically zero outside 4 < x < 6: admissible for the mask
    let trial = Field::from_fn(fine.clone(), |t, x| {
        let s = (x[0] - 4.0) / 2.0;
        let bump = if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            (-1.0 / (s * (1.0 - s))).exp()
        };
        Complex64::new(bump * (-((t - 0.5) / 0.05).powi(2)).exp(), 0.0)
    })
    .unwrap();
    let quot = trial.inner(&apply_op(&comm, &trial, &b).unwrap()).re
        / trial.norm_sq()
        / (alpha.powi(7) / r.powi(8));
    assert!(
        mf <= quot * (1.0 + 1e-6),
        "refined minimum {mf} exceeds the trial-function cap {quot}"
    );
}
