//! The certified lower bound must be pointwise sound on the region, and
//! monotone under shrinking the region.

use num::{BigRational, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quartic_carleman::certify::{
    certify_commutator, cs_split, extend_form, CertifyOutcome, RegionSpec,
};
use quartic_carleman::conjugate::build_carleman_operator;
use quartic_carleman::ibp::{form_from_operator, TermKind};
use quartic_carleman::symcore::{Alphabet, DiffPoly, Generator};

fn split_commutator_form(d: usize, region: &RegionSpec) -> quartic_carleman::ibp::QuadForm {
    let (_, s, a) = build_carleman_operator(d).unwrap();
    let comm = s.commutator(&a).unwrap();
    let form = form_from_operator(&comm).unwrap();
    let alph = Alphabet::with_splitters(d);
    let form = extend_form(&form, &alph).unwrap();
    let omega = DiffPoly::generator(&alph, Generator::SplitOmega);
    let rho = DiffPoly::generator(&alph, Generator::SplitRho);
    cs_split(&form, &omega, &rho, region).unwrap()
}

/// 50 random points per dimension: every square coefficient of the split
/// form is nonnegative and the |f|^2 coefficient clears the certified
/// floor c * alpha^7 / R^8.
#[test]
fn certificate_is_pointwise_sound() {
    for d in [1usize, 2] {
        let region = RegionSpec::standard(d);
        let cert = match certify_commutator(d, &region).unwrap() {
            CertifyOutcome::Certified(c) => c,
            other => panic!("expected certificate at d={d}, got {other:?}"),
        };
        let split = split_commutator_form(d, &region);
        let alph = split.alphabet().clone();

        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for trial in 0..50 {
            let r: f64 = rng.gen_range(1.0..100.0);
            // anywhere at or above the threshold
            let alpha = cert.c_alpha * r.powf(4.0 / 3.0) * rng.gen_range(1.0..4.0);
            let psi = rng.gen_range(1.0f64..10.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let phi1: f64 = rng.gen_range(-3.0..3.0);
            let phi2: f64 = rng.gen_range(-3.0..3.0);
            let y: f64 = rng.gen_range(-5.0..5.0);
            let vals: Vec<f64> = alph
                .generators()
                .iter()
                .map(|g| match g {
                    Generator::Alpha => alpha,
                    Generator::RInv => 1.0 / r,
                    Generator::Psi => psi,
                    Generator::Coord(_) => y * r,
                    Generator::PhiDeriv(1) => phi1,
                    Generator::PhiDeriv(2) => phi2,
                    Generator::PhiDeriv(_) => 0.0,
                    Generator::SplitOmega => cert.c_omega * r.powf(1.0 / 3.0),
                    Generator::SplitOmegaInv => 1.0 / (cert.c_omega * r.powf(1.0 / 3.0)),
                    Generator::SplitRho => cert.c_rho * r.powf(1.0 / 3.0),
                    Generator::SplitRhoInv => 1.0 / (cert.c_rho * r.powf(1.0 / 3.0)),
                    _ => 0.0,
                })
                .collect();
            for t in split.form_terms() {
                assert_eq!(t.kind, TermKind::Square);
                let v = t.weight.eval(&vals).re;
                let floor = if t.a.is_zero() {
                    cert.c * alpha.powi(7) / r.powi(8) * (1.0 - 1e-9)
                } else {
                    0.0
                };
                assert!(
                    v >= floor - 1e-9 * v.abs().max(1.0),
                    "d={d} trial={trial}: slot {:?} value {v} below floor {floor}",
                    t.a
                );
            }
        }
    }
}

/// Shrinking the region (larger R_min, larger threshold coefficient)
/// never loses the certificate.
#[test]
fn certificate_is_monotone_in_region() {
    let base = match certify_commutator(1, &RegionSpec::standard(1)).unwrap() {
        CertifyOutcome::Certified(c) => c,
        other => panic!("expected certificate, got {other:?}"),
    };
    for r_min in [2.0f64, 8.0, 64.0] {
        let mut region = RegionSpec::standard(1);
        region.r_min = BigRational::from_f64(r_min).unwrap();
        assert!(matches!(
            certify_commutator(1, &region).unwrap(),
            CertifyOutcome::Certified(_)
        ));
    }
    for scale in [2.0f64, 16.0] {
        let mut region = RegionSpec::standard(1);
        region.c_alpha = BigRational::from_f64(base.c_alpha * scale);
        assert!(matches!(
            certify_commutator(1, &region).unwrap(),
            CertifyOutcome::Certified(_)
        ));
    }
}

#[test]
fn outcomes_serialize_to_json() {
    let cert = certify_commutator(2, &RegionSpec::standard(2)).unwrap();
    let json = serde_json::to_value(&cert).unwrap();
    assert_eq!(json["outcome"], "certified");
    assert!(json["c"].as_f64().unwrap() > 0.0);
    assert!(json["steps"].as_array().unwrap().len() > 1);

    let mut relaxed = RegionSpec::standard(1);
    relaxed.psi_min = BigRational::from_f64(0.0).unwrap();
    relaxed.c_alpha = BigRational::from_f64(1.0);
    let violation = certify_commutator(1, &relaxed).unwrap();
    let json = serde_json::to_value(&violation).unwrap();
    assert_eq!(json["outcome"], "violated");
    assert!(json["value"].as_f64().unwrap() < 0.0);
}
