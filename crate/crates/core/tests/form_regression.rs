//! The normalized quadratic form of [S, A] must reproduce the
//! transcribed summary display exactly, for dimensions 1..3.

use quartic_carleman::conjugate::build_carleman_operator;
use quartic_carleman::ibp::{form_from_operator, reference_commutator_form};

#[test]
fn commutator_form_matches_transcription() {
    for d in [1usize, 2, 3] {
        let (_, s, a) = build_carleman_operator(d).unwrap();
        let comm = s.commutator(&a).unwrap();
        let form = form_from_operator(&comm).unwrap();
        assert!(form.is_balanced());
        let reference = reference_commutator_form(d).unwrap();
        assert_eq!(form, reference, "dimension {d}");
        // normalization is idempotent on the result
        assert_eq!(form.normalize().unwrap(), form);
    }
}
