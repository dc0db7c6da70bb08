use hoif::checks::{suite, Mutation};

#[test]
fn every_check_passes_on_the_unmodified_code() {
    for r in suite(7, Mutation::None).unwrap() {
        assert!(r.passed(), "{}: {:e} > {:e}", r.name, r.residual, r.tolerance);
    }
}

#[test]
fn flipped_corrections_break_degeneracy() {
    let out = suite(7, Mutation::FlipDegenerateSign).unwrap();
    let failed: Vec<_> = out.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    assert_eq!(failed, ["degenerate part"]);
}

#[test]
fn wrong_gram_weight_breaks_the_collapse_identity() {
    let out = suite(7, Mutation::WrongGramWeight).unwrap();
    let failed: Vec<_> = out.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    assert_eq!(failed, ["collapse identity"]);
}
