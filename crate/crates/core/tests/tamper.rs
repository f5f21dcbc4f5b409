use qkr_core::primitives::{Encoding, ProtocolParams};
use qkr_core::protocol::tamper_fuzz;

#[test]
fn a_million_tampered_rounds_produce_no_false_accept() {
    let params = ProtocolParams {
        n: 0,
        ell: 136,
        kappa: 8,
        lambda: 64,
        beta: 0.0,
        encoding: Encoding::SixState,
        q_bits: 1,
    };
    let report = tamper_fuzz(&params, 1_000_000, 11).unwrap();
    assert_eq!(report.rounds, 1_000_000);
    assert_eq!(report.false_accepts, 0);
    // Rounds that only hit the padding `r` leave the message intact.
    assert!(report.forgery_attempts > 990_000, "{report:?}");
    assert_eq!(report.rejects, report.forgery_attempts);
}

#[test]
fn short_tags_are_sometimes_forged() {
    // At lambda = 8 the tag check is weak enough that random tampering gets
    // through at a rate near 2^-8 per attempt.
    let params = ProtocolParams {
        n: 0,
        ell: 24,
        kappa: 8,
        lambda: 8,
        beta: 0.0,
        encoding: Encoding::Bb84,
        q_bits: 1,
    };
    let report = tamper_fuzz(&params, 100_000, 12).unwrap();
    let rate = report.false_accepts as f64 / report.forgery_attempts as f64;
    assert!(report.false_accepts > 0);
    assert!(rate < 3.0 / 256.0, "{report:?}");
}
