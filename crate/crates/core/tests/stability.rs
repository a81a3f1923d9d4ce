//! Stability and comparison inequalities for E_p on random discrete
//! instances.

mod common;

use common::*;

const SLACK: f64 = 1e-7;
const SEED: u64 = 0x5eed;

#[test]
fn nu_stability() {
    let t = check_nu_stability(SEED, 120, SLACK);
    assert!(t.ok(120), "{t:?}");
}

#[test]
fn wp_stability_for_affine_maps() {
    let t = check_wp_stability_affine(SEED, 120, SLACK);
    assert!(t.ok(120), "{t:?}");
}

#[test]
fn composition() {
    let t = check_composition(SEED, 120, SLACK);
    assert!(t.ok(120), "{t:?}");
}

#[test]
fn refined_tv_stability() {
    let t = check_tv_stability_refined(SEED, 120, SLACK);
    assert!(t.ok(120), "{t:?}");
}

#[test]
fn codomain_restriction() {
    let t = check_codomain_restriction(SEED, 120, SLACK);
    assert!(t.ok(120), "{t:?}");
}

#[test]
fn lp_comparison() {
    let t = check_lp_comparison(SEED, 120, SLACK);
    assert!(t.ok(120), "{t:?}");
}

#[test]
fn monge_gap_comparison() {
    let t = check_monge_gap(SEED, 120, SLACK);
    assert!(t.ok(120), "{t:?}");
}

#[test]
fn tv_stability_constant_is_finite() {
    let c = tv_stability_constant_p1(SEED, 100);
    assert!(c.is_finite());
}
