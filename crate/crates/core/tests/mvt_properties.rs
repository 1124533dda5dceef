mod common;

use common::{config, field, model};
use fkavg::harness::{draw_windows, run_mvt_refinement};
use fkavg::rng::{stream, Purpose};
use fkavg::{simulate_path, MvtVerifier};

#[test]
fn max_residual_shrinks_at_first_order_under_refinement() {
    let cfg = config(
        "mvt --model ou(theta=1,mu=0,sigma=1.4142135623730951) --q gauss_bump(c=1,d=0.5,w=1) \
         --K offset_sin(a=2,b=1) --T 50 --dt 0.01 --paths 1 --windows 50 --seed 42 --refine",
    );
    let study = run_mvt_refinement(&cfg).unwrap();
    let coarse = study.coarse.summary.max_abs_residual;
    let fine = study.fine.summary.max_abs_residual;
    let order = (coarse / fine).log2();
    eprintln!("max residual {coarse:.3e} -> {fine:.3e}, observed order {order:.2}");
    assert!(order >= 1.0, "observed order {order}");
}

#[test]
fn window_invariants_on_random_windows() {
    let ou = model("ou(theta=1,mu=0,sigma=1.4142135623730951)");
    let (q, k) = (
        field("gauss_bump(c=1,d=0.5,w=1)"),
        field("offset_sin(a=2,b=1)"),
    );
    for idx in 0..4 {
        let path = simulate_path(&ou, 0.0, 0.01, 3000, 5, idx).unwrap();
        let v = MvtVerifier::new(&path, q, k);
        let mut rng = stream(5, idx, Purpose::Windows);
        for (t, big_t) in draw_windows(&mut rng, 3000, 50).unwrap() {
            let rec = v.identity_check(t, big_t).unwrap();
            // positivity of the boundary ratio
            assert!(rec.r > 0.0);
            // ξ lies in (t, T]
            assert!(rec.xi > rec.t && rec.xi <= rec.horizon + 1e-12, "{rec:?}");
            if rec.crossing_found {
                let (lo, hi) = rec.xi_bracket;
                assert!(t <= lo && lo < hi && hi <= big_t, "{rec:?}");
            }
            // both forms of the ratio agree on moderate windows
            let spread = path.time(big_t - t) * 3.0;
            if spread <= 30.0 {
                let global = v.boundary_ratio_global_form(t, big_t).unwrap();
                assert!(
                    (global - rec.r).abs() <= 1e-10 * rec.r,
                    "{global} vs {}",
                    rec.r
                );
            }
        }
    }
}
