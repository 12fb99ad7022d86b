use ensemble_bounds::bounds::{
    eigenenergy_prefactors, eigenenergy_sum_prefactors, eigenstate_prefactor,
    eigenstate_sum_prefactors, ensemble_state_prefactors, gap_functions,
};
use ensemble_bounds::polytope::{
    birkhoff_extrema, brute_force_extrema, constrained_extrema, cycle_bound_check,
    permutohedron_slice, LinearTarget, Permutation, Space,
};
use ensemble_bounds::{EnergySpectrum, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spectrum(rng: &mut ChaCha8Rng, d: usize) -> EnergySpectrum {
    let mut acc = rng.random_range(-2.0..0.0);
    let mut v = vec![acc];
    for _ in 1..d {
        acc += rng.random_range(0.1..2.0);
        v.push(acc);
    }
    EnergySpectrum::new(v).unwrap()
}

/// Strictly decreasing weights on the first `k` entries, zero after.
fn random_weights(rng: &mut ChaCha8Rng, d: usize, k: usize) -> WeightVector {
    let mut raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    raw.sort_by(|a, b| b.total_cmp(a));
    for i in 1..k {
        if raw[i - 1] - raw[i] < 0.02 {
            raw[i] = raw[i - 1] - 0.02;
        }
    }
    let shift = raw[k - 1].min(0.0) - 0.01;
    for r in raw.iter_mut() {
        *r -= shift;
    }
    raw.resize(d, 0.0);
    WeightVector::normalized(raw).unwrap()
}

fn cases() -> Vec<(WeightVector, EnergySpectrum)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    for d in 3..=5 {
        for k in [d, d - 2] {
            if k == 0 {
                continue;
            }
            for _ in 0..8 {
                out.push((
                    random_weights(&mut rng, d, k.max(1)),
                    random_spectrum(&mut rng, d),
                ));
            }
        }
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn analytic_slice_matches_brute_force() {
    for (w, e) in cases() {
        let delta = 0.5 * gap_functions(&w, &e).unwrap().g;
        let mut targets = vec![LinearTarget::ensemble_state(&w)];
        for k in 0..w.dim() {
            targets.push(LinearTarget::eigenenergy(k, &e).unwrap());
        }
        for t in &targets {
            let a = constrained_extrema(t, &w, &e, delta).unwrap();
            let b = brute_force_extrema(t, &w, &e, delta).unwrap();
            assert!(
                close(a.min, b.min) && close(a.max, b.max),
                "{} w={:?} e={:?}: {a:?} vs {b:?}",
                t.name,
                w.as_slice(),
                e.values()
            );
        }
    }
}

#[test]
fn slice_vertices_lie_inside_and_on_hyperplane() {
    for (w, e) in cases() {
        let delta = 0.5 * gap_functions(&w, &e).unwrap().g;
        for space in [Space::Weights, Space::Energies] {
            let slice = permutohedron_slice(space, &w, &e, delta).unwrap();
            let mut sorted = slice.base.clone();
            sorted.sort_by(f64::total_cmp);
            for v in &slice.intersection_vertices {
                assert!(v.p > 0.0 && v.p <= 1.0);
                let de: f64 = match space {
                    Space::Weights => v
                        .point
                        .iter()
                        .zip(w.as_slice())
                        .zip(e.values())
                        .map(|((x, wl), el)| (x - wl) * el)
                        .sum(),
                    Space::Energies => v
                        .point
                        .iter()
                        .zip(e.values())
                        .zip(w.as_slice())
                        .map(|((u, el), wl)| wl * (u - el))
                        .sum(),
                };
                assert!((de - delta).abs() < 1e-10);
                for x in &v.point {
                    assert!(*x >= sorted[0] - 1e-12 && *x <= sorted[sorted.len() - 1] + 1e-12);
                }
            }
        }
    }
}

#[test]
fn ensemble_state_prefactors_are_slice_extrema() {
    for (w, e) in cases() {
        let delta = 0.5 * gap_functions(&w, &e).unwrap().g;
        let (lo, hi) = ensemble_state_prefactors(&w, &e).unwrap();
        let ex = brute_force_extrema(&LinearTarget::ensemble_state(&w), &w, &e, delta).unwrap();
        assert!(
            close(ex.min, lo * delta),
            "{:?} {:?}",
            w.as_slice(),
            e.values()
        );
        assert!(
            close(ex.max, hi * delta),
            "{:?} {:?}",
            w.as_slice(),
            e.values()
        );
    }
}

#[test]
fn eigenenergy_prefactors_are_slice_extrema() {
    for (w, e) in cases() {
        let delta = 0.5 * gap_functions(&w, &e).unwrap().g;
        for k in 0..w.positive_count() {
            let (lo, hi) = eigenenergy_prefactors(k, &w).unwrap();
            let t = LinearTarget::eigenenergy(k, &e).unwrap();
            let ex = brute_force_extrema(&t, &w, &e, delta).unwrap();
            assert!(ex.min >= lo * delta - 1e-12);
            if w.positive_count() > 1 {
                assert!(close(ex.min, lo * delta), "k={k} {:?}", w.as_slice());
            } else {
                // ground-state limit: dE_0 = dE_w, c_- = 0 is loose
                assert!(close(ex.min, delta));
            }
            if k + 1 < w.dim() {
                assert!(close(ex.max, hi * delta), "k={k} {:?}", w.as_slice());
            } else {
                // the top level can only move down; the bound holds but is loose
                assert!(ex.max <= 1e-12 && ex.max <= hi * delta);
            }
        }
    }
}

#[test]
fn birkhoff_oracle_confirms_state_and_sum_bounds() {
    for (w, e) in cases() {
        let delta = 0.5 * gap_functions(&w, &e).unwrap().g;
        for k in 0..w.positive_count() {
            let b = eigenstate_prefactor(k, &w, &e).unwrap();
            let ex = birkhoff_extrema(&w, &e, delta, |x| x.delta_psi[k]).unwrap();
            assert!(
                close(ex.max, b * delta),
                "psi_{k} {:?} {:?}",
                w.as_slice(),
                e.values()
            );
            assert!(ex.min >= -1e-12);
        }
        let (lo, hi) = eigenstate_sum_prefactors(&w, &e).unwrap();
        let ex = birkhoff_extrema(&w, &e, delta, |x| x.sum_psi).unwrap();
        assert!(
            close(ex.max, hi * delta),
            "sum_psi {:?} {:?}",
            w.as_slice(),
            e.values()
        );
        assert!(ex.min >= lo * delta - 1e-12);

        let (lo, hi) = eigenenergy_sum_prefactors(&w).unwrap();
        let ex = birkhoff_extrema(&w, &e, delta, |x| x.sum_abs_e).unwrap();
        assert!(
            close(ex.max, hi * delta),
            "sum_abs_E {:?} {:?}",
            w.as_slice(),
            e.values()
        );
        // convex target: slice vertices only bound the minimum from above
        assert!(ex.min >= lo * delta - 1e-12);

        let (lo, hi) = ensemble_state_prefactors(&w, &e).unwrap();
        let ex = birkhoff_extrema(&w, &e, delta, |x| x.delta_rho_w).unwrap();
        assert!(close(ex.min, lo * delta) && close(ex.max, hi * delta));
    }
}

#[test]
fn every_three_cycle_obeys_cycle_bounds() {
    for (w, e) in cases() {
        let d = w.dim();
        for p in Permutation::all(d).unwrap() {
            let cycles = p.cycles();
            if cycles.len() != 1 {
                continue;
            }
            let r = cycle_bound_check(&p, &w, &e).unwrap();
            assert!(r.holds, "{r:?} w={:?} e={:?}", w.as_slice(), e.values());
        }
    }
}
