#![allow(clippy::needless_range_loop)]

use swe_carleman::io::{
    read_matrix_market, read_vector_market, write_matrix_market, write_vector_market,
};
use swe_carleman::{
    assemble, embed_state, extract_observables, extract_state, initial_field, integrate_reference,
    solve, solve_checked, CarlemanMatrix, Error, EulerSystem, MomentumClosure, PhysParams,
    SolveMethod, DEFAULT_RESIDUAL_TOL,
};

fn params() -> PhysParams {
    PhysParams {
        grid_points: 3,
        length: 2.0,
        dt: 0.05,
        timesteps: 3,
        ..PhysParams::default()
    }
}

#[test]
fn build_solve_extract_matches_truncated_reference() {
    let p = params();
    let h = [1.01, 1.0, 0.995];
    let u = [0.02, 0.0, -0.01];
    let f0 = initial_field(&h, &u).unwrap();
    let c = CarlemanMatrix::build(&p).unwrap();
    let sys = assemble(&c.total, &embed_state(&f0), p.dt, p.timesteps).unwrap();
    let rep = solve_checked(&sys, SolveMethod::BlockForward, DEFAULT_RESIDUAL_TOL).unwrap();
    let obs = extract_observables(&rep.solution, p.grid_points, p.timesteps).unwrap();
    let reference = integrate_reference(&f0, &p, MomentumClosure::Truncated, p.timesteps).unwrap();

    assert_eq!(obs.steps(), p.timesteps + 1);
    for j in 0..=p.timesteps {
        let want = reference[j].heights();
        for (a, b) in obs.h[j].iter().zip(&want) {
            // closure error is third order in the deviation from rest
            assert!((a - b).abs() < 1e-6, "step {j}: {a} vs {b}");
        }
        assert!((obs.total_mass(j) - h.iter().sum::<f64>()).abs() < 1e-12);
    }

    let last = extract_state(sys.block(&rep.solution, p.timesteps), p.grid_points).unwrap();
    assert!(last.is_finite());
}

#[test]
fn matrix_market_round_trip_gives_same_solution() {
    let p = params();
    let f0 = initial_field(&[1.0, 1.02, 1.0], &[0.0, 0.01, 0.0]).unwrap();
    let c = CarlemanMatrix::build(&p).unwrap();
    let sys = assemble(&c.total, &embed_state(&f0), p.dt, p.timesteps).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let e_path = dir.path().join("E.mtx");
    let b_path = dir.path().join("b.mtx");
    write_matrix_market(&e_path, &sys.matrix, Some("euler system")).unwrap();
    write_vector_market(&b_path, &sys.rhs).unwrap();

    let e = read_matrix_market(&e_path).unwrap();
    let b = read_vector_market(&b_path).unwrap();
    assert_eq!(e, sys.matrix);
    assert_eq!(b, sys.rhs);

    let again = EulerSystem::from_parts(e, b, c.dim(), p.dt).unwrap();
    let x1 = solve(&sys, SolveMethod::BlockForward).unwrap().solution;
    let x2 = solve(&again, SolveMethod::BlockForward).unwrap().solution;
    let x3 = solve(&again, SolveMethod::SparseDirect).unwrap().solution;
    assert_eq!(x1, x2);
    for (a, b) in x1.iter().zip(&x3) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn zero_timesteps_is_identity_system() {
    let p = PhysParams {
        timesteps: 0,
        ..params()
    };
    let f0 = initial_field(&[1.0; 3], &[0.0; 3]).unwrap();
    let c = CarlemanMatrix::build(&p).unwrap();
    let v0 = embed_state(&f0);
    let sys = assemble(&c.total, &v0, p.dt, 0).unwrap();
    assert_eq!(sys.dim(), c.dim());
    let x = solve(&sys, SolveMethod::SparseDirect).unwrap().solution;
    assert_eq!(x, v0);
}

#[test]
fn too_few_grid_points_rejected() {
    let p = PhysParams {
        grid_points: 2,
        ..params()
    };
    match CarlemanMatrix::build(&p) {
        Err(Error::TooFewGridPoints(2)) => {}
        other => panic!("unexpected: {other:?}"),
    }
}
