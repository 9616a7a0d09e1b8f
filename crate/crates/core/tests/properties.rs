use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use fourwire::bench::violation_pct;
use fourwire::fixtures;
use fourwire::form::{build, Form, FormulationConfig};
use fourwire::netmodel::{json, PerElement};
use fourwire::reduce::sequence::fortescue;
use fourwire::reduce::{schur_eliminate, sequence_components};
use fourwire::solve::{run_pf, BunchKaufman, SolverOptions, SparseLdl, Start};

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

/// Symmetric complex 4x4 with a dominant diagonal, like a line impedance.
fn impedance() -> impl Strategy<Value = DMatrix<Complex64>> {
    (proptest::collection::vec(complex(), 10), proptest::collection::vec(0.5..2.0f64, 4)).prop_map(|(off, diag)| {
        let mut z = DMatrix::from_element(4, 4, Complex64::default());
        let mut k = 0;
        for i in 0..4 {
            for j in i..4 {
                let v = if i == j { Complex64::new(diag[i] + 2.0, diag[i] + 2.0) } else { off[k] * 0.4 };
                z[(i, j)] = v;
                z[(j, i)] = v;
                k += 1;
            }
        }
        z
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn kron_reduction_inverts_admittance_block(z in impedance()) {
        // With the neutral held at zero, the reduced impedance is the inverse
        // of the phase block of the admittance matrix.
        let reduced = schur_eliminate(&z, 3).unwrap();
        let y = z.clone().try_inverse().unwrap();
        let oracle = y.view((0, 0), (3, 3)).into_owned().try_inverse().unwrap();
        let err = (&reduced - &oracle).iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12, "{err}");
        prop_assert!((&reduced - reduced.transpose()).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn sequence_components_round_trip(a in complex(), b in complex(), c in complex()) {
        let s = sequence_components(a, b, c);
        let back = fortescue() * nalgebra::Vector3::new(s[0], s[1], s[2]);
        for (x, y) in back.iter().zip([a, b, c]) {
            prop_assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn violation_is_nonnegative(pn in 0.0..500.0f64, bound in 1.0..500.0f64) {
        let v = violation_pct(pn, bound);
        prop_assert!(v >= 0.0);
        prop_assert_eq!(v == 0.0, pn <= bound);
    }

    #[test]
    fn sparse_and_dense_factors_agree(n1 in 2usize..12, n2 in 1usize..6, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = n1 + n2;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n1 {
            a[(i, i)] = rng.random_range(1.0..3.0);
            for j in 0..i {
                if rng.random_bool(0.3) {
                    let v = rng.random_range(-0.3..0.3);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
        }
        for r in n1..n {
            a[(r, r)] = -1e-3;
            for j in 0..n1 {
                if rng.random_bool(0.5) {
                    let v = rng.random_range(-1.0..1.0);
                    a[(r, j)] = v;
                    a[(j, r)] = v;
                }
            }
        }
        let entries: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..=j).map(move |i| (i, j))).filter(|&(i, j)| a[(i, j)] != 0.0).collect();
        let values: Vec<f64> = entries.iter().map(|&(i, j)| a[(i, j)]).collect();
        let mut ldl = SparseLdl::analyze(n, &entries);
        let inertia = ldl.factor(&values, 1e-13);
        prop_assert_eq!((inertia.positive, inertia.negative, inertia.zero), (n1, n2, 0));
        let bk = BunchKaufman::factor(&a, 1e-13);
        prop_assert_eq!(bk.inertia, inertia);

        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let oracle = a.clone().lu().solve(&nalgebra::DVector::from_vec(rhs.clone())).unwrap();
        let (mut xs, mut xd) = (rhs.clone(), rhs);
        ldl.solve(&mut xs);
        bk.solve(&mut xd);
        for k in 0..n {
            prop_assert!((xs[k] - oracle[k]).abs() < 1e-8 * oracle[k].abs().max(1.0));
            prop_assert!((xd[k] - oracle[k]).abs() < 1e-8 * oracle[k].abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn network_json_round_trips(n in 3usize..25, seed in any::<u64>()) {
        let net = fixtures::synthetic_feeder(n, seed);
        let back = json::from_str(&json::to_string(&net).unwrap()).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn physical_states_are_acr_feasible(scale in 0.2..3.0f64, seed in 0u64..1000) {
        // Any IVR power-flow solution, mapped to power variables, satisfies
        // the ACR model.
        let mut net = fixtures::synthetic_feeder(12, seed);
        for d in net.loads.values_mut() {
            d.p_nom = d.p_nom.map(|p| p * scale);
            d.q_nom = d.q_nom.map(|q| q * scale);
        }
        let cfg = FormulationConfig::power_flow();
        let (fi, sol) = run_pf(&net, Form::Ivr, &cfg, &SolverOptions::default(), Start::NoLoad).unwrap();
        prop_assume!(sol.is_optimal());
        let fa = build(&net, Form::Acr, &cfg).unwrap();
        let xa = fa.point_from_state(&fi.state_from_point(&sol.x));
        let v = fa.sys.max_violation(&xa).unwrap();
        prop_assert!(v < 1e-8, "violation {v}");
    }

    #[test]
    fn uniform_scaling_is_elementwise(p in 0.0..1e4f64, k in 0.0..3.0f64) {
        prop_assert_eq!(PerElement::Uniform(p).map(|v| v * k).get(2), p * k);
    }
}
