use proptest::prelude::*;

use qstrack::linalg::{c, check_density, project_to_density, simplex_project, unvec, vec, CMatrix};
use qstrack::metrics::{fit_order, normalized_distance};
use qstrack::sim::{evolve, make_kraus, DynamicsConfig};
use qstrack::DensityMatrix;

fn hermitian(d: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(-2.0f64..2.0, 2 * d * d).prop_map(move |xs| {
        let m = CMatrix::from_fn(d, d, |i, j| c(xs[2 * (i * d + j)], xs[2 * (i * d + j) + 1]));
        (&m + m.adjoint()) * c(0.5, 0.0)
    })
}

fn kkt_oracle(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (1u32..(1 << n))
        .filter_map(|mask| {
            let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let shift = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
            let mut x = vec![0.0; n];
            for &i in &support {
                x[i] = v[i] - shift;
            }
            x.iter().all(|&xi| xi >= 0.0).then_some(x)
        })
        .min_by(|a, b| {
            let da: f64 = a.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum();
            let db: f64 = b.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum();
            da.total_cmp(&db)
        })
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vec_unvec_round_trip(m in hermitian(4)) {
        prop_assert_eq!(unvec(&vec(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn simplex_matches_kkt_enumeration(v in prop::collection::vec(-3.0f64..3.0, 1..=6)) {
        let ours = simplex_project(&v).unwrap();
        let oracle = kkt_oracle(&v);
        prop_assert!((ours.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(ours.iter().all(|&x| x >= 0.0));
        for (a, b) in ours.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn projection_is_idempotent_density(m in hermitian(4)) {
        let p = project_to_density(&m).unwrap();
        check_density(p.matrix()).unwrap();
        let again = project_to_density(p.matrix()).unwrap();
        prop_assert!((again.matrix() - p.matrix()).norm() <= 1e-10);
    }

    #[test]
    fn projection_is_non_expansive(a in hermitian(3), b in hermitian(3)) {
        let (pa, pb) = (project_to_density(&a).unwrap(), project_to_density(&b).unwrap());
        prop_assert!((pa.matrix() - pb.matrix()).norm() <= (&a - &b).norm() + 1e-10);
    }

    #[test]
    fn projection_beats_every_density_candidate(m in hermitian(2), other in hermitian(2)) {
        let p = project_to_density(&m).unwrap();
        let candidate = project_to_density(&other).unwrap();
        prop_assert!((&m - p.matrix()).norm() <= (&m - candidate.matrix()).norm() + 1e-10);
    }

    #[test]
    fn distance_is_nonnegative_and_zero_on_diagonal(a in hermitian(2), b in hermitian(2)) {
        let (ra, rb) = (project_to_density(&a).unwrap(), project_to_density(&b).unwrap());
        prop_assert!(normalized_distance(&ra, &rb).unwrap() >= 0.0);
        prop_assert_eq!(normalized_distance(&ra, &ra).unwrap(), 0.0);
    }

    #[test]
    fn order_fit_ignores_positive_scale(exponent in -2.0f64..0.5, scale in 1e-6f64..1e6) {
        let series: Vec<(f64, f64)> = (1..=60).map(|k| (k as f64, (k as f64).powf(exponent) * (1.0 + 0.1 * (k as f64).sin()))).collect();
        let scaled: Vec<(f64, f64)> = series.iter().map(|&(k, v)| (k, scale * v)).collect();
        let (a, b) = (fit_order(&series, 0.5).unwrap(), fit_order(&scaled, 0.5).unwrap());
        prop_assert!((a.slope - b.slope).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn random_dynamics_preserve_density(
        qubits in 1usize..=3,
        seed in any::<u64>(),
        lambda in 0.0f64..=1.0,
        scale in 0.0f64..3.0,
    ) {
        let cfg = DynamicsConfig {
            coupling_strength: lambda,
            hamiltonian_scale: scale,
            ..DynamicsConfig::new(qubits, seed)
        };
        let ks = make_kraus(&cfg).unwrap();
        prop_assert!(ks.completeness_defect() <= 1e-12);
        let mut rho = DensityMatrix::pure(&qstrack::linalg::CVector::from_fn(cfg.dim(), |i, _| c(1.0 + i as f64, 0.5))).unwrap();
        for _ in 0..50 {
            rho = evolve(&rho, &ks).unwrap();
        }
        prop_assert!((rho.trace().re - 1.0).abs() <= 1e-12);
        prop_assert!(rho.min_eigenvalue().unwrap() >= -1e-12);
    }
}
